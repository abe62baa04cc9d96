//! Simulator of the behavioral model: workload Y per shift, per-patient
//! shocks Δ, true fatigue Y* = Y + Δ, notes written from Y*, and decisions
//! and outcomes driven by Y*. Ground truth is kept for every note.
//!
//! Two note forms are available. The linear form writes each note as the
//! vector W = Y* A, for which least squares of Y on W has a closed form when
//! YᵀΔ = 0. The text form writes ordinary notes whose style depends on Y*,
//! so the whole pipeline can be run with a known answer.

mod linear;
mod schedule;
mod text;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::Utc;

pub use linear::{
    attenuation_experiment, orthogonalize, shrinkage_check, simulate_linear, AttenuationReplicate, AttenuationReport,
    DagConfig, LinearCorpus, ShrinkageReport, Truth, ATTENUATION_ALPHA,
};
pub use schedule::{build_schedule, draw_records, SimRecord, SimShift, NONWHITE_SHARE, SIM_COMPLAINTS};
pub use text::{neutral_words, simulate_text_corpus, StyleMap, StyleProfile, TextCorpus, PLAN_HEADING};

use crate::corpus::{compute_workload, segment_shifts, Encounter, NoteRecord, SegmentConfig, WorkloadThresholds};
use crate::econometrics::{analysis_rows, AnalysisRow};
use crate::Result;

/// Segments, labels and joins a simulated corpus (whose clock is UTC) into
/// analysis rows carrying `scores` as the fatigue score.
pub fn pipeline_rows(
    notes: &[NoteRecord],
    encounters: &[Encounter],
    scores: &BTreeMap<String, f64>,
) -> Result<Vec<AnalysisRow>> {
    let shifts = segment_shifts(notes, &Utc, &SegmentConfig::default())?;
    let labels = compute_workload(&shifts, &WorkloadThresholds::default());
    Ok(analysis_rows(notes, encounters, &shifts, &labels, scores, &Utc))
}

/// Complaint vocabulary of simulated corpora.
pub fn complaint_vocabulary() -> Vec<String> {
    SIM_COMPLAINTS.iter().map(|c| String::from(c.0)).collect()
}

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{note_labels, Encounter, NoteRecord, Shift, WorkloadClass, WorkloadLabel};
use crate::{Error, Result};

/// Training share of patients: 32,784 of 44,556 balanced encounters.
pub const DEFAULT_TRAIN_FRACTION: f64 = 32_784.0 / 44_556.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceConfig {
    pub seed: u64,
    pub train_fraction: f64,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self { seed: 0, train_fraction: DEFAULT_TRAIN_FRACTION }
    }
}

/// Patient-level partition. `train_note_ids`/`heldout_note_ids` hold the
/// balanced classifier notes; the patient sets cover every patient in the
/// corpus so that unbalanced notes can be routed to the same side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub split_level: String,
    pub train_note_ids: BTreeSet<String>,
    pub heldout_note_ids: BTreeSet<String>,
    pub train_patients: BTreeSet<String>,
    pub heldout_patients: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplaintBalance {
    pub complaint: String,
    pub high_available: usize,
    pub low_available: usize,
    /// Notes kept per class.
    pub retained: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalancedDataset {
    pub split: DatasetSplit,
    /// Class of every balanced note (only `High` and `Low`).
    pub classes: BTreeMap<String, WorkloadClass>,
    pub complaints: Vec<ComplaintBalance>,
    /// Complaints lacking notes in one of the two classes.
    pub excluded_complaints: Vec<String>,
}

impl BalancedDataset {
    pub fn is_high(&self, note_id: &str) -> Option<bool> {
        self.classes.get(note_id).map(|c| *c == WorkloadClass::High)
    }
}

/// Samples equal numbers of high- and low-workload notes per primary chief
/// complaint (without replacement), then splits patients into train and
/// held-out sides.
pub fn build_balanced_dataset(
    notes: &[NoteRecord],
    encounters: &[Encounter],
    shifts: &[Shift],
    labels: &[WorkloadLabel],
    config: &BalanceConfig,
) -> Result<BalancedDataset> {
    if !(0.0..=1.0).contains(&config.train_fraction) {
        return Err(Error::Config(alloc::format!("train_fraction {} outside [0, 1]", config.train_fraction)));
    }
    let by_note = note_labels(shifts, labels);
    let encounter_of: BTreeMap<&str, &Encounter> = encounters.iter().map(|e| (e.note_id.as_str(), e)).collect();

    // complaint -> (high notes, low notes), each sorted by note id.
    let mut pools: BTreeMap<&str, (Vec<&str>, Vec<&str>)> = BTreeMap::new();
    for note in notes {
        let (Some(label), Some(enc)) = (by_note.get(note.note_id.as_str()), encounter_of.get(note.note_id.as_str()))
        else {
            continue;
        };
        let entry = pools.entry(enc.primary_complaint()).or_default();
        match label.class {
            WorkloadClass::High => entry.0.push(&note.note_id),
            WorkloadClass::Low => entry.1.push(&note.note_id),
            WorkloadClass::Mid => {}
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut classes = BTreeMap::new();
    let mut complaints = Vec::new();
    let mut excluded = Vec::new();
    for (complaint, (mut high, mut low)) in pools {
        if high.is_empty() || low.is_empty() {
            excluded.push(String::from(complaint));
            continue;
        }
        high.sort_unstable();
        low.sort_unstable();
        let keep = high.len().min(low.len());
        high.shuffle(&mut rng);
        low.shuffle(&mut rng);
        for id in &high[..keep] {
            classes.insert(String::from(*id), WorkloadClass::High);
        }
        for id in &low[..keep] {
            classes.insert(String::from(*id), WorkloadClass::Low);
        }
        complaints.push(ComplaintBalance {
            complaint: String::from(complaint),
            high_available: high.len(),
            low_available: low.len(),
            retained: keep,
        });
    }

    let mut patients: Vec<&str> = notes.iter().map(|n| n.patient_id.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
    patients.shuffle(&mut rng);
    let n_train = libm::round(config.train_fraction * patients.len() as f64) as usize;
    let train_patients: BTreeSet<String> = patients[..n_train].iter().map(|p| String::from(*p)).collect();
    let heldout_patients: BTreeSet<String> = patients[n_train..].iter().map(|p| String::from(*p)).collect();

    let mut train_note_ids = BTreeSet::new();
    let mut heldout_note_ids = BTreeSet::new();
    for note in notes {
        if classes.contains_key(&note.note_id) {
            if train_patients.contains(&note.patient_id) {
                train_note_ids.insert(note.note_id.clone());
            } else {
                heldout_note_ids.insert(note.note_id.clone());
            }
        }
    }

    Ok(BalancedDataset {
        split: DatasetSplit {
            seed: config.seed,
            split_level: String::from("patient"),
            train_note_ids,
            heldout_note_ids,
            train_patients,
            heldout_patients,
        },
        classes,
        complaints,
        excluded_complaints: excluded,
    })
}

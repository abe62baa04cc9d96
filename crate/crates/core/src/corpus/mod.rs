//! Note records, shift reconstruction, workload labels and the balanced
//! classifier dataset.

mod balance;
mod dataset;
mod records;
mod shifts;
mod workload;

pub use balance::{balance_check, BalanceReport, BalanceRow};
pub use dataset::{build_balanced_dataset, BalanceConfig, BalancedDataset, ComplaintBalance, DatasetSplit};
pub use records::{
    split_sections, strip_boilerplate, Encounter, Language, NoteRecord, Race, RejectReason, Section,
    Sex, HPI_HEADING,
};
pub use shifts::{rest_violations, segment_shifts, RestViolation, SegmentConfig, Shift};
pub use workload::{compute_workload, note_labels, WorkloadClass, WorkloadLabel, WorkloadThresholds};

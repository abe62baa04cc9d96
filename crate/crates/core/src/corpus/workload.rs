use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Shift;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadClass {
    High,
    Low,
    Mid,
}

impl WorkloadClass {
    pub fn as_str(self) -> &'static str {
        match self {
            WorkloadClass::High => "high",
            WorkloadClass::Low => "low",
            WorkloadClass::Mid => "mid",
        }
    }
}

/// Days worked in the six days before the shift's calendar day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadLabel {
    pub shift_id: String,
    pub prior_days_worked: u8,
    /// Always `prior_days_worked + 1`: the current day is worked.
    pub total_days_in_window: u8,
    pub class: WorkloadClass,
}

/// `high` when at least `high_min_prior` prior days were worked (four prior
/// days plus today is five of seven); `low` when at most `low_max_prior`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadThresholds {
    pub high_min_prior: u8,
    pub low_max_prior: u8,
}

impl Default for WorkloadThresholds {
    fn default() -> Self {
        Self { high_min_prior: 4, low_max_prior: 0 }
    }
}

impl WorkloadThresholds {
    pub fn classify(&self, prior: u8) -> WorkloadClass {
        if prior >= self.high_min_prior {
            WorkloadClass::High
        } else if prior <= self.low_max_prior {
            WorkloadClass::Low
        } else {
            WorkloadClass::Mid
        }
    }
}

pub fn compute_workload(shifts: &[Shift], thresholds: &WorkloadThresholds) -> Vec<WorkloadLabel> {
    let mut days: BTreeMap<&str, BTreeSet<i64>> = BTreeMap::new();
    for s in shifts {
        days.entry(&s.physician_id).or_default().insert(s.day);
    }
    shifts
        .iter()
        .map(|s| {
            let worked = &days[s.physician_id.as_str()];
            let prior = worked.range(s.day - 6..s.day).count() as u8;
            WorkloadLabel {
                shift_id: s.shift_id.clone(),
                prior_days_worked: prior,
                total_days_in_window: prior + 1,
                class: thresholds.classify(prior),
            }
        })
        .collect()
}

/// Label of each note, via the shift that contains it.
pub fn note_labels<'a>(shifts: &'a [Shift], labels: &'a [WorkloadLabel]) -> BTreeMap<&'a str, &'a WorkloadLabel> {
    let by_shift: BTreeMap<&str, &WorkloadLabel> = labels.iter().map(|l| (l.shift_id.as_str(), l)).collect();
    let mut out = BTreeMap::new();
    for s in shifts {
        if let Some(label) = by_shift.get(s.shift_id.as_str()) {
            for id in &s.note_ids {
                out.insert(id.as_str(), *label);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;
    use chrono::{TimeZone, Utc};

    fn shift(doc: &str, day: i64) -> Shift {
        Shift {
            shift_id: format!("{doc}#{day}"),
            physician_id: doc.into(),
            start: Utc.timestamp_opt(day * 86_400, 0).unwrap(),
            end: Utc.timestamp_opt(day * 86_400, 0).unwrap(),
            note_ids: vec![format!("{doc}{day}")],
            start_hour_adjusted: 0.0,
            day,
        }
    }

    fn label_for(days: &[i64], d: i64) -> WorkloadLabel {
        let shifts: Vec<Shift> = days.iter().map(|&x| shift("p", x)).collect();
        let labels = compute_workload(&shifts, &WorkloadThresholds::default());
        labels.into_iter().find(|l| l.shift_id == format!("p#{d}")).unwrap()
    }

    #[test]
    fn first_shift_in_a_week_is_low() {
        let l = label_for(&[100], 100);
        assert_eq!((l.prior_days_worked, l.class), (0, WorkloadClass::Low));
        assert_eq!(l.total_days_in_window, 1);
    }

    #[test]
    fn four_prior_days_is_high() {
        let l = label_for(&[96, 97, 98, 99, 100], 100);
        assert_eq!((l.prior_days_worked, l.class), (4, WorkloadClass::High));
    }

    #[test]
    fn three_scattered_days_is_mid() {
        let l = label_for(&[94, 95, 98, 100], 100);
        assert_eq!((l.prior_days_worked, l.class), (3, WorkloadClass::Mid));
    }

    #[test]
    fn day_seven_back_is_outside_window() {
        let l = label_for(&[93, 100], 100);
        assert_eq!(l.prior_days_worked, 0);
    }

    #[test]
    fn two_shifts_same_day_count_once() {
        let mut shifts = vec![shift("p", 99), shift("p", 100)];
        let mut extra = shift("p", 99);
        extra.shift_id = "p#99b".into();
        shifts.push(extra);
        let labels = compute_workload(&shifts, &WorkloadThresholds::default());
        assert_eq!(labels[1].prior_days_worked, 1);
    }
}

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::NoteRecord;
use crate::time::{adjusted_start_hour, LocalClock};
use crate::{Error, Result};

/// A maximal run of one physician's notes with no gap above the configured
/// maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub shift_id: String,
    pub physician_id: String,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    /// Time sorted, never empty.
    pub note_ids: Vec<String>,
    /// `(local start hour - 6) mod 24`, with minutes as a fraction.
    pub start_hour_adjusted: f64,
    /// Local calendar day of the first note, as days since 0001-01-01.
    pub day: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentConfig {
    /// A gap of exactly this length still continues the shift.
    pub max_gap: Duration,
    /// Expected minimum rest between shifts; only reported, never enforced.
    pub min_rest: Duration,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self { max_gap: Duration::hours(3), min_rest: Duration::hours(15) }
    }
}

/// Splits notes into shifts, per physician, in one pass over time-sorted
/// notes. Shift ids are `<physician>#<ordinal>`.
pub fn segment_shifts(
    notes: &[NoteRecord],
    clock: &impl LocalClock,
    config: &SegmentConfig,
) -> Result<Vec<Shift>> {
    let mut seen = BTreeSet::new();
    let mut by_physician: BTreeMap<&str, Vec<&NoteRecord>> = BTreeMap::new();
    for note in notes {
        if !seen.insert(note.note_id.as_str()) {
            return Err(Error::DuplicateNote(note.note_id.clone()));
        }
        by_physician.entry(note.physician_id.as_str()).or_default().push(note);
    }

    let mut shifts = Vec::new();
    for (physician, mut list) in by_physician {
        list.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.note_id.cmp(&b.note_id)));
        let mut current: Vec<&NoteRecord> = Vec::new();
        let mut ordinal = 0usize;
        let mut flush = |current: &mut Vec<&NoteRecord>, ordinal: &mut usize| {
            if current.is_empty() {
                return;
            }
            let start = current[0].timestamp;
            shifts.push(Shift {
                shift_id: format!("{physician}#{ordinal}"),
                physician_id: String::from(physician),
                start,
                end: current[current.len() - 1].timestamp,
                note_ids: current.iter().map(|n| n.note_id.clone()).collect(),
                start_hour_adjusted: adjusted_start_hour(clock.hour_of_day(start)),
                day: clock.day(start),
            });
            *ordinal += 1;
            current.clear();
        };
        for note in list {
            if let Some(prev) = current.last() {
                if note.timestamp - prev.timestamp > config.max_gap {
                    flush(&mut current, &mut ordinal);
                }
            }
            current.push(note);
        }
        flush(&mut current, &mut ordinal);
    }
    Ok(shifts)
}

/// Consecutive shifts of one physician separated by less than the expected
/// rest period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestViolation {
    pub physician_id: String,
    pub previous_shift: String,
    pub shift: String,
    pub rest_minutes: i64,
}

pub fn rest_violations(shifts: &[Shift], min_rest: Duration) -> Vec<RestViolation> {
    let mut by_physician: BTreeMap<&str, Vec<&Shift>> = BTreeMap::new();
    for s in shifts {
        by_physician.entry(&s.physician_id).or_default().push(s);
    }
    let mut out = Vec::new();
    for (physician, mut list) in by_physician {
        list.sort_by_key(|s| s.start);
        for pair in list.windows(2) {
            let rest = pair[1].start - pair[0].end;
            if rest < min_rest {
                out.push(RestViolation {
                    physician_id: String::from(physician),
                    previous_shift: pair[0].shift_id.clone(),
                    shift: pair[1].shift_id.clone(),
                    rest_minutes: rest.num_minutes(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use chrono::TimeZone;

    fn note(id: &str, doc: &str, h: u32, m: u32) -> NoteRecord {
        NoteRecord {
            note_id: id.to_string(),
            physician_id: doc.to_string(),
            patient_id: id.to_string(),
            timestamp: Utc.with_ymd_and_hms(2024, 5, 1, h, m, 0).unwrap(),
            text: "x".to_string(),
            sections: Vec::new(),
        }
    }

    fn seg(notes: &[NoteRecord]) -> Vec<Shift> {
        segment_shifts(notes, &Utc, &SegmentConfig::default()).unwrap()
    }

    #[test]
    fn gaps_within_three_hours_form_one_shift() {
        let s = seg(&[note("a", "d", 8, 0), note("b", "d", 10, 0), note("c", "d", 12, 30)]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].note_ids, ["a", "b", "c"]);
    }

    #[test]
    fn twelve_hour_gap_splits() {
        let s = seg(&[note("a", "d", 8, 0), note("b", "d", 20, 0)]);
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].shift_id, "d#1");
    }

    #[test]
    fn physicians_are_independent() {
        let s = seg(&[note("a", "d1", 8, 0), note("b", "d2", 8, 30)]);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].physician_id, "d1");
        assert_eq!(s[1].physician_id, "d2");
    }

    #[test]
    fn exact_boundary_stays_in_shift() {
        let s = seg(&[note("a", "d", 8, 0), note("b", "d", 11, 0), note("c", "d", 14, 1)]);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].note_ids, ["a", "b"]);
    }

    #[test]
    fn unsorted_input_is_sorted() {
        let s = seg(&[note("c", "d", 12, 0), note("a", "d", 8, 0), note("b", "d", 10, 0)]);
        assert_eq!(s[0].note_ids, ["a", "b", "c"]);
        assert_eq!(s[0].start_hour_adjusted, 2.0);
    }

    #[test]
    fn duplicate_ids_error() {
        let r = segment_shifts(&[note("a", "d", 8, 0), note("a", "e", 9, 0)], &Utc, &SegmentConfig::default());
        assert_eq!(r, Err(Error::DuplicateNote("a".into())));
    }

    #[test]
    fn short_rest_is_reported() {
        let s = seg(&[note("a", "d", 1, 0), note("b", "d", 8, 0)]);
        let v = rest_violations(&s, Duration::hours(15));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rest_minutes, 420);
    }
}

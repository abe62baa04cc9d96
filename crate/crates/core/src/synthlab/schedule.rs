//! Work calendars and patient draws shared by the linear and text
//! simulators.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Encounter, Language, NoteRecord, Race, Section, Sex};

/// Chief complaints with their draw weight and testing probability.
pub const SIM_COMPLAINTS: [(&str, f64, f64); 10] = [
    ("abdominal_pain", 1.5, 0.2),
    ("chest_pain", 1.5, 0.7),
    ("dizziness", 1.0, 0.3),
    ("fall", 1.0, 0.1),
    ("fever", 1.0, 0.1),
    ("headache", 1.0, 0.1),
    ("nausea", 1.0, 0.15),
    ("shortness_of_breath", 1.2, 0.5),
    ("syncope", 0.8, 0.4),
    ("weakness", 1.0, 0.2),
];

/// Share of non-white patients; the planted correlation ρ is defined against
/// this population indicator.
pub const NONWHITE_SHARE: f64 = 0.5;

// (block length in days, weight); every block is followed by 7 to 9 days off,
// so a block opens on a low-workload day and day 5 onward is high.
const BLOCKS: [(usize, u32); 2] = [(1, 3), (8, 1)];
const SHIFT_START_HOURS: [i64; 3] = [7, 15, 23];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimShift {
    pub physician: usize,
    /// Days since 0001-01-01, UTC.
    pub day: i64,
    /// Days worked by the physician in the six days before `day`.
    pub prior_days: u8,
    pub note_times: Vec<DateTime<Utc>>,
}

/// One simulated encounter without its outcomes and text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub note_id: String,
    pub physician_id: String,
    pub patient_id: String,
    pub shift: usize,
    pub timestamp: DateTime<Utc>,
    pub arrival: DateTime<Utc>,
    pub age: u32,
    pub sex: Sex,
    pub race: Race,
    pub language: Option<Language>,
    pub complaints: Vec<String>,
    pub tested: bool,
}

impl SimRecord {
    pub fn nonwhite(&self) -> bool {
        self.race != Race::White
    }

    /// Arrival between 01:00 and 05:59 UTC.
    pub fn overnight(&self) -> bool {
        let h = (self.arrival.timestamp().rem_euclid(86_400)) as f64 / 3600.0;
        (1.0..6.0).contains(&h)
    }

    pub fn to_note(&self, text: String, sections: Vec<Section>) -> NoteRecord {
        NoteRecord {
            note_id: self.note_id.clone(),
            physician_id: self.physician_id.clone(),
            patient_id: self.patient_id.clone(),
            timestamp: self.timestamp,
            text,
            sections,
        }
    }

    pub fn to_encounter(&self, test_positive: bool) -> Encounter {
        Encounter {
            note_id: self.note_id.clone(),
            age: self.age,
            sex: self.sex,
            race: self.race,
            primary_language: self.language,
            chief_complaints: self.complaints.clone(),
            arrival_time: self.arrival,
            tested: self.tested,
            test_positive: test_positive && self.tested,
        }
    }
}

fn epoch_day() -> i64 {
    i64::from(chrono::Datelike::num_days_from_ce(&NaiveDate::from_ymd_opt(2023, 1, 2).expect("valid date")))
}

fn day_start(day: i64) -> DateTime<Utc> {
    let base = NaiveDate::from_ymd_opt(2023, 1, 2).expect("valid date").and_hms_opt(0, 0, 0).expect("valid time");
    (base + Duration::days(day - epoch_day())).and_utc()
}

/// Lays out `n_shifts` working days per physician in blocks separated by
/// rest, with `patients_per_shift` notes per shift spaced 10 to 90 minutes
/// apart (never more than three hours).
pub fn build_schedule<R: Rng + ?Sized>(
    n_physicians: usize,
    n_shifts: usize,
    patients_per_shift: usize,
    rng: &mut R,
) -> Vec<SimShift> {
    let max_gap = (720 / patients_per_shift.max(1) as i64).clamp(10, 90);
    let total_weight: u32 = BLOCKS.iter().map(|b| b.1).sum();
    let mut shifts = Vec::with_capacity(n_physicians * n_shifts);
    for physician in 0..n_physicians {
        let mut day = epoch_day() + rng.random_range(0..14);
        let mut days: Vec<(i64, i64)> = Vec::with_capacity(n_shifts);
        while days.len() < n_shifts {
            let mut pick = rng.random_range(0..total_weight);
            let mut len = BLOCKS[0].0;
            for (l, w) in BLOCKS {
                if pick < w {
                    len = l;
                    break;
                }
                pick -= w;
            }
            let hour = SHIFT_START_HOURS[rng.random_range(0..SHIFT_START_HOURS.len())];
            for _ in 0..len.min(n_shifts - days.len()) {
                days.push((day, hour));
                day += 1;
            }
            day += rng.random_range(7..=9);
        }
        let worked: BTreeSet<i64> = days.iter().map(|d| d.0).collect();
        for (d, hour) in days {
            let mut t = day_start(d) + Duration::minutes(hour * 60 + rng.random_range(-30..=30));
            let mut note_times = Vec::with_capacity(patients_per_shift);
            for k in 0..patients_per_shift {
                t += Duration::minutes(if k == 0 { rng.random_range(0..=30) } else { rng.random_range(10..=max_gap) });
                note_times.push(t);
            }
            let prior_days = worked.range(d - 6..d).count() as u8;
            shifts.push(SimShift { physician, day: d, prior_days, note_times });
        }
    }
    shifts
}

struct Patient {
    id: String,
    age: u32,
    sex: Sex,
    race: Race,
    language: Option<Language>,
}

fn draw_patient<R: Rng + ?Sized>(index: usize, rng: &mut R) -> Patient {
    let u: f64 = rng.random();
    let race = if u < 1.0 - NONWHITE_SHARE {
        Race::White
    } else if u < 0.7 {
        Race::Black
    } else if u < 0.9 {
        Race::Hispanic
    } else {
        Race::Other
    };
    let v: f64 = rng.random();
    let language = match race {
        Race::Hispanic if v < 0.4 => Language::Spanish,
        _ if v > 0.95 => Language::Other,
        _ => Language::English,
    };
    Patient {
        id: format!("pt{index:06}"),
        age: rng.random_range(18..=90),
        sex: if rng.random::<bool>() { Sex::Female } else { Sex::Male },
        race,
        language: Some(language),
    }
}

fn pick_complaint<R: Rng + ?Sized>(rng: &mut R) -> &'static str {
    let total: f64 = SIM_COMPLAINTS.iter().map(|c| c.1).sum();
    let mut u = rng.random::<f64>() * total;
    for (name, w, _) in SIM_COMPLAINTS {
        if u < w {
            return name;
        }
        u -= w;
    }
    SIM_COMPLAINTS[SIM_COMPLAINTS.len() - 1].0
}

fn draw_complaints<R: Rng + ?Sized>(rng: &mut R) -> Vec<String> {
    let mut set = BTreeSet::from([pick_complaint(rng)]);
    if rng.random::<f64>() < 0.2 {
        set.insert(pick_complaint(rng));
    }
    set.into_iter().map(ToString::to_string).collect()
}

/// One record per scheduled note. About one encounter in ten belongs to a
/// returning patient, who keeps their demographics.
pub fn draw_records<R: Rng + ?Sized>(shifts: &[SimShift], rng: &mut R) -> Vec<SimRecord> {
    let mut patients: Vec<Patient> = Vec::new();
    let mut out = Vec::new();
    for (s, shift) in shifts.iter().enumerate() {
        for &t in &shift.note_times {
            let p = if !patients.is_empty() && rng.random::<f64>() < 0.1 {
                rng.random_range(0..patients.len())
            } else {
                let p = draw_patient(patients.len(), rng);
                patients.push(p);
                patients.len() - 1
            };
            let complaints = draw_complaints(rng);
            let test_p = complaints
                .iter()
                .map(|c| SIM_COMPLAINTS.iter().find(|x| x.0 == c).map_or(0.2, |x| x.2))
                .fold(0.0, f64::max);
            let patient = &patients[p];
            out.push(SimRecord {
                note_id: format!("n{:07}", out.len()),
                physician_id: format!("md{:03}", shift.physician),
                patient_id: patient.id.clone(),
                shift: s,
                timestamp: t,
                arrival: t - Duration::minutes(rng.random_range(5..=120)),
                age: patient.age,
                sex: patient.sex,
                race: patient.race,
                language: patient.language,
                complaints,
                tested: rng.random::<f64>() < test_p,
            });
        }
    }
    out
}

/// Every record's shift-level value, expanded from per-shift values.
pub(crate) fn per_record(records: &[SimRecord], by_shift: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; records.len()];
    for (o, r) in out.iter_mut().zip(records) {
        *o = by_shift[r.shift];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{compute_workload, segment_shifts, SegmentConfig, WorkloadThresholds};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schedule_reproduces_under_segmentation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shifts = build_schedule(6, 30, 8, &mut rng);
        let records = draw_records(&shifts, &mut rng);
        let notes: Vec<NoteRecord> = records.iter().map(|r| r.to_note("x".into(), Vec::new())).collect();
        let seg = segment_shifts(&notes, &Utc, &SegmentConfig::default()).unwrap();
        assert_eq!(seg.len(), shifts.len());
        let labels = compute_workload(&seg, &WorkloadThresholds::default());
        let mut got: Vec<(String, i64, u8)> = seg
            .iter()
            .zip(&labels)
            .map(|(s, l)| (s.physician_id.clone(), s.day, l.prior_days_worked))
            .collect();
        let mut want: Vec<(String, i64, u8)> =
            shifts.iter().map(|s| (format!("md{:03}", s.physician), s.day, s.prior_days)).collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn both_workload_classes_are_common() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shifts = build_schedule(20, 50, 1, &mut rng);
        let high = shifts.iter().filter(|s| s.prior_days >= 4).count() as f64 / shifts.len() as f64;
        let low = shifts.iter().filter(|s| s.prior_days == 0).count() as f64 / shifts.len() as f64;
        assert!(high > 0.25 && low > 0.25, "{high} {low}");
    }

    #[test]
    fn records_are_valid_encounters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shifts = build_schedule(3, 10, 10, &mut rng);
        for r in draw_records(&shifts, &mut rng) {
            assert!(r.to_encounter(true).validate(None).is_ok());
            assert!(r.arrival < r.timestamp);
        }
    }
}

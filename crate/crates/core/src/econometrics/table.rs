use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{note_labels, Encounter, Language, NoteRecord, Race, Sex, Shift, WorkloadClass, WorkloadLabel};
use crate::econometrics::circadian_variance;
use crate::time::{LocalClock, TimeBins};

/// One note joined with everything the regression suites need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub note_id: String,
    pub patient_id: String,
    pub physician_id: String,
    pub shift_id: String,
    pub prior_days: u8,
    pub class: WorkloadClass,
    /// Standardized fatigue score, when the note was scored.
    pub fatigue: Option<f64>,
    /// Local arrival hour with minutes as a fraction.
    pub arrival_hour: f64,
    pub hour: u32,
    pub weekday: u32,
    pub iso_week: u32,
    pub year: i32,
    pub age: f64,
    pub sex: Sex,
    pub race: Race,
    pub language: Option<Language>,
    pub complaints: Vec<String>,
    pub tested: bool,
    pub test_positive: bool,
    pub start_time_variance: f64,
    /// Notes written earlier in the same shift.
    pub patients_seen_prior: u32,
}

impl AnalysisRow {
    /// Arrival between 01:00 and 05:59, when only the overnight physician
    /// takes new patients.
    pub fn overnight(&self) -> bool {
        (1.0..6.0).contains(&self.arrival_hour)
    }

    pub fn set_time(&mut self, clock: &impl LocalClock, arrival: DateTime<Utc>) {
        let bins = TimeBins::of(clock, arrival);
        self.arrival_hour = clock.hour_of_day(arrival);
        self.hour = bins.hour;
        self.weekday = bins.weekday;
        self.iso_week = bins.iso_week;
        self.year = bins.year;
    }
}

/// Joins notes, encounters, shifts and labels into analysis rows. Notes
/// without an encounter or a shift are skipped. `scores` maps note id to the
/// standardized fatigue score.
pub fn analysis_rows(
    notes: &[NoteRecord],
    encounters: &[Encounter],
    shifts: &[Shift],
    labels: &[WorkloadLabel],
    scores: &BTreeMap<String, f64>,
    clock: &impl LocalClock,
) -> Vec<AnalysisRow> {
    let by_note = note_labels(shifts, labels);
    let encounter_of: BTreeMap<&str, &Encounter> = encounters.iter().map(|e| (e.note_id.as_str(), e)).collect();
    let variance: BTreeMap<String, f64> =
        circadian_variance(shifts).into_iter().map(|c| (c.shift_id, c.start_time_variance)).collect();
    let mut position: BTreeMap<&str, (&Shift, u32)> = BTreeMap::new();
    for s in shifts {
        for (i, id) in s.note_ids.iter().enumerate() {
            position.insert(id, (s, i as u32));
        }
    }
    let mut rows = Vec::new();
    for note in notes {
        let id = note.note_id.as_str();
        let (Some(enc), Some(label), Some((shift, pos))) = (encounter_of.get(id), by_note.get(id), position.get(id))
        else {
            continue;
        };
        let mut row = AnalysisRow {
            note_id: note.note_id.clone(),
            patient_id: note.patient_id.clone(),
            physician_id: note.physician_id.clone(),
            shift_id: shift.shift_id.clone(),
            prior_days: label.prior_days_worked,
            class: label.class,
            fatigue: scores.get(id).copied(),
            arrival_hour: 0.0,
            hour: 0,
            weekday: 0,
            iso_week: 0,
            year: 0,
            age: f64::from(enc.age),
            sex: enc.sex,
            race: enc.race,
            language: enc.primary_language,
            complaints: enc.chief_complaints.clone(),
            tested: enc.tested,
            test_positive: enc.test_positive,
            start_time_variance: variance.get(&shift.shift_id).copied().unwrap_or(0.0),
            patients_seen_prior: *pos,
        };
        row.set_time(clock, enc.arrival_time);
        rows.push(row);
    }
    rows
}

/// A column of a [`DataTable`]; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub enum Variable {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
    /// Set-valued categorical (e.g. several chief complaints); expands to one
    /// indicator per level with no reference level.
    MultiHot(Vec<Vec<String>>),
}

impl Variable {
    fn len(&self) -> usize {
        match self {
            Variable::Numeric(v) => v.len(),
            Variable::Categorical(v) => v.len(),
            Variable::MultiHot(v) => v.len(),
        }
    }

    pub(crate) fn is_missing(&self, row: usize) -> bool {
        match self {
            Variable::Numeric(v) => v[row].map_or(true, |x| !x.is_finite()),
            Variable::Categorical(v) => v[row].is_none(),
            Variable::MultiHot(_) => false,
        }
    }

    fn select(&self, rows: &[usize]) -> Variable {
        match self {
            Variable::Numeric(v) => Variable::Numeric(rows.iter().map(|&i| v[i]).collect()),
            Variable::Categorical(v) => Variable::Categorical(rows.iter().map(|&i| v[i].clone()).collect()),
            Variable::MultiHot(v) => Variable::MultiHot(rows.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

/// Named columns of equal length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataTable {
    n: usize,
    columns: BTreeMap<String, Variable>,
}

impl DataTable {
    pub fn new(n: usize) -> Self {
        Self { n, columns: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Adds or replaces a column. Panics on length mismatch.
    pub fn insert(&mut self, name: impl Into<String>, column: Variable) {
        assert_eq!(column.len(), self.n, "column length must match table");
        self.columns.insert(name.into(), column);
    }

    pub fn numeric(&mut self, name: impl Into<String>, values: impl IntoIterator<Item = f64>) {
        let v: Vec<Option<f64>> = values.into_iter().map(Some).collect();
        self.insert(name, Variable::Numeric(v));
    }

    pub fn get(&self, name: &str) -> Option<&Variable> {
        self.columns.get(name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    /// Rows `rows` of every column, in the given order.
    pub fn select(&self, rows: &[usize]) -> DataTable {
        DataTable { n: rows.len(), columns: self.columns.iter().map(|(k, v)| (k.clone(), v.select(rows))).collect() }
    }

    /// Standard columns derived from analysis rows:
    ///
    /// numeric `fatigue`, `workload`, `high` (missing for mid), `overnight`,
    /// `start_time_variance`, `patients_seen_prior`, `age`, `female`,
    /// `arrival_hour`, `tested`, `test_positive` and race indicators
    /// `race_white`…`race_other`; categorical `sex`, `race`, `language`,
    /// `race_language` (English/Spanish speakers only, Hispanic split by
    /// language), `time_of_day`, `day_of_week`, `week_of_year`, `year`,
    /// `physician`; multi-hot `chief_complaint`.
    pub fn from_rows(rows: &[AnalysisRow]) -> DataTable {
        let mut t = DataTable::new(rows.len());
        t.insert("fatigue", Variable::Numeric(rows.iter().map(|r| r.fatigue).collect()));
        t.numeric("workload", rows.iter().map(|r| f64::from(r.prior_days)));
        t.insert(
            "high",
            Variable::Numeric(
                rows.iter()
                    .map(|r| match r.class {
                        WorkloadClass::High => Some(1.0),
                        WorkloadClass::Low => Some(0.0),
                        WorkloadClass::Mid => None,
                    })
                    .collect(),
            ),
        );
        t.numeric("overnight", rows.iter().map(|r| indicator(r.overnight())));
        t.numeric("start_time_variance", rows.iter().map(|r| r.start_time_variance));
        t.numeric("patients_seen_prior", rows.iter().map(|r| f64::from(r.patients_seen_prior)));
        t.numeric("age", rows.iter().map(|r| r.age));
        t.numeric("female", rows.iter().map(|r| indicator(r.sex == Sex::Female)));
        t.numeric("arrival_hour", rows.iter().map(|r| r.arrival_hour));
        t.numeric("tested", rows.iter().map(|r| indicator(r.tested)));
        t.numeric("test_positive", rows.iter().map(|r| indicator(r.test_positive)));
        for race in Race::ALL {
            t.numeric(format!("race_{}", race.as_str()), rows.iter().map(|r| indicator(r.race == race)));
        }
        t.insert("sex", categorical(rows.iter().map(|r| Some(r.sex.as_str().to_string()))));
        t.insert("race", categorical(rows.iter().map(|r| Some(r.race.as_str().to_string()))));
        t.insert("language", categorical(rows.iter().map(|r| r.language.map(|l| l.as_str().to_string()))));
        t.insert(
            "race_language",
            categorical(rows.iter().map(|r| match (r.race, r.language) {
                (_, None | Some(Language::Other)) => None,
                (Race::Hispanic, Some(l)) => Some(format!("hispanic-{}", l.as_str())),
                (race, Some(_)) => Some(race.as_str().to_string()),
            })),
        );
        t.insert("time_of_day", categorical(rows.iter().map(|r| Some(format!("{:02}", r.hour)))));
        t.insert("day_of_week", categorical(rows.iter().map(|r| Some(format!("{}", r.weekday)))));
        t.insert("week_of_year", categorical(rows.iter().map(|r| Some(format!("{:02}", r.iso_week)))));
        t.insert("year", categorical(rows.iter().map(|r| Some(format!("{}", r.year)))));
        t.insert("physician", categorical(rows.iter().map(|r| Some(r.physician_id.clone()))));
        t.insert("chief_complaint", Variable::MultiHot(rows.iter().map(|r| r.complaints.clone()).collect()));
        t
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn categorical(values: impl Iterator<Item = Option<String>>) -> Variable {
    Variable::Categorical(values.collect())
}

//! Stage artifact formats. CSVs are UTF-8, comma-delimited, with a header
//! row; floats are written in shortest round-trip form.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use fatlens_core::corpus::{BalancedDataset, WorkloadClass, WorkloadLabel};
use fatlens_core::econometrics::{RegressionResult, SuiteColumn};
use fatlens_core::textfeat::{FeatureVector, LexiconSet};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub fn data_err(path: &Path) -> impl Fn(String) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(CliError::io(path))
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("serializable");
        out.push(b'\n');
    }
    out
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| data_err(path)(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| data_err(path)(e.to_string()))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

fn read_csv_rows(path: &Path, expected: &[&str]) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let text = read_text(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(|e| data_err(path)(e.to_string()))?.iter().map(String::from).collect();
    if header.len() < expected.len() || header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(data_err(path)(format!("header must start with {}", expected.join(","))));
    }
    let rows = r.records().collect::<std::result::Result<Vec<_>, _>>().map_err(|e| data_err(path)(e.to_string()))?;
    Ok((header, rows))
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|e| data_err(path)(format!("`{s}`: {e}")))
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

// Workload labels.

pub const LABELS_HEADER: [&str; 4] = ["shift_id", "prior_days_worked", "total_days_in_window", "class"];

pub fn labels_csv(labels: &[WorkloadLabel]) -> Vec<u8> {
    csv_bytes(
        &LABELS_HEADER,
        labels.iter().map(|l| {
            vec![l.shift_id.clone(), l.prior_days_worked.to_string(), l.total_days_in_window.to_string(), l.class.as_str().into()]
        }),
    )
}

pub fn read_labels(path: &Path) -> Result<Vec<WorkloadLabel>> {
    let (_, rows) = read_csv_rows(path, &LABELS_HEADER)?;
    rows.iter()
        .map(|r| {
            let num = |i: usize| r[i].parse::<u8>().map_err(|e| data_err(path)(format!("`{}`: {e}", &r[i])));
            let class = match &r[3] {
                "high" => WorkloadClass::High,
                "low" => WorkloadClass::Low,
                "mid" => WorkloadClass::Mid,
                other => return Err(data_err(path)(format!("unknown class `{other}`"))),
            };
            Ok(WorkloadLabel { shift_id: r[0].to_string(), prior_days_worked: num(1)?, total_days_in_window: num(2)?, class })
        })
        .collect()
}

// Train/held-out split.

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFile {
    pub seed: u64,
    /// Note ids.
    pub train: Vec<String>,
    pub heldout: Vec<String>,
}

impl SplitFile {
    pub fn of(dataset: &BalancedDataset) -> Self {
        Self {
            seed: dataset.split.seed,
            train: dataset.split.train_note_ids.iter().cloned().collect(),
            heldout: dataset.split.heldout_note_ids.iter().cloned().collect(),
        }
    }
}

// Feature vectors.

pub const FEATURE_PREFIX: [&str; 4] = ["note_id", "patient_id", "split", "class"];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub patient_id: String,
    /// `train`, `heldout` or `none` (not in the balanced dataset).
    pub split: String,
    pub class: String,
    pub vector: FeatureVector,
}

impl FeatureRow {
    pub fn high(&self) -> Option<bool> {
        match self.class.as_str() {
            "high" => Some(true),
            "low" => Some(false),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn to_csv(&self) -> Vec<u8> {
        let header: Vec<&str> = FEATURE_PREFIX.iter().copied().chain(self.names.iter().map(String::as_str)).collect();
        csv_bytes(
            &header,
            self.rows.iter().map(|r| {
                [r.vector.note_id.clone(), r.patient_id.clone(), r.split.clone(), r.class.clone()]
                    .into_iter()
                    .chain(r.vector.values.iter().map(f64::to_string))
                    .collect()
            }),
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (header, rows) = read_csv_rows(path, &FEATURE_PREFIX)?;
        let names = header[FEATURE_PREFIX.len()..].to_vec();
        let rows = rows
            .iter()
            .map(|r| {
                if r.len() != header.len() {
                    return Err(data_err(path)(format!("row with {} fields, header has {}", r.len(), header.len())));
                }
                let values =
                    r.iter().skip(FEATURE_PREFIX.len()).map(|v| parse_f64(path, v)).collect::<Result<Vec<_>>>()?;
                Ok(FeatureRow {
                    patient_id: r[1].to_string(),
                    split: r[2].to_string(),
                    class: r[3].to_string(),
                    vector: FeatureVector { note_id: r[0].to_string(), values },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { names, rows })
    }

    pub fn in_split<'a>(&'a self, split: &'a str) -> impl Iterator<Item = &'a FeatureRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }
}

// Perplexity from an external model.

pub fn read_perplexity_csv(path: &Path) -> Result<Vec<(String, f64)>> {
    let (_, rows) = read_csv_rows(path, &["note_id", "log2_perplexity"])?;
    rows.iter().map(|r| Ok((r[0].to_string(), parse_f64(path, &r[1])?))).collect()
}

// Fatigue scores.

pub const SCORES_HEADER: [&str; 3] = ["note_id", "probability", "fatigue"];

pub fn read_scores(path: &Path) -> Result<BTreeMap<String, f64>> {
    let (_, rows) = read_csv_rows(path, &SCORES_HEADER)?;
    rows.iter().map(|r| Ok((r[0].to_string(), parse_f64(path, &r[2])?))).collect()
}

pub fn scores_csv(rows: &[(String, f64, f64)]) -> Vec<u8> {
    csv_bytes(&SCORES_HEADER, rows.iter().map(|(id, p, z)| vec![id.clone(), p.to_string(), z.to_string()]))
}

// Regression tables.

pub const REGRESSION_HEADER: [&str; 11] =
    ["model", "term", "coef", "se", "t", "p", "stars", "focus", "n", "r_squared", "error"];

/// One CSV block for several named regressions: every term of every
/// successful fit, or a single row carrying the error.
pub fn regressions_csv(columns: &[(String, std::result::Result<&RegressionResult, String>)]) -> Vec<u8> {
    let mut rows = Vec::new();
    for (label, res) in columns {
        match res {
            Ok(r) => {
                for (i, t) in r.terms.iter().enumerate() {
                    rows.push(vec![
                        label.clone(),
                        t.name.clone(),
                        t.coef.to_string(),
                        t.se.to_string(),
                        t.t.to_string(),
                        t.p.to_string(),
                        t.stars.clone(),
                        (i < r.n_focus_terms).to_string(),
                        r.n.to_string(),
                        r.r_squared.to_string(),
                        String::new(),
                    ]);
                }
            }
            Err(e) => {
                let mut row = vec![label.clone()];
                row.extend(std::iter::repeat_n(String::new(), 9));
                row.push(e.clone());
                rows.push(row);
            }
        }
    }
    csv_bytes(&REGRESSION_HEADER, rows)
}

pub fn suite_columns(columns: &[SuiteColumn]) -> Vec<(String, std::result::Result<&RegressionResult, String>)> {
    columns.iter().map(|c| (c.label.clone(), c.result.as_ref().map_err(Clone::clone))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionRow {
    pub model: String,
    pub term: String,
    pub coef: f64,
    pub se: f64,
    pub p: f64,
    pub stars: String,
    /// Intercept or regressor rather than a fixed-effect dummy.
    pub focus: bool,
    pub n: Option<usize>,
    pub error: String,
}

pub fn read_regressions(path: &Path) -> Result<Vec<RegressionRow>> {
    let (_, rows) = read_csv_rows(path, &REGRESSION_HEADER)?;
    let f = |s: &str| if s.is_empty() { Ok(f64::NAN) } else { parse_f64(path, s) };
    rows.iter()
        .map(|r| {
            Ok(RegressionRow {
                model: r[0].to_string(),
                term: r[1].to_string(),
                coef: f(&r[2])?,
                se: f(&r[3])?,
                p: f(&r[5])?,
                stars: r[6].to_string(),
                focus: &r[7] == "true",
                n: r[8].parse().ok(),
                error: r[10].to_string(),
            })
        })
        .collect()
}

// Feature correlations.

pub const CORRELATIONS_HEADER: [&str; 4] = ["feature", "r", "p", "stars"];

pub fn read_correlations(path: &Path) -> Result<Vec<(String, Option<f64>, Option<f64>, String)>> {
    let (_, rows) = read_csv_rows(path, &CORRELATIONS_HEADER)?;
    let f = |s: &str| if s.is_empty() { Ok(None) } else { parse_f64(path, s).map(Some) };
    rows.iter().map(|r| Ok((r[0].to_string(), f(&r[1])?, f(&r[2])?, r[3].to_string()))).collect()
}

pub fn simple_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    csv_bytes(header, rows)
}

pub fn read_simple_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>> {
    let (_, rows) = read_csv_rows(path, header)?;
    Ok(rows.iter().map(|r| r.iter().map(String::from).collect()).collect())
}

pub fn load_lexicons(path: Option<&Path>) -> Result<LexiconSet> {
    match path {
        Some(p) => LexiconSet::parse(&read_text(p)?).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => Ok(LexiconSet::bundled()),
    }
}

/// Notes per note set, looked up from the dataset's patient split.
pub fn split_of(dataset: &BalancedDataset, note_id: &str) -> &'static str {
    if dataset.split.train_note_ids.contains(note_id) {
        "train"
    } else if dataset.split.heldout_note_ids.contains(note_id) {
        "heldout"
    } else {
        "none"
    }
}

pub fn id_set<'a>(ids: impl IntoIterator<Item = &'a String>) -> BTreeSet<&'a str> {
    ids.into_iter().map(String::as_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let t = FeatureTable {
            names: vec!["a".into(), "b,c".into()],
            rows: vec![FeatureRow {
                patient_id: "p".into(),
                split: "train".into(),
                class: "high".into(),
                vector: FeatureVector { note_id: "n1".into(), values: vec![0.1 + 0.2, -1e-300] },
            }],
        };
        let p = dir.path().join("f.csv");
        std::fs::write(&p, t.to_csv()).unwrap();
        assert_eq!(FeatureTable::read(&p).unwrap(), t);
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let l = vec![WorkloadLabel { shift_id: "p#1".into(), prior_days_worked: 4, total_days_in_window: 5, class: WorkloadClass::High }];
        let p = dir.path().join("l.csv");
        std::fs::write(&p, labels_csv(&l)).unwrap();
        assert_eq!(read_labels(&p).unwrap(), l);
        std::fs::write(&p, "x,y\n").unwrap();
        assert_eq!(read_labels(&p).unwrap_err().exit_code(), 4);
    }
}

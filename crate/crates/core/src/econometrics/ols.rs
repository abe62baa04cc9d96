use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{DataTable, Variable};
use crate::linalg::IncrementalQr;
use crate::stats::{stars, t_two_sided_p};
use crate::{Error, Result};

/// Name of the pooled level for rare control categories.
pub const POOLED_LEVEL: &str = "(other)";
pub const INTERCEPT: &str = "(intercept)";

/// Groups of fixed-effect controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    TimeOfDay,
    DayOfWeek,
    WeekOfYear,
    Year,
    /// Age (numeric), sex and race.
    Demographics,
    ChiefComplaint,
    Physician,
}

impl Control {
    pub const TIME: [Control; 4] = [Control::TimeOfDay, Control::DayOfWeek, Control::WeekOfYear, Control::Year];
    pub const ALL: [Control; 7] = [
        Control::TimeOfDay,
        Control::DayOfWeek,
        Control::WeekOfYear,
        Control::Year,
        Control::Demographics,
        Control::ChiefComplaint,
        Control::Physician,
    ];

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Control::TimeOfDay => &["time_of_day"],
            Control::DayOfWeek => &["day_of_week"],
            Control::WeekOfYear => &["week_of_year"],
            Control::Year => &["year"],
            Control::Demographics => &["age", "sex", "race"],
            Control::ChiefComplaint => &["chief_complaint"],
            Control::Physician => &["physician"],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Control::TimeOfDay => "Time of day",
            Control::DayOfWeek => "Day of week",
            Control::WeekOfYear => "Week of year",
            Control::Year => "Year",
            Control::Demographics => "Demographics",
            Control::ChiefComplaint => "Chief complaint",
            Control::Physician => "Physician",
        }
    }
}

/// What to regress on what.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub outcome: String,
    pub regressors: Vec<String>,
    pub controls: Vec<Control>,
    /// Control levels seen fewer times than this are pooled into
    /// [`POOLED_LEVEL`].
    pub min_category_count: usize,
    /// Reference (omitted) level per categorical column; defaults to the
    /// lexicographically first level.
    pub reference_levels: BTreeMap<String, String>,
    pub intercept: bool,
}

impl DesignSpec {
    pub fn new(outcome: impl Into<String>, regressors: &[&str]) -> Self {
        let mut reference_levels = BTreeMap::new();
        reference_levels.insert("race".to_string(), "white".to_string());
        reference_levels.insert("race_language".to_string(), "white".to_string());
        Self {
            outcome: outcome.into(),
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            controls: Vec::new(),
            min_category_count: 1,
            reference_levels,
            intercept: true,
        }
    }

    pub fn with_controls(mut self, controls: &[Control]) -> Self {
        self.controls = controls.to_vec();
        self
    }

    pub fn with_min_category_count(mut self, n: usize) -> Self {
        self.min_category_count = n;
        self
    }

    pub fn without_intercept(mut self) -> Self {
        self.intercept = false;
        self
    }

    fn control_columns(&self) -> Vec<&'static str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for c in &self.controls {
            for col in c.columns() {
                // Regressors take precedence over identically named controls.
                if !self.regressors.iter().any(|r| r == col) && seen.insert(*col) {
                    out.push(*col);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub coef: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub outcome: String,
    /// Intercept, regressor terms, then control terms, in design order.
    pub terms: Vec<Term>,
    /// Rows used after listwise deletion.
    pub n: usize,
    /// Rows removed for missing values.
    pub n_deleted: usize,
    pub df_resid: usize,
    /// Collinear columns removed, by name.
    pub dropped: Vec<String>,
    pub controls: Vec<Control>,
    /// Number of leading non-control terms (intercept and regressors).
    pub n_focus_terms: usize,
    pub rss: f64,
    pub r_squared: f64,
}

impl RegressionResult {
    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.name == name)
    }

    /// Intercept and regressor terms, without fixed-effect dummies.
    pub fn focus_terms(&self) -> &[Term] {
        &self.terms[..self.n_focus_terms]
    }
}

/// The expanded design matrix for one spec, factored once so that several
/// outcomes sharing the same rows can be fitted cheaply.
#[derive(Debug, Clone)]
pub struct Design {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    qr: IncrementalQr,
    rows: Vec<usize>,
    n_deleted: usize,
    dropped: Vec<String>,
    controls: Vec<Control>,
    n_focus: usize,
}

struct Expanded {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

fn expand(
    name: &str,
    var: &Variable,
    rows: &[usize],
    is_control: bool,
    min_count: usize,
    reference: Option<&String>,
) -> Expanded {
    match var {
        Variable::Numeric(v) => Expanded {
            names: vec![name.to_string()],
            columns: vec![rows.iter().map(|&i| v[i].unwrap_or(f64::NAN)).collect()],
        },
        Variable::Categorical(v) => {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for &i in rows {
                *counts.entry(v[i].as_deref().unwrap_or_default()).or_default() += 1;
            }
            let level_of = |s: &str| -> String {
                if is_control && counts[s] < min_count {
                    POOLED_LEVEL.to_string()
                } else {
                    s.to_string()
                }
            };
            let values: Vec<String> = rows.iter().map(|&i| level_of(v[i].as_deref().unwrap_or_default())).collect();
            let levels: BTreeSet<&str> = values.iter().map(String::as_str).collect();
            let reference = reference
                .filter(|r| levels.contains(r.as_str()))
                .map(String::as_str)
                .or_else(|| levels.iter().next().copied());
            let mut out = Expanded { names: Vec::new(), columns: Vec::new() };
            for level in levels.iter().filter(|l| Some(**l) != reference) {
                out.names.push(format!("{name}={level}"));
                out.columns.push(values.iter().map(|x| if x == level { 1.0 } else { 0.0 }).collect());
            }
            out
        }
        Variable::MultiHot(v) => {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for &i in rows {
                for level in &v[i] {
                    *counts.entry(level).or_default() += 1;
                }
            }
            let pooled: BTreeSet<&str> =
                counts.iter().filter(|(_, c)| is_control && **c < min_count).map(|(l, _)| *l).collect();
            let mut out = Expanded { names: Vec::new(), columns: Vec::new() };
            for level in counts.keys().filter(|l| !pooled.contains(*l)) {
                out.names.push(format!("{name}={level}"));
                out.columns.push(rows.iter().map(|&i| if v[i].iter().any(|x| x == level) { 1.0 } else { 0.0 }).collect());
            }
            if !pooled.is_empty() {
                out.names.push(format!("{name}={POOLED_LEVEL}"));
                out.columns
                    .push(rows.iter().map(|&i| if v[i].iter().any(|x| pooled.contains(x.as_str())) { 1.0 } else { 0.0 }).collect());
            }
            out
        }
    }
}

impl Design {
    /// Expands and factors the design for `spec` over the rows where the
    /// outcome, regressors and controls are all present.
    pub fn build(spec: &DesignSpec, table: &DataTable) -> Result<Design> {
        let controls = spec.control_columns();
        let mut used: Vec<(&str, &Variable, bool)> = Vec::new();
        for name in &spec.regressors {
            if *name == spec.outcome {
                return Err(Error::Design(format!("outcome `{name}` is also a regressor")));
            }
            let var = table.get(name).ok_or_else(|| Error::Design(format!("unknown column `{name}`")))?;
            used.push((name, var, false));
        }
        for name in &controls {
            let var = table.get(name).ok_or_else(|| Error::Design(format!("unknown column `{name}`")))?;
            used.push((name, var, true));
        }
        let outcome = table.get(&spec.outcome).ok_or_else(|| Error::Design(format!("unknown column `{}`", spec.outcome)))?;
        let rows: Vec<usize> = (0..table.len())
            .filter(|&i| !outcome.is_missing(i) && used.iter().all(|(_, v, _)| !v.is_missing(i)))
            .collect();
        let n_deleted = table.len() - rows.len();

        let mut names = Vec::new();
        let mut columns = Vec::new();
        if spec.intercept {
            names.push(INTERCEPT.to_string());
            columns.push(vec![1.0; rows.len()]);
        }
        let mut n_focus = names.len();
        for (name, var, is_control) in &used {
            let e = expand(name, var, &rows, *is_control, spec.min_category_count, spec.reference_levels.get(*name));
            if !*is_control {
                n_focus += e.names.len();
            }
            names.extend(e.names);
            columns.extend(e.columns);
        }

        let mut qr = IncrementalQr::new(rows.len());
        for c in &columns {
            qr.push_column(c);
        }
        if qr.rank() == 0 {
            return Err(Error::Design("rank 0 design".to_string()));
        }
        if rows.len() <= qr.rank() {
            return Err(Error::Design(format!("n = {} does not exceed {} columns", rows.len(), qr.rank())));
        }
        let dropped: Vec<String> = qr.dropped().iter().map(|&i| names[i].clone()).collect();
        let n_focus = qr.kept().iter().filter(|&&i| i < n_focus).count();
        Ok(Design { names, columns, qr, rows, n_deleted, dropped, controls: spec.controls.clone(), n_focus })
    }

    /// Table rows used by the design.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Names and values of the kept design columns.
    pub fn kept_columns(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.qr.kept().iter().map(|&i| (self.names[i].as_str(), self.columns[i].as_slice()))
    }

    /// Fits the named table column as the outcome. The column must be
    /// present on every design row.
    pub fn fit_column(&self, table: &DataTable, outcome: &str) -> Result<RegressionResult> {
        let Some(Variable::Numeric(v)) = table.get(outcome) else {
            return Err(Error::Design(format!("outcome `{outcome}` is not a numeric column")));
        };
        let mut y = Vec::with_capacity(self.rows.len());
        for &i in &self.rows {
            match v[i] {
                Some(x) if x.is_finite() => y.push(x),
                _ => return Err(Error::Design(format!("outcome `{outcome}` missing on a design row"))),
            }
        }
        Ok(self.fit(outcome, &y))
    }

    /// Residuals of `y` (one value per design row).
    pub fn residuals(&self, y: &[f64]) -> Vec<f64> {
        let (beta, _) = self.qr.solve(y);
        let mut r = y.to_vec();
        for (b, (_, col)) in beta.iter().zip(self.kept_columns()) {
            for (ri, xi) in r.iter_mut().zip(col) {
                *ri -= b * xi;
            }
        }
        r
    }

    /// Fits an outcome given as one value per design row.
    pub fn fit(&self, outcome: &str, y: &[f64]) -> RegressionResult {
        let (beta, rss) = self.qr.solve(y);
        let n = self.rows.len();
        let p = self.qr.rank();
        let df = n - p;
        let sigma2 = rss / df as f64;
        let diag = self.qr.inverse_gram_diagonal();
        let terms = self
            .qr
            .kept()
            .iter()
            .zip(beta.iter().zip(&diag))
            .map(|(&i, (&coef, &d))| {
                let se = (sigma2 * d).sqrt();
                let t = coef / se;
                let p = t_two_sided_p(t, df as f64);
                Term { name: self.names[i].clone(), coef, se, t, p, stars: stars(p).to_string() }
            })
            .collect();
        let mean = y.iter().sum::<f64>() / n as f64;
        let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
        RegressionResult {
            outcome: outcome.to_string(),
            terms,
            n,
            n_deleted: self.n_deleted,
            df_resid: df,
            dropped: self.dropped.clone(),
            controls: self.controls.clone(),
            n_focus_terms: self.n_focus,
            rss,
            r_squared: if tss > 0.0 { 1.0 - rss / tss } else { f64::NAN },
        }
    }
}

/// Ordinary least squares with dummy-expanded categoricals and classical
/// standard errors.
pub fn fit_ols(spec: &DesignSpec, table: &DataTable) -> Result<RegressionResult> {
    Design::build(spec, table)?.fit_column(table, &spec.outcome)
}

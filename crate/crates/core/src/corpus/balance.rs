use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::econometrics::{AnalysisRow, Control, DataTable, Design, DesignSpec, Term};
use crate::{Error, Result};

use super::WorkloadClass;

/// Coefficient on the high-workload indicator for one patient characteristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub outcome: String,
    pub term: Term,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub demographics: Vec<BalanceRow>,
    pub complaints: Vec<BalanceRow>,
}

impl BalanceReport {
    pub fn significant_complaints(&self, alpha: f64) -> usize {
        self.complaints.iter().filter(|r| r.term.p < alpha).count()
    }

    /// Share of chief-complaint coefficients significant at `alpha`.
    pub fn significant_fraction(&self, alpha: f64) -> f64 {
        if self.complaints.is_empty() {
            return f64::NAN;
        }
        self.significant_complaints(alpha) as f64 / self.complaints.len() as f64
    }

    /// E.g. `10 of 154 (6.5%)`.
    pub fn summary(&self, alpha: f64) -> String {
        let k = self.significant_complaints(alpha);
        format!("{k} of {} ({:.1}%)", self.complaints.len(), 100.0 * self.significant_fraction(alpha))
    }
}

const DEMOGRAPHIC_OUTCOMES: [&str; 6] = ["age", "female", "race_white", "race_black", "race_hispanic", "race_other"];

/// Regresses each demographic and each chief-complaint indicator on the
/// high-workload indicator (high vs. low shifts only), with time and
/// physician fixed effects.
pub fn balance_check(rows: &[AnalysisRow]) -> Result<BalanceReport> {
    let classes: BTreeSet<WorkloadClass> =
        rows.iter().map(|r| r.class).filter(|c| *c != WorkloadClass::Mid).collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let mut table = DataTable::from_rows(rows);
    let complaints: BTreeSet<&str> = rows
        .iter()
        .filter(|r| r.class != WorkloadClass::Mid)
        .flat_map(|r| r.complaints.iter().map(String::as_str))
        .collect();
    for c in &complaints {
        table.numeric(format!("cc:{c}"), rows.iter().map(|r| if r.complaints.iter().any(|x| x == c) { 1.0 } else { 0.0 }));
    }
    let controls = [Control::TimeOfDay, Control::DayOfWeek, Control::WeekOfYear, Control::Year, Control::Physician];
    let design = Design::build(&DesignSpec::new("age", &["high"]).with_controls(&controls), &table)?;
    let row = |outcome: &str, label: &str| -> Result<BalanceRow> {
        let r = design.fit_column(&table, outcome)?;
        let term = r.term("high").cloned().ok_or_else(|| Error::Design("high indicator dropped".to_string()))?;
        Ok(BalanceRow { outcome: label.to_string(), term, n: r.n })
    };
    let demographics = DEMOGRAPHIC_OUTCOMES.iter().map(|o| row(o, o)).collect::<Result<Vec<_>>>()?;
    let complaints = complaints
        .iter()
        .map(|c| row(&format!("cc:{c}"), c))
        .filter(|r| r.as_ref().map_or(true, |r| r.term.p.is_finite()))
        .collect::<Result<Vec<_>>>()?;
    Ok(BalanceReport { demographics, complaints })
}

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{fit_ols, AnalysisRow, Control, DataTable, DesignSpec, RegressionResult, INTERCEPT};
use crate::corpus::Race;
use crate::stats::mean;
use crate::{Error, Result};

/// Which side of the regression the fatigue score sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `measure ~ fatigue`, as in the table captions.
    #[default]
    MeasureOnFatigue,
    /// `fatigue ~ measure`.
    FatigueOnMeasure,
}

/// A named regression that may have failed independently of its siblings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteColumn {
    pub label: String,
    pub result: core::result::Result<RegressionResult, String>,
}

impl SuiteColumn {
    fn new(label: &str, result: Result<RegressionResult>) -> Self {
        Self { label: label.to_string(), result: result.map_err(|e| e.to_string()) }
    }
}

/// Regressions of four independent fatigue measures on the predicted fatigue
/// score: prior-week workload, the overnight indicator, the variance of
/// prior shift start times and the number of patients seen earlier in the
/// shift. The overnight column omits the time-of-day control.
pub fn validation_suite(rows: &[AnalysisRow], orientation: Orientation) -> Vec<SuiteColumn> {
    let table = DataTable::from_rows(rows);
    let no_hour: Vec<Control> = Control::ALL.iter().copied().filter(|c| *c != Control::TimeOfDay).collect();
    let columns: [(&str, &str, &[Control]); 4] = [
        ("Workload (Day)", "workload", &Control::ALL),
        ("Overnight Shift", "overnight", &no_hour),
        ("Var(Prior Shift-Start-Time)", "start_time_variance", &Control::ALL),
        ("Patients Seen Prior", "patients_seen_prior", &Control::ALL),
    ];
    columns
        .iter()
        .map(|(label, measure, controls)| {
            let spec = match orientation {
                Orientation::MeasureOnFatigue => DesignSpec::new(*measure, &["fatigue"]),
                Orientation::FatigueOnMeasure => DesignSpec::new("fatigue", &[measure]),
            }
            .with_controls(controls);
            SuiteColumn::new(label, fit_ols(&spec, &table))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourMean {
    pub hour: u32,
    pub mean: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub se: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalCurve {
    pub hours: Vec<HourMean>,
    /// Fit over hours 1–5.
    pub overnight: Option<SlopeFit>,
    /// Fit over the remaining hours.
    pub daytime: Option<SlopeFit>,
}

/// Mean fatigue score by arrival hour, with separate linear fits over the
/// overnight hours (1–5) and the rest of the day. Empty hours are omitted.
pub fn arrival_time_curve(rows: &[AnalysisRow]) -> ArrivalCurve {
    let mut buckets: [Vec<f64>; 24] = core::array::from_fn(|_| Vec::new());
    for r in rows {
        if let Some(f) = r.fatigue {
            let h = (r.arrival_hour as u32).min(23);
            buckets[h as usize].push(f);
        }
    }
    let hours: Vec<HourMean> = buckets
        .iter()
        .enumerate()
        .filter(|(_, b)| !b.is_empty())
        .map(|(h, b)| HourMean { hour: h as u32, mean: mean(b), n: b.len() })
        .collect();
    let fit = |sel: &dyn Fn(u32) -> bool| -> Option<SlopeFit> {
        let pts: Vec<&HourMean> = hours.iter().filter(|h| sel(h.hour)).collect();
        let mut t = DataTable::new(pts.len());
        t.numeric("hour", pts.iter().map(|h| f64::from(h.hour)));
        t.numeric("mean", pts.iter().map(|h| h.mean));
        let r = fit_ols(&DesignSpec::new("mean", &["hour"]), &t).ok()?;
        let slope = r.term("hour")?;
        Some(SlopeFit { slope: slope.coef, se: slope.se, intercept: r.term(INTERCEPT)?.coef, points: pts.len() })
    };
    ArrivalCurve {
        overnight: fit(&|h| (1..=5).contains(&h)),
        daytime: fit(&|h| !(1..=5).contains(&h)),
        hours,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldResult {
    pub workload: RegressionResult,
    pub fatigue: RegressionResult,
    /// Positive rate among tested patients.
    pub base_rate: f64,
    /// Workload coefficient divided by the base rate.
    pub workload_relative: f64,
    /// Fatigue coefficient divided by the base rate.
    pub fatigue_relative: f64,
}

/// Minimum occurrences for a control level in the yield regressions.
pub const YIELD_MIN_CATEGORY: usize = 30;

/// Yield of testing (positive rate among tested patients) regressed on
/// prior-week workload and, separately, on the fatigue score.
pub fn yield_regressions(rows: &[AnalysisRow]) -> Result<YieldResult> {
    let tested: Vec<usize> = rows.iter().enumerate().filter(|(_, r)| r.tested).map(|(i, _)| i).collect();
    if tested.is_empty() {
        return Err(Error::Empty("tested encounters"));
    }
    let table = DataTable::from_rows(rows).select(&tested);
    let base_rate = tested.iter().filter(|&&i| rows[i].test_positive).count() as f64 / tested.len() as f64;
    let fit = |regressor: &str| {
        let spec = DesignSpec::new("test_positive", &[regressor])
            .with_controls(&Control::ALL)
            .with_min_category_count(YIELD_MIN_CATEGORY);
        fit_ols(&spec, &table)
    };
    let workload = fit("workload")?;
    let fatigue = fit("fatigue")?;
    let rel = |r: &RegressionResult, name: &str| r.term(name).map_or(f64::NAN, |t| t.coef / base_rate);
    Ok(YieldResult {
        workload_relative: rel(&workload, "workload"),
        fatigue_relative: rel(&fatigue, "fatigue"),
        workload,
        fatigue,
        base_rate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceRatio {
    pub race: String,
    pub coef: f64,
    /// Race coefficient divided by the overnight coefficient.
    pub ratio_to_overnight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityResult {
    /// Workload on demographics (expected null).
    pub workload: SuiteColumn,
    /// Fatigue score on demographics.
    pub fatigue: SuiteColumn,
    /// Fatigue score on race plus the overnight indicator, without the
    /// time-of-day control.
    pub overnight_contrast: SuiteColumn,
    pub ratios: Vec<RaceRatio>,
    /// Fatigue score on race with Hispanic patients split by language,
    /// restricted to English and Spanish speakers.
    pub language_split: SuiteColumn,
    /// Race levels absent from the data.
    pub absent_levels: Vec<String>,
}

pub fn disparity_regressions(rows: &[AnalysisRow]) -> DisparityResult {
    let table = DataTable::from_rows(rows);
    let fe: [Control; 6] = [
        Control::TimeOfDay,
        Control::DayOfWeek,
        Control::WeekOfYear,
        Control::Year,
        Control::ChiefComplaint,
        Control::Physician,
    ];
    let demographics = ["race", "female", "age"];
    let workload = fit_ols(&DesignSpec::new("workload", &demographics).with_controls(&fe), &table);
    let fatigue = fit_ols(&DesignSpec::new("fatigue", &demographics).with_controls(&fe), &table);
    let contrast = fit_ols(&DesignSpec::new("fatigue", &["race", "overnight"]).with_controls(&fe[1..]), &table);
    let language = fit_ols(&DesignSpec::new("fatigue", &["race_language"]).with_controls(&fe), &table);

    let mut ratios = Vec::new();
    if let Ok(r) = &contrast {
        if let Some(night) = r.term("overnight") {
            for race in &Race::ALL[1..] {
                if let Some(t) = r.term(&format!("race={}", race.as_str())) {
                    ratios.push(RaceRatio {
                        race: race.as_str().to_string(),
                        coef: t.coef,
                        ratio_to_overnight: t.coef / night.coef,
                    });
                }
            }
        }
    }
    let present: BTreeSet<Race> = rows.iter().map(|r| r.race).collect();
    DisparityResult {
        workload: SuiteColumn::new("Workload (Day)", workload),
        fatigue: SuiteColumn::new("Predicted Fatigue", fatigue),
        overnight_contrast: SuiteColumn::new("Predicted Fatigue (+overnight)", contrast),
        ratios,
        language_split: SuiteColumn::new("Predicted Fatigue (language split)", language),
        absent_levels: Race::ALL.iter().filter(|r| !present.contains(r)).map(|r| r.as_str().to_string()).collect(),
    }
}

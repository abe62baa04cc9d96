//! Least squares with categorical fixed effects and the regression suites
//! built on it.

mod circadian;
mod correlations;
mod ols;
mod suites;
mod table;

pub use circadian::{circadian_variance, CircadianMeasure};
pub use correlations::{feature_correlations, CorrelationRow};
pub use ols::{fit_ols, Control, Design, DesignSpec, RegressionResult, Term, INTERCEPT, POOLED_LEVEL};
pub use suites::{
    arrival_time_curve, disparity_regressions, validation_suite, yield_regressions, ArrivalCurve, DisparityResult,
    HourMean, Orientation, RaceRatio, SlopeFit, SuiteColumn, YieldResult, YIELD_MIN_CATEGORY,
};
pub use table::{analysis_rows, AnalysisRow, DataTable, Variable};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::schedule::{build_schedule, draw_records, per_record, SimRecord, NONWHITE_SHARE};
use crate::corpus::{Encounter, NoteRecord};
use crate::econometrics::{fit_ols, DataTable, DesignSpec};
use crate::linalg::IncrementalQr;
use crate::mlcore::sigmoid;
use crate::{Error, Result};

/// Parameters of the workload → fatigue → notes/decisions simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DagConfig {
    pub n_physicians: usize,
    /// Shifts per physician.
    pub n_shifts: usize,
    pub patients_per_shift: usize,
    /// Variance of the per-shift workload signal Y (linear form).
    pub var_y: f64,
    /// Variance of the per-patient shock Δ.
    pub var_delta: f64,
    /// Note loading: W = Y* · A.
    pub a: Vec<f64>,
    /// Effect of true fatigue Y* on decision quality D = γ Y*.
    pub gamma: f64,
    /// Variance of the outcome noise in Z = D + ε.
    pub noise_var: f64,
    /// Planted correlation between Δ and the non-white indicator.
    pub rho: f64,
    /// Added to Y* for overnight arrivals.
    pub overnight_bump: f64,
    /// Positive rate among tested patients at Y* = 0.
    pub base_yield: f64,
    /// Text form: Y = workload_gap · min(prior_days, 4) / 4, so high- and
    /// low-workload shifts differ by `workload_gap`.
    pub workload_gap: f64,
    /// Remove the projection of Δ on Y so that YᵀΔ = 0 exactly.
    pub exact_orthogonal: bool,
    pub seed: u64,
}

impl Default for DagConfig {
    fn default() -> Self {
        Self {
            n_physicians: 10,
            n_shifts: 10,
            patients_per_shift: 10,
            var_y: 1.0,
            var_delta: 4.0,
            a: vec![1.0],
            gamma: 0.3,
            noise_var: 1.0,
            rho: 0.0,
            overnight_bump: 0.0,
            base_yield: 0.2,
            workload_gap: 1.0,
            exact_orthogonal: false,
            seed: 0,
        }
    }
}

impl DagConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_physicians == 0 || self.n_shifts == 0 || self.patients_per_shift == 0 {
            return bad("n_physicians, n_shifts and patients_per_shift must be positive");
        }
        for (name, v) in [("var_y", self.var_y), ("var_delta", self.var_delta), ("noise_var", self.noise_var)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite non-negative number")));
            }
        }
        if !(self.rho.abs() < 1.0) {
            return bad("|rho| must be below 1");
        }
        if self.a.is_empty() || self.a.iter().any(|v| !v.is_finite()) {
            return bad("a must be a non-empty vector of finite numbers");
        }
        if ![self.gamma, self.overnight_bump, self.workload_gap].iter().all(|v| v.is_finite()) {
            return bad("gamma, overnight_bump and workload_gap must be finite");
        }
        if !(self.base_yield > 0.0 && self.base_yield < 1.0) {
            return bad("base_yield must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn n_records(&self) -> usize {
        self.n_physicians * self.n_shifts * self.patients_per_shift
    }
}

/// Ground truth for one simulated note.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub y: f64,
    pub delta: f64,
    pub y_star: f64,
    /// Decision quality γ Y*.
    pub d: f64,
    /// Continuous outcome D + ε.
    pub z: f64,
    pub test_positive: bool,
}

/// A linear-form corpus: notes are the vectors W = (Y + Δ) A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCorpus {
    pub a: Vec<f64>,
    /// Empty for corpora built from hand-picked vectors.
    pub records: Vec<SimRecord>,
    pub truth: Vec<Truth>,
    /// One row per note, `a.len()` columns.
    pub w: Vec<Vec<f64>>,
}

/// Draws the shocks Δ for `records`: Δ = σ(ρ s + √(1−ρ²) ε) + δ·overnight,
/// where s is the standardized non-white indicator.
pub(crate) fn draw_deltas<R: Rng + ?Sized>(config: &DagConfig, records: &[SimRecord], rng: &mut R) -> Vec<f64> {
    let sd = config.var_delta.sqrt();
    let scale = (NONWHITE_SHARE * (1.0 - NONWHITE_SHARE)).sqrt();
    let rest = (1.0 - config.rho * config.rho).sqrt();
    records
        .iter()
        .map(|r| {
            let e: f64 = StandardNormal.sample(rng);
            let s = (if r.nonwhite() { 1.0 } else { 0.0 } - NONWHITE_SHARE) / scale;
            let bump = if r.overnight() { config.overnight_bump } else { 0.0 };
            sd * (config.rho * s + rest * e) + bump
        })
        .collect()
}

/// Outcomes given true fatigue: D, Z and the test result.
pub(crate) fn outcomes<R: Rng + ?Sized>(
    config: &DagConfig,
    records: &[SimRecord],
    y: &[f64],
    delta: &[f64],
    rng: &mut R,
) -> Vec<Truth> {
    let noise = config.noise_var.sqrt();
    let base = (config.base_yield / (1.0 - config.base_yield)).ln();
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let y_star = y[i] + delta[i];
            let d = config.gamma * y_star;
            let e: f64 = StandardNormal.sample(rng);
            let u: f64 = rng.random();
            Truth { y: y[i], delta: delta[i], y_star, d, z: d + noise * e, test_positive: r.tested && u < sigmoid(base + d) }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Simulates the linear form: Y ~ N(0, var_y) per shift, Δ per patient,
/// W = (Y + Δ) A and Z = γ Y* + ε.
pub fn simulate_linear(config: &DagConfig) -> Result<LinearCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let shifts = build_schedule(config.n_physicians, config.n_shifts, config.patients_per_shift, &mut rng);
    let records = draw_records(&shifts, &mut rng);
    let sd_y = config.var_y.sqrt();
    let y_shift: Vec<f64> = shifts.iter().map(|_| sd_y * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
    let y = per_record(&records, &y_shift);
    let mut delta = draw_deltas(config, &records, &mut rng);
    if config.exact_orthogonal {
        orthogonalize(&mut delta, &y);
    }
    let truth = outcomes(config, &records, &y, &delta, &mut rng);
    let w = truth.iter().map(|t| config.a.iter().map(|a| t.y_star * a).collect()).collect();
    Ok(LinearCorpus { a: config.a.clone(), records, truth, w })
}

/// Removes from `delta` its projection on `y`.
pub fn orthogonalize(delta: &mut [f64], y: &[f64]) {
    let yy = dot(y, y);
    if yy > 0.0 {
        let c = dot(y, delta) / yy;
        for (d, v) in delta.iter_mut().zip(y) {
            *d -= c * v;
        }
    }
}

impl LinearCorpus {
    /// A corpus from given Y, Δ and loading; Z, D and outcomes are zero.
    pub fn from_truth(y: &[f64], delta: &[f64], a: &[f64]) -> Result<Self> {
        if y.len() != delta.len() {
            return Err(Error::Dimension { expected: y.len(), got: delta.len() });
        }
        if a.is_empty() {
            return Err(Error::Empty("loading vector"));
        }
        let truth: Vec<Truth> = y
            .iter()
            .zip(delta)
            .map(|(&y, &delta)| Truth { y, delta, y_star: y + delta, d: 0.0, z: 0.0, test_positive: false })
            .collect();
        let w = truth.iter().map(|t| a.iter().map(|v| t.y_star * v).collect()).collect();
        Ok(Self { a: a.to_vec(), records: Vec::new(), truth, w })
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn y(&self) -> Vec<f64> {
        self.truth.iter().map(|t| t.y).collect()
    }

    pub fn delta(&self) -> Vec<f64> {
        self.truth.iter().map(|t| t.delta).collect()
    }

    /// Least squares of Y on the columns of W without intercept. Collinear
    /// columns are dropped (coefficient 0). Returns coefficients and fitted
    /// values.
    pub fn fit_y_on_w(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let k = self.a.len();
        let mut qr = IncrementalQr::new(n);
        for j in 0..k {
            let col: Vec<f64> = self.w.iter().map(|r| r[j]).collect();
            qr.push_column(&col);
        }
        let (coef, _) = qr.solve(&self.y());
        let mut beta = vec![0.0; k];
        for (&j, c) in qr.kept().iter().zip(coef) {
            beta[j] = c;
        }
        let fitted = self.w.iter().map(|r| dot(r, &beta)).collect();
        (beta, fitted)
    }

    /// Notes with placeholder text and encounters carrying the simulated
    /// test outcomes. Empty for hand-built corpora.
    pub fn to_corpus(&self) -> (Vec<NoteRecord>, Vec<Encounter>) {
        let notes = self.records.iter().map(|r| r.to_note(format!("Synthetic note {}.", r.note_id), Vec::new())).collect();
        let encounters =
            self.records.iter().zip(&self.truth).map(|(r, t)| r.to_encounter(t.test_positive)).collect();
        (notes, encounters)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageReport {
    pub n: usize,
    pub yty: f64,
    pub dtd: f64,
    /// YᵀΔ, zero for an orthogonalized corpus.
    pub ytd: f64,
    /// YᵀY / (YᵀY + ΔᵀΔ).
    pub shrink_factor: f64,
    pub beta_hat: Vec<f64>,
    pub beta_formula: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub y_hat_formula: Vec<f64>,
    pub max_abs_error: f64,
}

/// Fits Y on W and compares with the closed forms β̂ = (1/A)·YᵀY/(YᵀY+ΔᵀΔ)
/// and Ŷ = [YᵀY/(YᵀY+ΔᵀΔ)](Y+Δ). With a vector loading the collinear
/// columns of W are dropped, so the coefficient sits on the first column
/// with a non-zero loading.
pub fn shrinkage_check(corpus: &LinearCorpus) -> Result<ShrinkageReport> {
    let Some(first) = corpus.a.iter().position(|v| *v != 0.0) else {
        return Err(Error::InvalidInput("loading A is zero, so 1/A is undefined".into()));
    };
    let y = corpus.y();
    let delta = corpus.delta();
    let (yty, dtd, ytd) = (dot(&y, &y), dot(&delta, &delta), dot(&y, &delta));
    if ytd.abs() > 1e-9 * (yty * dtd).sqrt().max(1.0) {
        return Err(Error::InvalidInput(format!("Y and Δ are not orthogonal (YᵀΔ = {ytd:e})")));
    }
    let total = yty + dtd;
    let shrink = if total > 0.0 { yty / total } else { 0.0 };
    let (beta_hat, y_hat) = corpus.fit_y_on_w();
    let mut beta_formula = vec![0.0; corpus.a.len()];
    if total > 0.0 {
        beta_formula[first] = shrink / corpus.a[first];
    }
    let y_hat_formula: Vec<f64> = corpus.truth.iter().map(|t| shrink * t.y_star).collect();
    let max_abs_error = beta_hat
        .iter()
        .zip(&beta_formula)
        .chain(y_hat.iter().zip(&y_hat_formula))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ShrinkageReport {
        n: corpus.len(),
        yty,
        dtd,
        ytd,
        shrink_factor: shrink,
        beta_hat,
        beta_formula,
        y_hat,
        y_hat_formula,
        max_abs_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttenuationReplicate {
    pub seed: u64,
    pub coef_y: f64,
    pub t_y: f64,
    pub p_y: f64,
    pub coef_yhat: f64,
    pub t_yhat: f64,
    pub p_yhat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttenuationReport {
    pub replicates: usize,
    pub alpha: f64,
    /// Share of replicates with p < alpha for Z ~ Y.
    pub reject_rate_y: f64,
    /// Share of replicates with p < alpha for Z ~ Ŷ.
    pub reject_rate_yhat: f64,
    pub mean_t_y: f64,
    pub mean_t_yhat: f64,
    /// Share of replicates with t(Ŷ) > t(Y).
    pub yhat_beats_y: f64,
    pub rows: Vec<AttenuationReplicate>,
}

pub const ATTENUATION_ALPHA: f64 = 0.05;

fn simple_fit(outcome: &[f64], x: &[f64]) -> Result<(f64, f64, f64)> {
    let mut t = DataTable::new(outcome.len());
    t.numeric("z", outcome.iter().copied());
    t.numeric("x", x.iter().copied());
    let r = fit_ols(&DesignSpec::new("z", &["x"]), &t)?;
    let term = r.term("x").ok_or_else(|| Error::Design("regressor dropped as collinear".into()))?;
    Ok((term.coef, term.t, term.p))
}

/// Per replicate, regresses Z on the coarse workload signal Y and on the
/// note-based prediction Ŷ (the least-squares fit of Y on W). Replicate `r`
/// uses seed `config.seed + r`.
pub fn attenuation_experiment(config: &DagConfig, replicates: usize) -> Result<AttenuationReport> {
    if replicates == 0 {
        return Err(Error::Config("replicates must be positive".into()));
    }
    let mut rows = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let seed = config.seed.wrapping_add(r as u64);
        let corpus = simulate_linear(&DagConfig { seed, ..config.clone() })?;
        let z: Vec<f64> = corpus.truth.iter().map(|t| t.z).collect();
        let (_, y_hat) = corpus.fit_y_on_w();
        let (coef_y, t_y, p_y) = simple_fit(&z, &corpus.y())?;
        let (coef_yhat, t_yhat, p_yhat) = simple_fit(&z, &y_hat)?;
        rows.push(AttenuationReplicate { seed, coef_y, t_y, p_y, coef_yhat, t_yhat, p_yhat });
    }
    let n = replicates as f64;
    let share = |f: &dyn Fn(&AttenuationReplicate) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / n;
    Ok(AttenuationReport {
        replicates,
        alpha: ATTENUATION_ALPHA,
        reject_rate_y: share(&|r| r.p_y < ATTENUATION_ALPHA),
        reject_rate_yhat: share(&|r| r.p_yhat < ATTENUATION_ALPHA),
        mean_t_y: rows.iter().map(|r| r.t_y).sum::<f64>() / n,
        mean_t_yhat: rows.iter().map(|r| r.t_yhat).sum::<f64>() / n,
        yhat_beats_y: share(&|r| r.t_yhat > r.t_y),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::pearson;
    use proptest::prelude::{prop, prop_assert, proptest, ProptestConfig, Strategy};

    #[test]
    fn substitution_example() {
        let c = LinearCorpus::from_truth(&[1.0, -1.0], &[1.0, 1.0], &[1.0]).unwrap();
        assert_eq!(c.w, vec![vec![2.0], vec![0.0]]);
        let r = shrinkage_check(&c).unwrap();
        assert_eq!((r.yty, r.dtd), (2.0, 2.0));
        assert!((r.beta_hat[0] - 0.5).abs() < 1e-12);
        assert!((r.y_hat[0] - 1.0).abs() < 1e-12 && r.y_hat[1].abs() < 1e-12);
        assert!(r.max_abs_error < 1e-12);
    }

    #[test]
    fn no_shock_limit() {
        let cfg = DagConfig { var_delta: 0.0, a: vec![2.5], exact_orthogonal: true, seed: 9, ..DagConfig::default() };
        let c = simulate_linear(&cfg).unwrap();
        for (row, t) in c.w.iter().zip(&c.truth) {
            assert_eq!(row[0], t.y * 2.5);
        }
        let r = shrinkage_check(&c).unwrap();
        assert!((r.beta_hat[0] - 0.4).abs() < 1e-12);
        for (h, t) in r.y_hat.iter().zip(&c.truth) {
            assert!((h - t.y).abs() < 1e-12);
        }
    }

    #[test]
    fn shrink_factor_quarter() {
        // ΔᵀΔ = 3 YᵀY with YᵀΔ = 0.
        let y = [1.0, 1.0, -1.0, -1.0];
        let d = [3f64.sqrt(), -(3f64.sqrt()), 3f64.sqrt(), -(3f64.sqrt())];
        let r = shrinkage_check(&LinearCorpus::from_truth(&y, &d, &[1.0]).unwrap()).unwrap();
        assert!((r.shrink_factor - 0.25).abs() < 1e-15);
        assert!(r.max_abs_error < 1e-12);
    }

    #[test]
    fn zero_loading_and_non_orthogonal_errors() {
        let c = LinearCorpus::from_truth(&[1.0, 2.0], &[0.5, 0.0], &[0.0, 0.0]).unwrap();
        assert!(matches!(shrinkage_check(&c), Err(Error::InvalidInput(_))));
        let c = LinearCorpus::from_truth(&[1.0, 2.0], &[0.5, 0.0], &[1.0]).unwrap();
        assert!(matches!(shrinkage_check(&c), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn vector_loading_uses_first_nonzero_column() {
        let cfg = DagConfig { a: vec![0.0, 2.0, -1.0], exact_orthogonal: true, seed: 2, ..DagConfig::default() };
        let r = shrinkage_check(&simulate_linear(&cfg).unwrap()).unwrap();
        assert_eq!(r.beta_hat[0], 0.0);
        assert_eq!(r.beta_hat[2], 0.0);
        assert!(r.max_abs_error < 1e-10, "{}", r.max_abs_error);
    }

    #[test]
    fn deterministic_corpus() {
        let cfg = DagConfig { seed: 11, rho: 0.2, ..DagConfig::default() };
        assert_eq!(simulate_linear(&cfg).unwrap(), simulate_linear(&cfg).unwrap());
        assert_ne!(simulate_linear(&cfg).unwrap(), simulate_linear(&DagConfig { seed: 12, ..cfg }).unwrap());
    }

    #[test]
    fn config_errors() {
        for cfg in [
            DagConfig { rho: 1.0, ..DagConfig::default() },
            DagConfig { var_delta: -1.0, ..DagConfig::default() },
            DagConfig { a: vec![], ..DagConfig::default() },
            DagConfig { n_shifts: 0, ..DagConfig::default() },
        ] {
            assert!(matches!(simulate_linear(&cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn workload_independent_of_demographics() {
        let cfg = DagConfig { n_physicians: 50, n_shifts: 50, patients_per_shift: 40, seed: 5, ..DagConfig::default() };
        let c = simulate_linear(&cfg).unwrap();
        assert_eq!(c.len(), 100_000);
        let y = c.y();
        for f in [
            |r: &SimRecord| r.nonwhite(),
            |r: &SimRecord| r.sex == crate::corpus::Sex::Female,
            |r: &SimRecord| r.age > 65,
        ] {
            let x: Vec<f64> = c.records.iter().map(|r| if f(r) { 1.0 } else { 0.0 }).collect();
            assert!(pearson(&x, &y).unwrap().abs() < 0.01);
        }
    }

    #[test]
    fn planted_rho_is_recovered() {
        let cfg = DagConfig { n_physicians: 20, n_shifts: 50, patients_per_shift: 20, rho: 0.3, seed: 6, ..DagConfig::default() };
        let c = simulate_linear(&cfg).unwrap();
        let x: Vec<f64> = c.records.iter().map(|r| if r.nonwhite() { 1.0 } else { 0.0 }).collect();
        let r = pearson(&x, &c.delta()).unwrap();
        assert!((r - 0.3).abs() < 0.03, "{r}");
        let r0 = pearson(&x, &simulate_linear(&DagConfig { rho: 0.0, ..cfg }).unwrap().delta()).unwrap();
        assert!(r0.abs() < 0.03, "{r0}");
    }

    #[test]
    fn attenuation_direction() {
        let cfg = DagConfig { gamma: 0.3, noise_var: 1.0, ..DagConfig::default() };
        let rep = attenuation_experiment(&cfg, 100).unwrap();
        assert!(rep.yhat_beats_y >= 0.95, "{}", rep.yhat_beats_y);
        // With γ ≠ 0 the sign of corr(Ŷ, Z) follows γ.
        assert!(rep.rows.iter().filter(|r| r.t_yhat > 0.0).count() >= 95);
        let neg = attenuation_experiment(&DagConfig { gamma: -0.3, ..cfg }, 100).unwrap();
        assert!(neg.rows.iter().filter(|r| r.t_yhat < 0.0).count() >= 95);
    }

    #[test]
    fn attenuation_without_shocks_matches() {
        let cfg = DagConfig { var_delta: 0.0, gamma: 0.1, ..DagConfig::default() };
        let rep = attenuation_experiment(&cfg, 20).unwrap();
        for r in &rep.rows {
            assert!((r.t_y - r.t_yhat).abs() < 1e-8, "{r:?}");
        }
    }

    #[test]
    fn attenuation_null_calibration() {
        let cfg = DagConfig { gamma: 0.0, ..DagConfig::default() };
        let rep = attenuation_experiment(&cfg, 300).unwrap();
        assert!((0.01..=0.10).contains(&rep.reject_rate_y), "{}", rep.reject_rate_y);
        assert!((0.01..=0.10).contains(&rep.reject_rate_yhat), "{}", rep.reject_rate_yhat);
        // With γ = 0, corr(Ŷ, Z) is centered on zero.
        assert!(rep.mean_t_yhat.abs() < 0.25, "{}", rep.mean_t_yhat);
    }

    fn orth_config() -> impl Strategy<Value = DagConfig> {
        (1usize..4, 1usize..6, 1usize..12, 0.0f64..5.0, 0.0f64..10.0, prop::collection::vec(0.1f64..3.0, 1..4), prop::bool::ANY, -0.9f64..0.9, 0u64..1_000_000)
            .prop_map(|(p, s, k, vy, vd, a, flip, rho, seed)| DagConfig {
                n_physicians: p,
                n_shifts: s,
                patients_per_shift: k,
                var_y: vy,
                var_delta: vd,
                a: if flip { a.iter().map(|v| -v).collect() } else { a },
                rho,
                overnight_bump: 0.5,
                exact_orthogonal: true,
                seed,
                ..DagConfig::default()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn shrinkage_identity_holds(cfg in orth_config()) {
            let r = shrinkage_check(&simulate_linear(&cfg).unwrap()).unwrap();
            prop_assert!(r.max_abs_error < 1e-10, "{}", r.max_abs_error);
        }
    }
}

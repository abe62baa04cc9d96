use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stats::quantile_sorted;
use crate::{Error, Result};

fn check(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension { expected: scores.len(), got: labels.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores"));
    }
    Ok(())
}

/// Area under the ROC curve: the share of (positive, negative) pairs where
/// the positive scores higher, ties counting one half.
///
/// Concordant and tied pairs are counted exactly in integers, so the result
/// is the same rational as the O(n²) pair loop, rounded once.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut neg_below, mut pos_total, mut neg_total) = (0u128, 0u128, 0u128);
    let mut half_units = 0u128;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        half_units += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        pos_total += pos;
        neg_total += neg;
        i = j;
    }
    if pos_total == 0 || neg_total == 0 {
        return Err(Error::SingleClass);
    }
    Ok(half_units as f64 / (2 * pos_total * neg_total) as f64)
}

/// Share of correct predictions with `score ≥ threshold` meaning positive.
pub fn accuracy(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    check(scores, labels)?;
    if scores.is_empty() {
        return Err(Error::Empty("accuracy of no predictions"));
    }
    let hits = scores.iter().zip(labels).filter(|(s, l)| (**s >= threshold) == **l).count();
    Ok(hits as f64 / scores.len() as f64)
}

/// F1 of the positive class at `threshold`; 0 when nothing is predicted or
/// present positive.
pub fn f1_score(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    check(scores, labels)?;
    let (mut tp, mut fp, mut fne) = (0usize, 0usize, 0usize);
    for (s, &l) in scores.iter().zip(labels) {
        match (*s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fne) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    /// Replicates that produced a value.
    pub replicates: usize,
    /// Replicates abandoned after ten single-class redraws.
    pub skipped: usize,
}

const MAX_REDRAWS: usize = 10;

/// Percentile bootstrap interval of `metric`. Resamples holding a single
/// class are redrawn up to ten times, then skipped.
pub fn bootstrap_ci<M>(metric: M, scores: &[f64], labels: &[bool], replicates: usize, level: f64, seed: u64) -> Result<BootstrapCi>
where
    M: Fn(&[f64], &[bool]) -> Result<f64>,
{
    check(scores, labels)?;
    if !(0.0 < level && level < 1.0) {
        return Err(Error::Config(format!("confidence level {level} not in (0, 1)")));
    }
    let n = scores.len();
    if n == 0 {
        return Err(Error::Empty("bootstrap of no observations"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(replicates);
    let mut skipped = 0;
    let mut s = Vec::with_capacity(n);
    let mut l = Vec::with_capacity(n);
    for _ in 0..replicates {
        let mut drawn = false;
        for _ in 0..=MAX_REDRAWS {
            s.clear();
            l.clear();
            for _ in 0..n {
                let i = rng.random_range(0..n);
                s.push(scores[i]);
                l.push(labels[i]);
            }
            if l.iter().any(|&v| v) && l.iter().any(|&v| !v) {
                drawn = true;
                break;
            }
        }
        if !drawn {
            skipped += 1;
            continue;
        }
        values.push(metric(&s, &l)?);
    }
    if values.is_empty() {
        return Err(Error::DegenerateBootstrap);
    }
    values.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(BootstrapCi {
        lower: quantile_sorted(&values, alpha),
        upper: quantile_sorted(&values, 1.0 - alpha),
        level,
        replicates: values.len(),
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc_roc: f64,
    pub accuracy: f64,
    pub f1: f64,
    /// Interval for the AUC, widened if needed to contain the point estimate.
    pub ci: BootstrapCi,
    pub n: usize,
}

impl EvalReport {
    /// E.g. `AUC-ROC 60.1 (95% CI 60.06–60.30)`.
    pub fn headline(&self) -> String {
        format!(
            "AUC-ROC {:.1} ({:.0}% CI {:.2}–{:.2})",
            100.0 * self.auc_roc,
            100.0 * self.ci.level,
            100.0 * self.ci.lower,
            100.0 * self.ci.upper
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { replicates: 1000, level: 0.95, seed: 0, threshold: 0.5 }
    }
}

pub fn evaluate(scores: &[f64], labels: &[bool], config: &EvalConfig) -> Result<EvalReport> {
    let auc = auc_roc(scores, labels)?;
    let mut ci = bootstrap_ci(auc_roc, scores, labels, config.replicates, config.level, config.seed)?;
    ci.lower = ci.lower.min(auc);
    ci.upper = ci.upper.max(auc);
    Ok(EvalReport {
        auc_roc: auc,
        accuracy: accuracy(scores, labels, config.threshold)?,
        f1: f1_score(scores, labels, config.threshold)?,
        ci,
        n: scores.len(),
    })
}

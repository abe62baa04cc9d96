use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logit::train_logit;
use super::metrics::auc_roc;
use crate::{Error, Result};

/// `10⁻³, 10⁻², …, 10³`.
pub const DEFAULT_LAMBDA_GRID: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaScore {
    pub lambda: f64,
    /// Mean validation AUC over the folds that could be scored.
    pub mean_auc: f64,
    pub fold_aucs: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_lambda: f64,
    pub scores: Vec<LambdaScore>,
    /// Fold index of every row.
    pub folds: Vec<usize>,
}

/// Assigns whole groups to `k` folds: groups are shuffled with `seed` and
/// dealt round-robin.
pub fn group_folds<G: Ord>(groups: &[G], k: usize, seed: u64) -> Vec<usize> {
    let mut distinct: Vec<&G> = groups.iter().collect();
    distinct.sort();
    distinct.dedup();
    distinct.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of: BTreeMap<&G, usize> = distinct.into_iter().enumerate().map(|(i, g)| (g, i % k)).collect();
    groups.iter().map(|g| fold_of[g]).collect()
}

/// K-fold cross-validation over a λ grid with folds that never split a
/// group (patient). Picks the λ with the highest mean validation AUC;
/// ties go to the larger λ. A fold whose training or validation part holds
/// a single class is left unscored.
pub fn cross_validate<G: Ord>(
    x: &[Vec<f64>],
    y: &[bool],
    groups: &[G],
    lambda_grid: &[f64],
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    if x.len() != y.len() || x.len() != groups.len() {
        return Err(Error::Dimension { expected: x.len(), got: y.len().min(groups.len()) });
    }
    if lambda_grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let positives = y.iter().filter(|&&v| v).count();
    let smallest_class = positives.min(y.len() - positives);
    if k > smallest_class {
        return Err(Error::InvalidInput(format!("{k} folds but the smaller class has {smallest_class} rows")));
    }
    let folds = group_folds(groups, k, seed);
    let mut scores = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let mut fold_aucs = Vec::with_capacity(k);
        for f in 0..k {
            let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for (i, row) in x.iter().enumerate() {
                if folds[i] == f {
                    vx.push(row.clone());
                    vy.push(y[i]);
                } else {
                    tx.push(row.clone());
                    ty.push(y[i]);
                }
            }
            let auc = match train_logit(&tx, &ty, lambda) {
                Ok(model) => {
                    let s = vx.iter().map(|r| model.predict(r)).collect::<Result<Vec<_>>>()?;
                    auc_roc(&s, &vy).ok()
                }
                Err(Error::SingleClass) => None,
                Err(e) => return Err(e),
            };
            fold_aucs.push(auc);
        }
        let scored: Vec<f64> = fold_aucs.iter().flatten().copied().collect();
        let mean_auc = if scored.is_empty() { f64::NAN } else { scored.iter().sum::<f64>() / scored.len() as f64 };
        scores.push(LambdaScore { lambda, mean_auc, fold_aucs });
    }
    let mut best = &scores[0];
    for s in &scores[1..] {
        let better = s.mean_auc > best.mean_auc
            || (s.mean_auc == best.mean_auc && s.lambda > best.lambda)
            || (best.mean_auc.is_nan() && !s.mean_auc.is_nan());
        if better {
            best = s;
        }
    }
    Ok(CvResult { best_lambda: best.lambda, scores, folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlcore::logit::sigmoid;
    use alloc::string::String;
    use alloc::vec;
    use rand::Rng;

    fn data(seed: u64, n: usize, slope: f64) -> (Vec<Vec<f64>>, Vec<bool>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut g = Vec::new();
        for i in 0..n {
            let a: f64 = rng.random_range(-2.0..2.0);
            let b: f64 = rng.random_range(-2.0..2.0);
            x.push(vec![a, b]);
            y.push(rng.random::<f64>() < sigmoid(slope * a));
            g.push(format!("p{}", i / 3));
        }
        (x, y, g)
    }

    #[test]
    fn groups_stay_together() {
        let (x, y, g) = data(1, 90, 2.0);
        let cv = cross_validate(&x, &y, &g, &[1.0], 5, 3).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                if g[i] == g[j] {
                    assert_eq!(cv.folds[i], cv.folds[j]);
                }
            }
        }
        assert_eq!(cv.best_lambda, 1.0);
    }

    #[test]
    fn separable_prefers_small_lambda() {
        let (x, _, g) = data(2, 300, 0.0);
        // Deterministic labels from the first feature.
        let y: Vec<bool> = x.iter().map(|r| r[0] > 0.0).collect();
        let cv = cross_validate(&x, &y, &g, &[0.01, 1.0, 100.0], 5, 7).unwrap();
        // At λ = 100 the weights shrink to near zero but the ranking, and so
        // the AUC, survives; the oracle is a rerun of the same folds.
        let oracle: Vec<f64> = [0.01, 1.0, 100.0]
            .iter()
            .map(|&lambda| {
                let mut aucs = Vec::new();
                for f in 0..5 {
                    let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
                    for i in 0..x.len() {
                        if cv.folds[i] == f {
                            vx.push(x[i].clone());
                            vy.push(y[i]);
                        } else {
                            tx.push(x[i].clone());
                            ty.push(y[i]);
                        }
                    }
                    let m = train_logit(&tx, &ty, lambda).unwrap();
                    let s: Vec<f64> = vx.iter().map(|r| m.predict(r).unwrap()).collect();
                    aucs.push(auc_roc(&s, &vy).unwrap());
                }
                aucs.iter().sum::<f64>() / 5.0
            })
            .collect();
        for (s, o) in cv.scores.iter().zip(&oracle) {
            assert_eq!(s.mean_auc, *o);
        }
        let best = oracle.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let chosen = cv.scores.iter().find(|s| s.lambda == cv.best_lambda).unwrap();
        assert_eq!(chosen.mean_auc, best);
        assert!(cv.best_lambda < 100.0);
    }

    #[test]
    fn ties_prefer_larger_lambda() {
        let (x, y, g) = data(4, 60, 0.0);
        let zeros: Vec<Vec<f64>> = x.iter().map(|_| vec![0.0]).collect();
        let cv = cross_validate(&zeros, &y, &g, &[0.1, 10.0, 1.0], 3, 1).unwrap();
        assert_eq!(cv.best_lambda, 10.0);
    }

    #[test]
    fn seeded_folds_repeat() {
        let (x, y, g) = data(5, 120, 1.0);
        assert_eq!(cross_validate(&x, &y, &g, &DEFAULT_LAMBDA_GRID, 5, 11), cross_validate(&x, &y, &g, &DEFAULT_LAMBDA_GRID, 5, 11));
    }

    #[test]
    fn too_many_folds() {
        let x = vec![vec![0.0]; 6];
        let y = [true, false, false, false, false, false];
        let g = [0, 1, 2, 3, 4, 5];
        assert!(cross_validate(&x, &y, &g, &[1.0], 2, 0).is_err());
    }
}

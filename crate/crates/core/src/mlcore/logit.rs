use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::linalg::cholesky_solve;
use crate::textfeat::Standardizer;
use crate::{Error, Result};

/// Newton iterations allowed before giving up.
pub const MAX_NEWTON_ITERATIONS: usize = 200;
/// Convergence threshold on the Euclidean norm of the objective gradient.
pub const GRADIENT_TOLERANCE: f64 = 1e-8;

/// Fitted L2-regularized logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Applied to raw feature vectors before the linear predictor.
    #[serde(default)]
    pub standardizer: Option<Standardizer>,
    /// Free-form lineage (training split digest, seed, ...).
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
    #[serde(default)]
    pub iterations: usize,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogitModel {
    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    /// Linear predictor on an already standardized vector.
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::Dimension { expected: self.weights.len(), got: x.len() });
        }
        Ok(self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }

    /// Probability for an already standardized vector.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.margin(x).map(sigmoid)
    }

    /// Probability for a raw feature vector, standardizing first when the
    /// model carries a standardizer.
    pub fn predict_raw(&self, raw: &[f64]) -> Result<f64> {
        match &self.standardizer {
            Some(s) => self.predict(&s.apply(raw)?),
            None => self.predict(raw),
        }
    }
}

fn check_inputs(x: &[Vec<f64>], y: &[bool]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Dimension { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::Empty("need at least two training rows"));
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(Error::SingleClass);
    }
    let d = x[0].len();
    for row in x {
        if row.len() != d {
            return Err(Error::Dimension { expected: d, got: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
    }
    Ok(d)
}

/// Mean logistic loss plus `λ‖w‖²/2`; the intercept is not penalized.
pub fn logit_objective(x: &[Vec<f64>], y: &[bool], weights: &[f64], intercept: f64, lambda: f64) -> f64 {
    let n = x.len() as f64;
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &label)| {
            let z = intercept + row.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>();
            if label {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum();
    loss / n + 0.5 * lambda * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`logit_objective`]; entry 0 is the intercept.
pub fn logit_gradient(x: &[Vec<f64>], y: &[bool], weights: &[f64], intercept: f64, lambda: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let d = weights.len();
    let mut g = vec![0.0; d + 1];
    for (row, &label) in x.iter().zip(y) {
        let z = intercept + row.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>();
        let r = sigmoid(z) - if label { 1.0 } else { 0.0 };
        g[0] += r;
        for (gj, a) in g[1..].iter_mut().zip(row) {
            *gj += r * a;
        }
    }
    g.iter_mut().for_each(|v| *v /= n);
    for (gj, w) in g[1..].iter_mut().zip(weights) {
        *gj += lambda * w;
    }
    g
}

/// Fits by damped Newton's method from the zero vector until the gradient
/// norm drops below [`GRADIENT_TOLERANCE`].
pub fn train_logit(x: &[Vec<f64>], y: &[bool], lambda: f64) -> Result<LogitModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config("lambda must be a finite non-negative number".into()));
    }
    let d = check_inputs(x, y)?;
    let n = x.len() as f64;
    let p = d + 1;
    let mut theta = vec![0.0; p];
    let mut objective = logit_objective(x, y, &theta[1..], theta[0], lambda);
    let mut gnorm = f64::INFINITY;
    for iteration in 0..MAX_NEWTON_ITERATIONS {
        let g = logit_gradient(x, y, &theta[1..], theta[0], lambda);
        gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < GRADIENT_TOLERANCE {
            return Ok(LogitModel {
                feature_names: Vec::new(),
                weights: theta[1..].to_vec(),
                intercept: theta[0],
                lambda,
                standardizer: None,
                provenance: BTreeMap::new(),
                iterations: iteration,
            });
        }
        // Hessian over [1, x]: (1/n) Σ p(1−p) [1 x][1 x]ᵀ + λ on the weights.
        let mut h = vec![0.0; p * p];
        let mut ext = vec![1.0; p];
        for row in x {
            ext[1..].copy_from_slice(row);
            let z = theta[0] + row.iter().zip(&theta[1..]).map(|(a, w)| a * w).sum::<f64>();
            let s = sigmoid(z);
            let wgt = s * (1.0 - s) / n;
            for i in 0..p {
                let a = wgt * ext[i];
                for j in i..p {
                    h[i * p + j] += a * ext[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                h[i * p + j] = h[j * p + i];
            }
            if i > 0 {
                h[i * p + i] += lambda;
            }
            // Keeps the system solvable when the curvature vanishes.
            h[i * p + i] += 1e-12;
        }
        let step = cholesky_solve(&h, &g).ok_or(Error::NotConverged { iterations: iteration, gradient_norm: gnorm })?;
        // Rounding error of the objective, a sum over n rows.
        let noise = (n + 8.0) * f64::EPSILON * objective.abs();
        let predicted = 0.5 * g.iter().zip(&step).map(|(a, b)| a * b).sum::<f64>();
        if predicted <= noise {
            // The objective cannot resolve the gain of a full step this
            // close to the optimum; take it unchecked.
            for (a, s) in theta.iter_mut().zip(&step) {
                *a -= s;
            }
            objective = logit_objective(x, y, &theta[1..], theta[0], lambda);
            continue;
        }
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let obj = logit_objective(x, y, &cand[1..], cand[0], lambda);
            if obj <= objective + noise || t < 1e-10 {
                theta = cand;
                objective = obj.min(objective);
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::NotConverged { iterations: MAX_NEWTON_ITERATIONS, gradient_norm: gnorm })
}

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::stats::{pearson, stars, t_two_sided_p};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub feature: String,
    /// `None` when the feature is constant.
    pub r: Option<f64>,
    pub p: Option<f64>,
    pub stars: String,
}

/// Pearson correlation of each feature column with the binary high-workload
/// indicator, in the given feature order.
pub fn feature_correlations(names: &[&str], vectors: &[Vec<f64>], high: &[bool]) -> Result<Vec<CorrelationRow>> {
    if vectors.len() != high.len() {
        return Err(Error::Dimension { expected: vectors.len(), got: high.len() });
    }
    if vectors.len() < 3 {
        return Err(Error::Empty("need at least three vectors"));
    }
    let y: Vec<f64> = high.iter().map(|&h| if h { 1.0 } else { 0.0 }).collect();
    let n = vectors.len() as f64;
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let x: Vec<f64> = vectors
                .iter()
                .map(|v| v.get(j).copied().ok_or(Error::Dimension { expected: names.len(), got: v.len() }))
                .collect::<Result<_>>()?;
            let r = pearson(&x, &y);
            let p = r.map(|r| {
                if r.abs() >= 1.0 {
                    0.0
                } else {
                    t_two_sided_p(r * ((n - 2.0) / (1.0 - r * r)).sqrt(), n - 2.0)
                }
            });
            Ok(CorrelationRow {
                feature: name.to_string(),
                r,
                p,
                stars: p.map(stars).unwrap_or_default().to_string(),
            })
        })
        .collect()
}

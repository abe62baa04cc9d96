use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-column z-scoring fitted on a training set. Columns at index
/// `standardized..` (the complaint dummies) pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population (divide-by-n) standard deviations; zero marks a constant
    /// column.
    pub sds: Vec<f64>,
    pub dimension: usize,
}

impl Standardizer {
    /// Fits the first `standardized` columns of `vectors`.
    pub fn fit<V: AsRef<[f64]>>(vectors: &[V], standardized: usize) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::Empty("standardizer needs at least two vectors"));
        }
        let dimension = vectors[0].as_ref().len();
        if standardized > dimension {
            return Err(Error::Dimension { expected: standardized, got: dimension });
        }
        let n = vectors.len() as f64;
        let mut means = alloc::vec![0.0; standardized];
        for v in vectors {
            let v = v.as_ref();
            if v.len() != dimension {
                return Err(Error::Dimension { expected: dimension, got: v.len() });
            }
            for (m, x) in means.iter_mut().zip(v) {
                if !x.is_finite() {
                    return Err(Error::NonFinite("feature vector"));
                }
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut ss = alloc::vec![0.0; standardized];
        for v in vectors {
            for ((s, x), m) in ss.iter_mut().zip(v.as_ref()).zip(&means) {
                *s += (x - m) * (x - m);
            }
        }
        let sds = ss
            .into_iter()
            .zip(&means)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                // Rounding noise around a constant column.
                if sd <= 1e-12 * m.abs().max(1.0) {
                    0.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { means, sds, dimension })
    }

    pub fn standardized_columns(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut out = x.to_vec();
        for ((o, m), s) in out.iter_mut().zip(&self.means).zip(&self.sds) {
            *o = if *s == 0.0 { 0.0 } else { (*o - m) / s };
        }
        Ok(out)
    }

    /// Inverse of [`apply`](Self::apply); constant columns return their mean.
    pub fn invert(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        let mut out = z.to_vec();
        for ((o, m), s) in out.iter_mut().zip(&self.means).zip(&self.sds) {
            *o = *o * s + m;
        }
        Ok(out)
    }

    pub fn apply_all<V: AsRef<[f64]>>(&self, vectors: &[V]) -> Result<Vec<Vec<f64>>> {
        vectors.iter().map(|v| self.apply(v.as_ref())).collect()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::Dimension { expected: self.dimension, got: x.len() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn hand_z_scores() {
        let s = Standardizer::fit(&[vec![1.0, 5.0, 1.0], vec![3.0, 5.0, 0.0]], 2).unwrap();
        assert_eq!(s.apply(&[1.0, 5.0, 1.0]).unwrap(), [-1.0, 0.0, 1.0]);
        assert_eq!(s.apply(&[3.0, 5.0, 0.0]).unwrap(), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_maps_to_zero() {
        let s = Standardizer::fit(&[[5.0], [5.0], [5.0]], 1).unwrap();
        assert_eq!(s.apply(&[5.0]).unwrap(), [0.0]);
        assert_eq!(s.apply(&[7.0]).unwrap(), [0.0]);
    }

    #[test]
    fn heldout_uses_train_statistics() {
        let s = Standardizer::fit(&[[0.0], [2.0]], 1).unwrap();
        assert_eq!(s.apply(&[4.0]).unwrap(), [3.0]);
    }

    #[test]
    fn fit_errors() {
        assert!(Standardizer::fit::<[f64; 1]>(&[], 1).is_err());
        assert!(Standardizer::fit(&[[1.0]], 1).is_err());
        assert!(Standardizer::fit(&[vec![1.0], vec![1.0, 2.0]], 1).is_err());
        assert!(Standardizer::fit(&[[f64::NAN], [1.0]], 1).is_err());
    }

    proptest! {
        #[test]
        fn own_fit_set_is_centered(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 2..40)) {
            let s = Standardizer::fit(&rows, 3).unwrap();
            let z = s.apply_all(&rows).unwrap();
            let n = rows.len() as f64;
            for j in 0..3 {
                let col: Vec<f64> = z.iter().map(|r| r[j]).collect();
                let m = col.iter().sum::<f64>() / n;
                prop_assert!(m.abs() < 1e-9);
                if s.sds[j] > 0.0 {
                    let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
                    prop_assert!((v - 1.0).abs() < 1e-9);
                }
            }
            for (r, zr) in rows.iter().zip(&z) {
                prop_assert_eq!(zr[3], r[3]);
            }
        }

        #[test]
        fn round_trip(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..20), x in prop::collection::vec(-1e3f64..1e3, 3)) {
            let s = Standardizer::fit(&rows, 3).unwrap();
            let back = s.invert(&s.apply(&x).unwrap()).unwrap();
            for (a, b) in back.iter().zip(&x) {
                if s.sds.iter().all(|&sd| sd > 0.0) {
                    prop_assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }
}

//! Dense linear algebra needed by the estimators: a column-incremental
//! Householder QR that rejects linearly dependent columns, and a Cholesky
//! solver for small symmetric positive definite systems.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

/// Relative tolerance below which a column's residual norm (after projecting
/// out the previously accepted columns) marks it as collinear.
pub const COLLINEARITY_TOL: f64 = 1e-10;

/// Householder QR of a tall matrix built one column at a time.
///
/// Columns that are (numerically) in the span of the earlier accepted columns
/// are rejected, which makes the factorization rank revealing in column order:
/// when a set of columns is collinear, the later ones are dropped.
#[derive(Debug, Clone)]
pub struct IncrementalQr {
    n: usize,
    vs: Vec<Vec<f64>>,
    betas: Vec<f64>,
    r_cols: Vec<Vec<f64>>,
    kept: Vec<usize>,
    dropped: Vec<usize>,
    offered: usize,
}

impl IncrementalQr {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            vs: Vec::new(),
            betas: Vec::new(),
            r_cols: Vec::new(),
            kept: Vec::new(),
            dropped: Vec::new(),
            offered: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    /// Indices (in offering order) of accepted columns.
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    /// Indices (in offering order) of rejected columns.
    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    fn apply_reflectors(&self, x: &mut [f64]) {
        for (k, (v, beta)) in self.vs.iter().zip(&self.betas).enumerate() {
            let tail = &mut x[k..];
            let dot: f64 = v.iter().zip(tail.iter()).map(|(a, b)| a * b).sum();
            let s = beta * dot;
            for (t, vi) in tail.iter_mut().zip(v) {
                *t -= s * vi;
            }
        }
    }

    /// Offers the next column; returns whether it was accepted.
    pub fn push_column(&mut self, column: &[f64]) -> bool {
        assert_eq!(column.len(), self.n, "column length");
        let index = self.offered;
        self.offered += 1;
        let k = self.kept.len();
        let original_norm = column.iter().map(|v| v * v).sum::<f64>().sqrt();
        if k >= self.n || original_norm == 0.0 {
            self.dropped.push(index);
            return false;
        }
        let mut x = column.to_vec();
        self.apply_reflectors(&mut x);
        let tail_norm = x[k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if tail_norm <= COLLINEARITY_TOL * original_norm {
            self.dropped.push(index);
            return false;
        }
        let alpha = if x[k] > 0.0 { -tail_norm } else { tail_norm };
        let mut v = x[k..].to_vec();
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|a| a * a).sum();
        let beta = if vtv == 0.0 { 0.0 } else { 2.0 / vtv };
        let mut r = x[..k].to_vec();
        r.push(alpha);
        self.vs.push(v);
        self.betas.push(beta);
        self.r_cols.push(r);
        self.kept.push(index);
        true
    }

    /// `Qᵀ y`.
    pub fn qt(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n);
        let mut x = y.to_vec();
        self.apply_reflectors(&mut x);
        x
    }

    /// Least-squares coefficients for the accepted columns and the residual
    /// sum of squares.
    pub fn solve(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let qty = self.qt(y);
        let p = self.rank();
        let rss = qty[p..].iter().map(|v| v * v).sum();
        (self.back_substitute(&qty[..p]), rss)
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        if i > j {
            0.0
        } else {
            self.r_cols[j][i]
        }
    }

    fn back_substitute(&self, rhs: &[f64]) -> Vec<f64> {
        let p = self.rank();
        let mut b = vec![0.0; p];
        for i in (0..p).rev() {
            let mut s = rhs[i];
            for j in i + 1..p {
                s -= self.r(i, j) * b[j];
            }
            b[i] = s / self.r(i, i);
        }
        b
    }

    /// Diagonal of `(XᵀX)⁻¹ = R⁻¹ R⁻ᵀ` over the accepted columns.
    pub fn inverse_gram_diagonal(&self) -> Vec<f64> {
        let p = self.rank();
        // Rows of R⁻¹: solve R z = e_j for each column j of R⁻¹.
        let mut diag = vec![0.0; p];
        for j in 0..p {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            let col = self.back_substitute(&e);
            for (i, c) in col.iter().enumerate() {
                diag[i] += c * c;
            }
        }
        diag
    }
}

/// Solves `A x = b` for symmetric positive definite `A` (row-major, `d × d`).
/// Returns `None` if `A` is not numerically positive definite.
pub fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let d = b.len();
    assert_eq!(a.len(), d * d);
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    let mut y = vec![0.0; d];
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * d + k] * y[k];
        }
        y[i] = s / l[i * d + i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let mut s = y[i];
        for k in i + 1..d {
            s -= l[k * d + i] * x[k];
        }
        x[i] = s / l[i * d + i];
    }
    Some(x)
}

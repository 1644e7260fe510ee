use faer::{Mat, MatRef};

use crate::error::{AmlsError, Result};

/// Low-rank matrix `R = A Bᵀ` with `A: n × k`, `B: m × k`.
#[derive(Debug, Clone)]
pub struct RkMatrix {
    pub a: Mat<f64>,
    pub b: Mat<f64>,
}

impl RkMatrix {
    pub fn zero(n: usize, m: usize) -> Self {
        Self {
            a: Mat::zeros(n, 0),
            b: Mat::zeros(m, 0),
        }
    }

    pub fn new(a: Mat<f64>, b: Mat<f64>) -> Self {
        assert_eq!(a.ncols(), b.ncols(), "factor ranks differ");
        Self { a, b }
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.a.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.b.nrows()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        if self.rank() == 0 {
            return Mat::zeros(self.nrows(), self.ncols());
        }
        &self.a * self.b.transpose()
    }

    pub fn transpose(&self) -> RkMatrix {
        RkMatrix {
            a: self.b.clone(),
            b: self.a.clone(),
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.a *= faer::Scale(alpha);
    }

    /// Stored reals, `k (n + m)`.
    pub fn storage(&self) -> usize {
        self.rank() * (self.nrows() + self.ncols())
    }

    /// Re-truncates to relative accuracy `eps` via QR of both factors and an
    /// SVD of the small core.
    pub fn truncate(&self, eps: f64) -> Result<RkMatrix> {
        let (n, m, k) = (self.nrows(), self.ncols(), self.rank());
        if k == 0 {
            return Ok(self.clone());
        }
        if k >= n.min(m) {
            return rk_truncate(self.to_dense().as_ref(), eps);
        }
        let qa = self.a.qr();
        let qb = self.b.qr();
        let core = qa.thin_R() * qb.thin_R().transpose();
        let (u, v) = truncated_factors(core.as_ref(), eps)?;
        Ok(RkMatrix {
            a: qa.compute_thin_Q() * u,
            b: qb.compute_thin_Q() * v,
        })
    }

    /// Rounded sum `self + other`.
    pub fn add(&self, other: &RkMatrix, eps: f64) -> Result<RkMatrix> {
        if other.rank() == 0 {
            return Ok(self.clone());
        }
        if self.rank() == 0 {
            return Ok(other.clone());
        }
        concat(self, other).truncate(eps)
    }
}

/// `[A1 A2] [B1 B2]ᵀ` without truncation.
pub fn concat(x: &RkMatrix, y: &RkMatrix) -> RkMatrix {
    let (n, m) = (x.nrows(), x.ncols());
    let (k1, k2) = (x.rank(), y.rank());
    let mut a = Mat::zeros(n, k1 + k2);
    let mut b = Mat::zeros(m, k1 + k2);
    a.submatrix_mut(0, 0, n, k1).copy_from(&x.a);
    a.submatrix_mut(0, k1, n, k2).copy_from(&y.a);
    b.submatrix_mut(0, 0, m, k1).copy_from(&x.b);
    b.submatrix_mut(0, k1, m, k2).copy_from(&y.b);
    RkMatrix { a, b }
}

/// Smallest rank `k` with `σ_{k+1} ≤ eps σ_1`.
pub fn truncation_rank(singular_values: &[f64], eps: f64) -> usize {
    let Some(&s1) = singular_values.first() else {
        return 0;
    };
    if !(s1 > 0.0) {
        return 0;
    }
    singular_values
        .iter()
        .position(|&s| s <= eps * s1)
        .unwrap_or(singular_values.len())
}

/// Returns `(U_k Σ_k, V_k)` of the truncated SVD.
fn truncated_factors(block: MatRef<'_, f64>, eps: f64) -> Result<(Mat<f64>, Mat<f64>)> {
    let (n, m) = (block.nrows(), block.ncols());
    if n == 0 || m == 0 {
        return Ok((Mat::zeros(n, 0), Mat::zeros(m, 0)));
    }
    let svd = block.thin_svd().map_err(|_| AmlsError::SvdFailure)?;
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let k = truncation_rank(&s, eps);
    let u = Mat::from_fn(n, k, |i, j| svd.U()[(i, j)] * s[j]);
    let v = svd.V().submatrix(0, 0, m, k).to_owned();
    Ok((u, v))
}

/// Adaptive-rank approximation with `‖block - R‖₂ ≤ eps ‖block‖₂` and the
/// smallest such rank.
pub fn rk_truncate(block: MatRef<'_, f64>, eps: f64) -> Result<RkMatrix> {
    if !(eps > 0.0) {
        return Err(AmlsError::Config(format!("truncation accuracy must be positive, got {eps}")));
    }
    let (a, b) = truncated_factors(block, eps)?;
    Ok(RkMatrix { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_block_has_rank_zero() {
        let r = rk_truncate(Mat::<f64>::zeros(5, 4).as_ref(), 1e-6).unwrap();
        assert_eq!(r.rank(), 0);
        assert_eq!(r.to_dense().norm_max(), 0.0);
    }

    #[test]
    fn rank_one_block_is_exact() {
        let u = [1.0, -2.0, 0.5, 3.0];
        let v = [0.25, 1.0, -1.0];
        let blk = Mat::from_fn(4, 3, |i, j| u[i] * v[j]);
        let r = rk_truncate(blk.as_ref(), 1e-12).unwrap();
        assert_eq!(r.rank(), 1);
        assert!((r.to_dense() - &blk).norm_max() < 1e-14);
    }

    #[test]
    fn truncation_rank_rule() {
        assert_eq!(truncation_rank(&[1.0, 0.1, 1e-7, 1e-9], 1e-6), 2);
        assert_eq!(truncation_rank(&[1.0, 0.1], 1e-6), 2);
        assert_eq!(truncation_rank(&[0.0, 0.0], 1e-6), 0);
        assert_eq!(truncation_rank(&[], 1e-6), 0);
    }

    #[test]
    fn rounded_addition_matches_dense_sum() {
        let a = Mat::from_fn(6, 2, |i, j| ((i + 1) * (j + 2)) as f64);
        let b = Mat::from_fn(5, 2, |i, j| (i as f64 - j as f64).sin());
        let x = RkMatrix::new(a.clone(), b.clone());
        let y = RkMatrix::new(a.clone(), Mat::from_fn(5, 2, |i, j| (i * j) as f64));
        let s = x.add(&y, 1e-14).unwrap();
        let dense = x.to_dense() + y.to_dense();
        assert!((s.to_dense() - &dense).norm_max() < 1e-12 * dense.norm_max());
        assert!(s.rank() <= 2);
    }
}

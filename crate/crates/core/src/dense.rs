//! Dense symmetric kernels shared by every AMLS variant.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};

use crate::error::{AmlsError, Result};

/// Default relative drop tolerance for [`orthonormalize_columns`].
pub const DEFAULT_DROP_TOL: f64 = 1e-8;

/// Which part of the spectrum a partial eigensolution keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    LargestMagnitude,
    SmallestMagnitude,
    All,
}

/// Selected eigenpairs `(D, S)` of a pencil `(A, B)` with `Sᵀ B S = Id`.
#[derive(Debug, Clone)]
pub struct PartialEigensolution {
    /// Selected eigenvalues. Largest-magnitude and full selections are sorted
    /// by decreasing magnitude, smallest-magnitude selections by increasing
    /// magnitude.
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
    /// Name of the inner-product matrix the vectors are orthonormal in.
    pub gram: &'static str,
}

impl PartialEigensolution {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Ritz values (by decreasing magnitude) and Ritz vectors of a pencil.
#[derive(Debug, Clone)]
pub struct RitzPairs {
    pub values: Vec<f64>,
    /// One column per Ritz value; `M`-norm 1, largest-magnitude entry positive.
    pub vectors: Mat<f64>,
    /// Dimension of the subspace the pairs were extracted from.
    pub subspace_dim: usize,
}

impl RitzPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Index order by decreasing `|λ|`; ties keep ascending index order.
pub fn magnitude_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[j].abs().total_cmp(&values[i].abs()));
    idx
}

pub fn symmetrize(a: &mut Mat<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Solves `A x = λ B x` for symmetric `A` and SPD `B` by Cholesky reduction
/// to a standard symmetric problem, a full eigendecomposition and selection.
pub fn sym_eig_generalized(
    a: MatRef<'_, f64>,
    b: MatRef<'_, f64>,
    count: usize,
    which: Which,
) -> Result<PartialEigensolution> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(AmlsError::DimensionMismatch(format!(
            "pencil of {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let count = if which == Which::All { n } else { count };
    if count > n || (count == 0 && n > 0) {
        return Err(AmlsError::Config(format!(
            "requested {count} eigenpairs of a pencil of size {n}"
        )));
    }
    if n == 0 {
        return Ok(PartialEigensolution {
            values: vec![],
            vectors: Mat::zeros(0, 0),
            gram: "B",
        });
    }

    let llt = b.llt(Side::Lower).map_err(|_| AmlsError::NotSpd)?;
    let l = llt.L();

    // C = L⁻¹ A L⁻ᵀ
    let mut w = a.to_owned();
    l.solve_lower_triangular_in_place(w.as_mut());
    let mut c = w.transpose().to_owned();
    l.solve_lower_triangular_in_place(c.as_mut());
    symmetrize(&mut c);

    let evd = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| AmlsError::ConvergenceFailure)?;
    let all: Vec<f64> = evd.S().column_vector().iter().copied().collect();

    let mut order = magnitude_order(&all);
    match which {
        Which::LargestMagnitude | Which::All => order.truncate(count),
        Which::SmallestMagnitude => {
            order.reverse();
            // reversing also reversed the tie order; restore ascending index
            order.sort_by(|&i, &j| all[i].abs().total_cmp(&all[j].abs()).then(i.cmp(&j)));
            order.truncate(count);
        }
    }

    let mut y = Mat::zeros(n, count);
    for (dst, &src) in order.iter().enumerate() {
        y.col_mut(dst).copy_from(evd.U().col(src));
    }
    l.transpose().solve_upper_triangular_in_place(y.as_mut());

    Ok(PartialEigensolution {
        values: order.iter().map(|&i| all[i]).collect(),
        vectors: y,
        gram: "B",
    })
}

/// Block `L D Lᵀ` factorisation `K = L diag[K11, K̃22] Lᵀ` with
/// `L = [[Id, 0], [coupling, Id]]`.
pub struct BlockLdlt {
    pub n1: usize,
    pub n2: usize,
    /// `K21 K11⁻¹`, of size `n2 × n1`.
    pub coupling: Mat<f64>,
    /// Pivoted symmetric-indefinite factorisation of `K11`.
    pub k11_factor: faer::linalg::solvers::Lblt<f64>,
    pub k11: Mat<f64>,
    /// `K22 - K21 K11⁻¹ K12`, symmetrised.
    pub schur: Mat<f64>,
}

impl std::fmt::Debug for BlockLdlt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockLdlt")
            .field("n1", &self.n1)
            .field("n2", &self.n2)
            .field("coupling", &self.coupling)
            .field("schur", &self.schur)
            .finish_non_exhaustive()
    }
}

impl BlockLdlt {
    pub fn dim(&self) -> usize {
        self.n1 + self.n2
    }

    /// The unit lower block-triangular factor as a dense matrix.
    pub fn l_matrix(&self) -> Mat<f64> {
        let n = self.dim();
        let mut l = Mat::<f64>::identity(n, n);
        l.submatrix_mut(self.n1, 0, self.n2, self.n1)
            .copy_from(&self.coupling);
        l
    }
}

pub fn block_ldlt(k: MatRef<'_, f64>, n1: usize) -> Result<BlockLdlt> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(AmlsError::DimensionMismatch("K is not square".into()));
    }
    if n1 == 0 || n1 >= n {
        return Err(AmlsError::Config(format!(
            "leading block size {n1} must lie in [1, {n})"
        )));
    }
    let n2 = n - n1;
    let k11 = k.submatrix(0, 0, n1, n1).to_owned();
    let k12 = k.submatrix(0, n1, n1, n2);
    let k22 = k.submatrix(n1, n1, n2, n2);

    let factor = k11.lblt(Side::Lower);
    check_lblt_pivots(&factor, k11.norm_max())?;

    // K11 X = K12, coupling = Xᵀ
    let x = factor.solve(k12);
    if !x.norm_max().is_finite() {
        return Err(AmlsError::SingularBlock(
            "non-finite solution of K11 X = K12".into(),
        ));
    }
    let coupling = x.transpose().to_owned();
    let mut schur = k22.to_owned() - &coupling * k12;
    symmetrize(&mut schur);

    Ok(BlockLdlt {
        n1,
        n2,
        coupling,
        k11_factor: factor,
        k11,
        schur,
    })
}

fn check_lblt_pivots(f: &faer::linalg::solvers::Lblt<f64>, scale: f64) -> Result<()> {
    let d = f.B_diag().column_vector();
    let s = f.B_subdiag().column_vector();
    let n = d.nrows();
    let tiny = f64::EPSILON * n as f64 * scale;
    let mut i = 0;
    while i < n {
        if i + 1 < n && s[i] != 0.0 {
            let det = d[i] * d[i + 1] - s[i] * s[i];
            let mag = (d[i].abs() + s[i].abs()) * (d[i + 1].abs() + s[i].abs());
            if !(det.abs() > f64::EPSILON * mag) || mag == 0.0 {
                return Err(AmlsError::SingularBlock(format!("2x2 pivot at {i}")));
            }
            i += 2;
        } else {
            if !(d[i].abs() > tiny) {
                return Err(AmlsError::SingularBlock(format!("zero pivot at {i}")));
            }
            i += 1;
        }
    }
    Ok(())
}

/// `M̃ = L⁻¹ M L⁻ᵀ` written blockwise in terms of the coupling `G = K21 K11⁻¹`:
/// `M̃11 = M11`, `M̃21 = M21 - G M11`, `M̃22 = M22 - G M12 - M21 Gᵀ + G M11 Gᵀ`.
pub fn transform_mass(m: MatRef<'_, f64>, f: &BlockLdlt) -> Result<Mat<f64>> {
    let (n1, n2) = (f.n1, f.n2);
    let n = n1 + n2;
    if m.nrows() != n || m.ncols() != n {
        return Err(AmlsError::DimensionMismatch(format!(
            "M is {}x{}, factorisation expects {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    let g = f.coupling.as_ref();
    let m11 = m.submatrix(0, 0, n1, n1);
    let m12 = m.submatrix(0, n1, n1, n2);
    let m21 = m.submatrix(n1, 0, n2, n1);
    let m22 = m.submatrix(n1, n1, n2, n2);

    let m21t = m21 - g * m11;
    let m22t = m22 - g * m12 - m21 * g.transpose() + g * m11 * g.transpose();

    let mut out = Mat::zeros(n, n);
    out.submatrix_mut(0, 0, n1, n1).copy_from(m11);
    out.submatrix_mut(n1, 0, n2, n1).copy_from(&m21t);
    out.submatrix_mut(0, n1, n1, n2).copy_from(m21t.transpose());
    out.submatrix_mut(n1, n1, n2, n2).copy_from(&m22t);
    symmetrize(&mut out);
    Ok(out)
}

/// `L⁻ᵀ Z`: rows of the leading block become `Z1 - Gᵀ Z2`, trailing rows are
/// unchanged.
pub fn back_transform(f: &BlockLdlt, z: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let n = f.dim();
    if z.nrows() != n {
        return Err(AmlsError::DimensionMismatch(format!(
            "Z has {} rows, expected {n}",
            z.nrows()
        )));
    }
    let mut out = z.to_owned();
    let z2 = z.submatrix(f.n1, 0, f.n2, z.ncols());
    let upd = f.coupling.transpose() * z2;
    let mut top = out.submatrix_mut(0, 0, f.n1, z.ncols());
    top -= &upd;
    Ok(out)
}

/// Orthonormal basis of the numerical column space, with the indices of the
/// input columns that contributed a new direction.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    pub q: Mat<f64>,
    pub kept: Vec<usize>,
}

impl OrthoBasis {
    pub fn dropped(&self, input_cols: usize) -> usize {
        input_cols - self.kept.len()
    }
}

/// Gram–Schmidt with one re-orthogonalisation pass, processing columns in
/// input order. A column is dropped when its residual after projection is at
/// most `drop_tol` times the largest input column norm.
pub fn orthonormalize_columns(q: MatRef<'_, f64>, drop_tol: f64) -> Result<OrthoBasis> {
    let (n, k) = (q.nrows(), q.ncols());
    let scale = (0..k).map(|j| q.col(j).norm_l2()).fold(0.0, f64::max);
    let threshold = drop_tol * scale;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k.min(n));
    let mut kept = Vec::new();

    for j in 0..k {
        let mut v: Vec<f64> = q.col(j).iter().copied().collect();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &v);
                axpy(-c, b, &mut v);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm <= threshold || norm == 0.0 || basis.len() == n {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
        kept.push(j);
    }

    if basis.is_empty() {
        return Err(AmlsError::EmptySubspace);
    }
    let out = Mat::from_fn(n, basis.len(), |i, j| basis[j][i]);
    Ok(OrthoBasis { q: out, kept })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

/// Scales every column to `M`-norm 1 and flips its sign so that the entry of
/// largest magnitude (first one on ties) is positive.
pub fn normalize_ritz_vectors(vectors: &mut Mat<f64>, m: MatRef<'_, f64>) {
    let mv = m * vectors.as_ref();
    normalize_with_mass_product(vectors, mv.as_ref());
}

/// As [`normalize_ritz_vectors`] with `mv = M * vectors` supplied.
pub(crate) fn normalize_with_mass_product(vectors: &mut Mat<f64>, mv: MatRef<'_, f64>) {
    for j in 0..vectors.ncols() {
        let mnorm = (vectors.col(j).transpose() * mv.col(j)).sqrt();
        let mut best = 0usize;
        for i in 0..vectors.nrows() {
            if vectors[(i, j)].abs() > vectors[(best, j)].abs() {
                best = i;
            }
        }
        let sign = if vectors[(best, j)] < 0.0 { -1.0 } else { 1.0 };
        let s = if mnorm > 0.0 { sign / mnorm } else { sign };
        vectors.col_mut(j).iter_mut().for_each(|x| *x *= s);
    }
}

/// Projects `(K, M)` onto `range(Q)` and returns the `count` Ritz pairs of
/// largest magnitude, `ŷ = Q x̂`.
pub fn rayleigh_ritz(
    k: MatRef<'_, f64>,
    m: MatRef<'_, f64>,
    q: MatRef<'_, f64>,
    count: usize,
) -> Result<RitzPairs> {
    if k.nrows() != q.nrows() || m.nrows() != q.nrows() {
        return Err(AmlsError::DimensionMismatch(format!(
            "Q has {} rows, pencil has size {}",
            q.nrows(),
            k.nrows()
        )));
    }
    let kq = k * q;
    let mq = m * q;
    let mut k_hat = q.transpose() * &kq;
    let mut m_hat = q.transpose() * &mq;
    symmetrize(&mut k_hat);
    symmetrize(&mut m_hat);
    reduced_ritz(k_hat.as_ref(), m_hat.as_ref(), q, m, count)
}

/// Solves a reduced pencil and lifts its eigenvectors through `Q`.
pub(crate) fn reduced_ritz(
    k_hat: MatRef<'_, f64>,
    m_hat: MatRef<'_, f64>,
    q: MatRef<'_, f64>,
    m: MatRef<'_, f64>,
    count: usize,
) -> Result<RitzPairs> {
    let kbar = q.ncols();
    let count = clamp_count(count, kbar);
    let red = sym_eig_generalized(k_hat, m_hat, count, Which::LargestMagnitude)?;
    let mut vectors = q * &red.vectors;
    normalize_ritz_vectors(&mut vectors, m);
    Ok(RitzPairs {
        values: red.values,
        vectors,
        subspace_dim: kbar,
    })
}

pub(crate) fn clamp_count(count: usize, available: usize) -> usize {
    if count > available {
        log::warn!("requested {count} Ritz pairs but the subspace has dimension {available}; clamping");
        available
    } else {
        count
    }
}

/// The dense direct path: `count` largest-magnitude eigenpairs of `(K, M)`
/// with the same normalisation as Ritz vectors.
pub fn direct_eigenpairs(k: MatRef<'_, f64>, m: MatRef<'_, f64>, count: usize) -> Result<RitzPairs> {
    let count = clamp_count(count, k.nrows());
    let sol = sym_eig_generalized(k, m, count, Which::LargestMagnitude)?;
    let mut vectors = sol.vectors;
    normalize_ritz_vectors(&mut vectors, m);
    Ok(RitzPairs {
        values: sol.values,
        vectors,
        subspace_dim: k.nrows(),
    })
}

/// All eigenvalues of `(K, M)` by decreasing magnitude, without eigenvectors.
pub fn eigenvalues_by_magnitude(k: MatRef<'_, f64>, m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let n = k.nrows();
    let llt = m.llt(Side::Lower).map_err(|_| AmlsError::NotSpd)?;
    let l = llt.L();
    let mut w = k.to_owned();
    l.solve_lower_triangular_in_place(w.as_mut());
    let mut c = w.transpose().to_owned();
    l.solve_lower_triangular_in_place(c.as_mut());
    symmetrize(&mut c);
    let vals = c
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| AmlsError::ConvergenceFailure)?;
    debug_assert_eq!(vals.len(), n);
    let order = magnitude_order(&vals);
    Ok(order.into_iter().map(|i| vals[i]).collect())
}

//! Combined dense AMLS: Rayleigh–Ritz on the union of the subspaces built
//! with both subdomain orderings.

use faer::Mat;

use crate::dense_amls::{
    partition_indices, substructure, AmlsConfig, Orientation, Partition, RitzPairs,
};
use crate::dense::{orthonormalize_columns, rayleigh_ritz, OrthoBasis};
use crate::error::Result;
use crate::mesh::DiscreteProblem;

/// `Q = L⁻ᵀ diag[S̃1, S̃2]` for one ordering, rows in the original ordering.
pub fn half_subspace(
    problem: &DiscreteProblem,
    partition: &Partition,
    config: &AmlsConfig,
) -> Result<Mat<f64>> {
    substructure(problem, partition, config)?.q()
}

/// The orthonormalised combined subspace together with the raw column count.
#[derive(Debug, Clone)]
pub struct CombinedSubspace {
    pub basis: OrthoBasis,
    pub cols_a: usize,
    pub cols_b: usize,
}

impl CombinedSubspace {
    pub fn dropped(&self) -> usize {
        self.basis.dropped(self.cols_a + self.cols_b)
    }
}

/// Both half subspaces, concatenated as `[Q_A, Q_B]` and
/// orthonormalised.
pub fn combined_subspace(
    problem: &DiscreteProblem,
    split_point: f64,
    config: &AmlsConfig,
) -> Result<CombinedSubspace> {
    let pa = partition_indices(&problem.grid, split_point, Orientation::Omega1First)?;
    let pb = partition_indices(&problem.grid, split_point, Orientation::Omega2First)?;
    let qa = half_subspace(problem, &pa, config)?;
    let qb = half_subspace(problem, &pb, config)?;
    let n = problem.dim();
    let mut q = Mat::zeros(n, qa.ncols() + qb.ncols());
    q.submatrix_mut(0, 0, n, qa.ncols()).copy_from(&qa);
    q.submatrix_mut(0, qa.ncols(), n, qb.ncols())
        .copy_from(&qb);
    let basis = orthonormalize_columns(q.as_ref(), config.drop_tol)?;
    Ok(CombinedSubspace {
        basis,
        cols_a: qa.ncols(),
        cols_b: qb.ncols(),
    })
}

/// Combined dense AMLS over both orientations, projecting the original `(K, M)`.
pub fn combined_dense_amls_solve(
    problem: &DiscreteProblem,
    split_point: f64,
    config: &AmlsConfig,
) -> Result<RitzPairs> {
    let sub = combined_subspace(problem, split_point, config)?;
    if sub.dropped() > 0 {
        log::info!(
            "combined subspace: kept {} of {} columns",
            sub.basis.kept.len(),
            sub.cols_a + sub.cols_b
        );
    }
    rayleigh_ritz(
        problem.k.as_ref(),
        problem.m.as_ref(),
        sub.basis.q.as_ref(),
        config.n_es,
    )
}

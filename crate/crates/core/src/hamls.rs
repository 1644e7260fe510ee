//! Recursive combined AMLS on H-matrices: the two subproblems of each
//! orientation are themselves solved by the recursive method until they are
//! small enough for the direct solver.

use std::sync::Arc;
use std::time::Instant;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::dense::{
    direct_eigenpairs, normalize_with_mass_product, orthonormalize_columns, symmetrize,
    sym_eig_generalized, RitzPairs, Which,
};
use crate::dense_amls::{AmlsConfig, KRule};
use crate::error::{AmlsError, Result};
use crate::hmatrix::{
    h_block_ldlt, h_transform_mass, BlockClusterTree, ClusterTree, HKind, HMatrix,
};
use crate::mesh::DiscreteProblem;

pub const MAX_RECURSION_DEPTH: usize = 64;

/// One recursion level, recorded after both orientations are combined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub depth: usize,
    pub n: usize,
    /// Mode counts of the leading and trailing block.
    pub k1: usize,
    pub k2: usize,
    /// Columns of `[Q_A, Q_B]` before orthonormalisation.
    pub kbar: usize,
    pub dropped_columns: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct HamlsOutput {
    pub pairs: RitzPairs,
    /// Levels in completion order (children before parents).
    pub trace: Vec<LevelTrace>,
    /// Number of levels that performed a split.
    pub recursion_depth: usize,
}

/// Builds the H-matrix pencil for `problem` with the cluster and
/// approximation parameters of `config`.
pub fn h_pencil(problem: &DiscreteProblem, config: &AmlsConfig) -> Result<(HMatrix, HMatrix)> {
    let tree = Arc::new(ClusterTree::from_grid(&problem.grid, config.n_min));
    let bct = BlockClusterTree::build(tree.clone(), tree, config.eta);
    let k = HMatrix::from_dense(problem.k.as_ref(), &bct, config.h_accuracy)?;
    let m = HMatrix::from_dense(problem.m.as_ref(), &bct, config.h_accuracy)?;
    Ok((k, m))
}

/// Recursive H-AMLS on an assembled problem. With
/// `recursion_threshold ≥ N` this is the dense direct solver.
pub fn hamls_solve_problem(problem: &DiscreteProblem, config: &AmlsConfig) -> Result<HamlsOutput> {
    config.validate()?;
    if problem.dim() <= config.recursion_threshold {
        let pairs = direct_eigenpairs(problem.k.as_ref(), problem.m.as_ref(), config.n_es)?;
        return Ok(HamlsOutput {
            pairs,
            trace: Vec::new(),
            recursion_depth: 0,
        });
    }
    let (k, m) = h_pencil(problem, config)?;
    hamls_solve(&k, &m, config)
}

/// Recursive H-AMLS on an H-matrix pencil over the full index set. Ritz
/// vectors are returned in the original ordering.
pub fn hamls_solve(k: &HMatrix, m: &HMatrix, config: &AmlsConfig) -> Result<HamlsOutput> {
    config.validate()?;
    if k.nrows() != k.ncols() || m.nrows() != k.nrows() || m.ncols() != k.ncols() {
        return Err(AmlsError::DimensionMismatch(format!(
            "pencil of {}x{} and {}x{}",
            k.nrows(),
            k.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    let mut trace = Vec::new();
    let local = solve_level(k, m, config.n_es, config, 0, &mut trace)?;

    let rows = k.row_indices();
    let n = k.nrows();
    let mut vectors = Mat::zeros(n, local.vectors.ncols());
    for (p, &i) in rows.iter().enumerate() {
        vectors.row_mut(i).copy_from(local.vectors.row(p));
    }
    let mut mv = Mat::zeros(n, vectors.ncols());
    let mv_local = m.root.apply(local.vectors.as_ref());
    for (p, &i) in rows.iter().enumerate() {
        mv.row_mut(i).copy_from(mv_local.row(p));
    }
    normalize_with_mass_product(&mut vectors, mv.as_ref());
    let recursion_depth = trace.iter().map(|t| t.depth + 1).max().unwrap_or(0);
    Ok(HamlsOutput {
        pairs: RitzPairs {
            values: local.values,
            vectors,
            subspace_dim: local.subspace_dim,
        },
        trace,
        recursion_depth,
    })
}

fn rule_at(config: &AmlsConfig, depth: usize) -> KRule {
    if depth == 0 {
        config.k_rule
    } else {
        config.sub_k_rule.unwrap_or(config.k_rule)
    }
}

fn direct_local(k: &HMatrix, m: &HMatrix, count: usize) -> Result<RitzPairs> {
    let mut kd = k.to_dense();
    let mut md = m.to_dense();
    symmetrize(&mut kd);
    symmetrize(&mut md);
    direct_eigenpairs(kd.as_ref(), md.as_ref(), count)
}

/// Returns `count` Ritz pairs with vectors in the local cluster ordering.
fn solve_level(
    k: &HMatrix,
    m: &HMatrix,
    count: usize,
    config: &AmlsConfig,
    depth: usize,
    trace: &mut Vec<LevelTrace>,
) -> Result<RitzPairs> {
    if depth > MAX_RECURSION_DEPTH {
        return Err(AmlsError::RecursionDepth(MAX_RECURSION_DEPTH));
    }
    let n = k.nrows();
    let subdivided = matches!(&k.root.kind, HKind::Inner(s) if s[0].nrows == s[0].ncols);
    if n <= config.recursion_threshold || !subdivided {
        if n > config.recursion_threshold {
            log::debug!("block of size {n} is not subdivided; solving directly");
        }
        return direct_local(k, m, count);
    }
    let start = Instant::now();
    let eps = config.h_accuracy;
    let rule = rule_at(config, depth);

    let mut halves = Vec::with_capacity(2);
    let mut counts = (0, 0);
    for lead in 0..2 {
        let trail = 1 - lead;
        let f = h_block_ldlt(k, lead, eps)?;
        let mt = h_transform_mass(m, &f, eps)?;
        let (k1, k2) = if depth == 0 {
            rule.counts(f.n1, f.n2)?
        } else {
            (rule.count_for(f.n1, 0), rule.count_for(f.n2, 1))
        };
        if lead == 0 {
            counts = (k1, k2);
        }
        let m11 = m.son(lead, lead).expect("subdivided");
        let m22 = mt.son(trail, trail).expect("subdivided");
        let first = solve_level(&f.k11, &m11, k1, config, depth + 1, trace)?;
        let second = solve_level(&f.schur, &m22, k2, config, depth + 1, trace)?;

        let (c1, c2) = (first.vectors.ncols(), second.vectors.ncols());
        let mut z = Mat::zeros(n, c1 + c2);
        z.submatrix_mut(0, 0, f.n1, c1).copy_from(&first.vectors);
        z.submatrix_mut(f.n1, c1, f.n2, c2).copy_from(&second.vectors);
        let q = f.back_transform(z.as_ref())?;
        // leading-then-trailing rows back to cluster order
        let q = if lead == 0 {
            q
        } else {
            let mut out = Mat::zeros(n, q.ncols());
            out.submatrix_mut(f.n2, 0, f.n1, q.ncols())
                .copy_from(q.submatrix(0, 0, f.n1, q.ncols()));
            out.submatrix_mut(0, 0, f.n2, q.ncols())
                .copy_from(q.submatrix(f.n1, 0, f.n2, q.ncols()));
            out
        };
        halves.push(q);
    }

    let (qa, qb) = (&halves[0], &halves[1]);
    let cols = qa.ncols() + qb.ncols();
    let mut q = Mat::zeros(n, cols);
    q.submatrix_mut(0, 0, n, qa.ncols()).copy_from(qa);
    q.submatrix_mut(0, qa.ncols(), n, qb.ncols()).copy_from(qb);
    let basis = orthonormalize_columns(q.as_ref(), config.drop_tol)?;
    let q = basis.q;

    let kq = k.root.apply(q.as_ref());
    let mq = m.root.apply(q.as_ref());
    let mut k_hat = q.transpose() * &kq;
    let mut m_hat = q.transpose() * &mq;
    symmetrize(&mut k_hat);
    symmetrize(&mut m_hat);
    let kbar_kept = q.ncols();
    let count = crate::dense::clamp_count(count, kbar_kept);
    let red = sym_eig_generalized(k_hat.as_ref(), m_hat.as_ref(), count, Which::LargestMagnitude)?;
    let mut vectors = &q * &red.vectors;
    let mv = &mq * &red.vectors;
    normalize_with_mass_product(&mut vectors, mv.as_ref());

    trace.push(LevelTrace {
        depth,
        n,
        k1: counts.0,
        k2: counts.1,
        kbar: cols,
        dropped_columns: cols - kbar_kept,
        wall_time: start.elapsed().as_secs_f64(),
    });
    Ok(RitzPairs {
        values: red.values,
        vectors,
        subspace_dim: kbar_kept,
    })
}

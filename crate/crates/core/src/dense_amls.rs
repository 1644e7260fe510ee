//! Single-split dense AMLS.
//!
//! The indices are split geometrically into two subdomains, `K` is block
//! diagonalised by a block `L D Lᵀ` step, `M` is transformed congruently, the
//! two subproblems `(K11, M11)` and `(K̃22, M̃22)` are solved for their
//! largest-magnitude modes and `(K, M)` is projected onto the span of the
//! back-transformed modes.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::dense::{
    back_transform, block_ldlt, clamp_count, normalize_ritz_vectors, sym_eig_generalized,
    symmetrize, transform_mass, BlockLdlt, PartialEigensolution, Which, DEFAULT_DROP_TOL,
};
pub use crate::dense::RitzPairs;
use crate::error::{AmlsError, Result};
use crate::mesh::{DiscreteProblem, Grid1D};

/// Which subdomain's indices are ordered first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    #[serde(rename = "omega1_first")]
    Omega1First,
    #[serde(rename = "omega2_first")]
    Omega2First,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Omega1First => Orientation::Omega2First,
            Orientation::Omega2First => Orientation::Omega1First,
        }
    }
}

/// Geometric two-way split of the index set.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub split_point: f64,
    /// `permutation[p]` is the original index placed at position `p`.
    pub permutation: Vec<usize>,
    /// Number of indices with nodal point left of the split.
    pub n1: usize,
    pub n2: usize,
    pub orientation: Orientation,
}

impl Partition {
    pub fn dim(&self) -> usize {
        self.n1 + self.n2
    }

    /// Size of the block that is eliminated first.
    pub fn leading_len(&self) -> usize {
        match self.orientation {
            Orientation::Omega1First => self.n1,
            Orientation::Omega2First => self.n2,
        }
    }

    pub fn trailing_len(&self) -> usize {
        self.dim() - self.leading_len()
    }

    /// Identity ordering with the given leading block size.
    pub fn identity(n: usize, n1: usize) -> Self {
        Self {
            split_point: f64::NAN,
            permutation: (0..n).collect(),
            n1,
            n2: n - n1,
            orientation: Orientation::Omega1First,
        }
    }

    /// `A[perm][:, perm]`.
    pub fn permute_matrix(&self, a: MatRef<'_, f64>) -> Mat<f64> {
        let p = &self.permutation;
        Mat::from_fn(p.len(), p.len(), |i, j| a[(p[i], p[j])])
    }

    /// Maps rows from the permuted ordering back to the original ordering.
    pub fn unpermute_rows(&self, a: MatRef<'_, f64>) -> Mat<f64> {
        let mut out = Mat::zeros(a.nrows(), a.ncols());
        for (pos, &orig) in self.permutation.iter().enumerate() {
            out.row_mut(orig).copy_from(a.row(pos));
        }
        out
    }
}

/// An index belongs to Ω1 iff its nodal point lies strictly left of
/// `split_point`; ties go to Ω2.
pub fn partition_indices(
    grid: &Grid1D,
    split_point: f64,
    orientation: Orientation,
) -> Result<Partition> {
    if !(split_point > grid.a && split_point < grid.b) {
        return Err(AmlsError::Config(format!(
            "split point {split_point} is not inside ({}, {})",
            grid.a, grid.b
        )));
    }
    let (omega1, omega2): (Vec<usize>, Vec<usize>) =
        (0..grid.n_cells).partition(|&i| grid.nodal_points[i] < split_point);
    let (n1, n2) = (omega1.len(), omega2.len());
    if n1 == 0 || n2 == 0 {
        return Err(AmlsError::DegeneratePartition { n1, n2 });
    }
    let permutation = match orientation {
        Orientation::Omega1First => [omega1, omega2].concat(),
        Orientation::Omega2First => [omega2, omega1].concat(),
    };
    Ok(Partition {
        split_point,
        permutation,
        n1,
        n2,
        orientation,
    })
}

/// How many modes each subproblem contributes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum KRule {
    /// `k1` modes from the leading block, `k2` from the trailing block.
    Fixed { k1: usize, k2: usize },
    /// `k_i = ceil(c * N_i^beta)`, capped at `N_i`.
    Power { c: f64, beta: f64 },
    /// Every mode (`k_i = N_i`).
    Full,
}

impl KRule {
    /// Mode counts for a leading block of size `n1` and trailing block of
    /// size `n2`; fixed counts above the block size are an error.
    pub fn counts(&self, n1: usize, n2: usize) -> Result<(usize, usize)> {
        match *self {
            KRule::Fixed { k1, k2 } => {
                if k1 == 0 || k2 == 0 || k1 > n1 || k2 > n2 {
                    return Err(AmlsError::Config(format!(
                        "mode counts ({k1}, {k2}) must lie in [1, N_i] for block sizes ({n1}, {n2})"
                    )));
                }
                Ok((k1, k2))
            }
            _ => Ok((self.count_for(n1, 0), self.count_for(n2, 1))),
        }
    }

    /// Mode count for a block of size `n`, clamping fixed counts.
    pub fn count_for(&self, n: usize, block: usize) -> usize {
        let k = match *self {
            KRule::Fixed { k1, k2 } => {
                if block == 0 {
                    k1
                } else {
                    k2
                }
            }
            KRule::Power { c, beta } => (c * (n as f64).powf(beta)).ceil() as usize,
            KRule::Full => n,
        };
        k.clamp(1, n.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KRule::Fixed { k1, k2 } if k1 == 0 || k2 == 0 => {
                Err(AmlsError::Config("fixed mode counts must be positive".into()))
            }
            KRule::Power { c, beta } if !(c > 0.0) || !(beta > 0.0 && beta < 1.0) => Err(
                AmlsError::Config(format!("power rule needs C > 0 and beta in (0, 1), got C = {c}, beta = {beta}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Parameters shared by the dense, combined and recursive solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmlsConfig {
    pub k_rule: KRule,
    /// Mode rule for subproblems solved recursively; `None` reuses `k_rule`.
    pub sub_k_rule: Option<KRule>,
    /// Number of sought eigenpairs.
    pub n_es: usize,
    pub which: Which,
    pub drop_tol: f64,
    /// Subproblems of at most this size are solved directly.
    pub recursion_threshold: usize,
    /// Relative accuracy of low-rank blocks and formatted arithmetic.
    pub h_accuracy: f64,
    /// Admissibility parameter.
    pub eta: f64,
    /// Cluster leaf size.
    pub n_min: usize,
}

impl Default for AmlsConfig {
    fn default() -> Self {
        Self {
            k_rule: KRule::Power {
                c: 2.0,
                beta: 1.0 / 3.0,
            },
            sub_k_rule: None,
            n_es: 10,
            which: Which::LargestMagnitude,
            drop_tol: DEFAULT_DROP_TOL,
            recursion_threshold: 64,
            h_accuracy: 1e-8,
            eta: 1.0,
            n_min: 32,
        }
    }
}

impl AmlsConfig {
    /// Five modes per subproblem, as in the 200-DOF benchmark.
    pub fn fixed(k1: usize, k2: usize, n_es: usize) -> Self {
        Self {
            k_rule: KRule::Fixed { k1, k2 },
            n_es,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.k_rule.validate()?;
        if let Some(r) = &self.sub_k_rule {
            r.validate()?;
        }
        if self.which != Which::LargestMagnitude {
            return Err(AmlsError::Config(
                "only largest-magnitude mode selection is supported".into(),
            ));
        }
        if self.n_es == 0 {
            return Err(AmlsError::Config("n_es must be positive".into()));
        }
        if !(self.drop_tol >= 0.0) || !(self.h_accuracy > 0.0) || !(self.eta > 0.0) {
            return Err(AmlsError::Config(
                "drop_tol must be non-negative, h_accuracy and eta positive".into(),
            ));
        }
        if self.n_min == 0 || self.recursion_threshold == 0 {
            return Err(AmlsError::Config(
                "n_min and recursion_threshold must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Block factorisation, transformed mass and subproblem modes for one
/// orientation, in the permuted ordering.
#[derive(Debug)]
pub struct Substructuring {
    pub partition: Partition,
    pub factor: BlockLdlt,
    pub m_tilde: Mat<f64>,
    /// Modes of `(K11, M11)`.
    pub first: PartialEigensolution,
    /// Modes of `(K̃22, M̃22)`.
    pub second: PartialEigensolution,
}

impl Substructuring {
    pub fn kbar(&self) -> usize {
        self.first.len() + self.second.len()
    }

    /// `Z = diag[S̃1, S̃2]`.
    pub fn z(&self) -> Mat<f64> {
        let (n1, n2) = (self.factor.n1, self.factor.n2);
        let (k1, k2) = (self.first.len(), self.second.len());
        let mut z = Mat::zeros(n1 + n2, k1 + k2);
        z.submatrix_mut(0, 0, n1, k1)
            .copy_from(&self.first.vectors);
        z.submatrix_mut(n1, k1, n2, k2)
            .copy_from(&self.second.vectors);
        z
    }

    /// `K̂ = diag[D̃1, D̃2]`.
    pub fn k_hat(&self) -> Mat<f64> {
        let d: Vec<f64> = self
            .first
            .values
            .iter()
            .chain(&self.second.values)
            .copied()
            .collect();
        Mat::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    /// `M̂ = Zᵀ M̃ Z`.
    pub fn m_hat(&self) -> Mat<f64> {
        let z = self.z();
        let mut m = z.transpose() * &self.m_tilde * &z;
        symmetrize(&mut m);
        m
    }

    /// `L⁻ᵀ Z` in the permuted ordering.
    pub fn q_permuted(&self) -> Result<Mat<f64>> {
        back_transform(&self.factor, self.z().as_ref())
    }

    /// `L⁻ᵀ Z` in the original ordering.
    pub fn q(&self) -> Result<Mat<f64>> {
        Ok(self.partition.unpermute_rows(self.q_permuted()?.as_ref()))
    }
}

/// Factorises, transforms and solves both subproblems.
pub fn substructure(
    problem: &DiscreteProblem,
    partition: &Partition,
    config: &AmlsConfig,
) -> Result<Substructuring> {
    config.validate()?;
    let n = problem.dim();
    if partition.dim() != n {
        return Err(AmlsError::DimensionMismatch(format!(
            "partition covers {} indices, problem has {n}",
            partition.dim()
        )));
    }
    let lead = partition.leading_len();
    let trail = partition.trailing_len();
    let (k1, k2) = config.k_rule.counts(lead, trail)?;

    let kp = partition.permute_matrix(problem.k.as_ref());
    let mp = partition.permute_matrix(problem.m.as_ref());
    let factor = block_ldlt(kp.as_ref(), lead)?;
    let m_tilde = transform_mass(mp.as_ref(), &factor)?;

    let mut first = sym_eig_generalized(
        factor.k11.as_ref(),
        m_tilde.submatrix(0, 0, lead, lead),
        k1,
        Which::LargestMagnitude,
    )?;
    first.gram = "M11";
    let mut second = sym_eig_generalized(
        factor.schur.as_ref(),
        m_tilde.submatrix(lead, lead, trail, trail),
        k2,
        Which::LargestMagnitude,
    )?;
    second.gram = "M~22";

    Ok(Substructuring {
        partition: partition.clone(),
        factor,
        m_tilde,
        first,
        second,
    })
}

/// Dense AMLS for one orientation. Ritz vectors are returned in the original index
/// ordering.
pub fn dense_amls_solve(
    problem: &DiscreteProblem,
    partition: &Partition,
    config: &AmlsConfig,
) -> Result<RitzPairs> {
    let sub = substructure(problem, partition, config)?;
    let k_hat = sub.k_hat();
    let m_hat = sub.m_hat();
    let kbar = sub.kbar();
    let count = clamp_count(config.n_es, kbar);
    let red = sym_eig_generalized(k_hat.as_ref(), m_hat.as_ref(), count, Which::LargestMagnitude)?;

    let y_perm = back_transform(&sub.factor, (sub.z() * &red.vectors).as_ref())?;
    let mut vectors = partition.unpermute_rows(y_perm.as_ref());
    normalize_ritz_vectors(&mut vectors, problem.m.as_ref());
    Ok(RitzPairs {
        values: red.values,
        vectors,
        subspace_dim: kbar,
    })
}

//! One-dimensional Galerkin discretisation with piecewise-constant basis
//! functions.
//!
//! Every basis function is the indicator of one mesh cell, so the mass matrix
//! is `h * Id` and the stiffness matrix holds the double integrals
//! `K[i][j] = ∫_{cell_i} ∫_{cell_j} k(x, y) dy dx`.

use std::fmt;
use std::sync::Arc;

use faer::Mat;

use crate::error::{AmlsError, Result};
use crate::quadrature::integrate_adaptive;

/// Absolute tolerance used for quadrature of custom kernels.
pub const CUSTOM_KERNEL_TOL: f64 = 1e-12;

/// Equispaced mesh of `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub a: f64,
    pub b: f64,
    pub n_cells: usize,
    pub h: f64,
    pub nodal_points: Vec<f64>,
}

impl Grid1D {
    pub fn len(&self) -> usize {
        self.n_cells
    }

    pub fn is_empty(&self) -> bool {
        self.n_cells == 0
    }

    /// Cell `i` (zero based) as `(left, right)`.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        (
            self.a + i as f64 * self.h,
            self.a + (i + 1) as f64 * self.h,
        )
    }

    pub fn cells(&self) -> Vec<(f64, f64)> {
        (0..self.n_cells).map(|i| self.cell(i)).collect()
    }
}

pub fn build_grid(a: f64, b: f64, n_cells: usize) -> Result<Grid1D> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(AmlsError::InvalidRange { a, b });
    }
    if n_cells < 1 {
        return Err(AmlsError::InvalidSize(
            "a grid needs at least one cell".into(),
        ));
    }
    let h = (b - a) / n_cells as f64;
    let nodal_points = (0..n_cells).map(|i| a + (i as f64 + 0.5) * h).collect();
    Ok(Grid1D {
        a,
        b,
        n_cells,
        h,
        nodal_points,
    })
}

pub type KernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Log,
    Custom,
}

/// A symmetric kernel function `k(x, y)`.
#[derive(Clone)]
pub enum KernelSpec {
    /// `k(x, y) = log|x - y|`
    Log,
    Custom {
        evaluator: KernelFn,
        /// Exponent `α` of a `|x - y|^{-α}` type singularity, if any.
        singularity_exponent: Option<f64>,
    },
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Log => write!(f, "KernelSpec::Log"),
            KernelSpec::Custom {
                singularity_exponent,
                ..
            } => f
                .debug_struct("KernelSpec::Custom")
                .field("singularity_exponent", singularity_exponent)
                .finish_non_exhaustive(),
        }
    }
}

impl KernelSpec {
    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        KernelSpec::Custom {
            evaluator: Arc::new(f),
            singularity_exponent: None,
        }
    }

    pub fn kind(&self) -> KernelKind {
        match self {
            KernelSpec::Log => KernelKind::Log,
            KernelSpec::Custom { .. } => KernelKind::Custom,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Log => "log",
            KernelSpec::Custom { .. } => "custom",
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            KernelSpec::Log => (x - y).abs().ln(),
            KernelSpec::Custom { evaluator, .. } => evaluator(x, y),
        }
    }
}

/// The pencil `(K, M)` together with its mesh.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    pub k: Mat<f64>,
    pub m: Mat<f64>,
    pub grid: Grid1D,
}

impl DiscreteProblem {
    pub fn assemble(grid: Grid1D, kernel: &KernelSpec) -> Result<Self> {
        let k = assemble_stiffness(&grid, kernel)?;
        let m = assemble_mass(&grid);
        Ok(Self { k, m, grid })
    }

    /// The benchmark problem: `log|x - y|` on `(0, 1)` with `n` cells.
    pub fn log_kernel(n: usize) -> Result<Self> {
        Self::assemble(build_grid(0.0, 1.0, n)?, &KernelSpec::Log)
    }

    pub fn dim(&self) -> usize {
        self.grid.n_cells
    }
}

pub fn assemble_mass(grid: &Grid1D) -> Mat<f64> {
    let n = grid.n_cells;
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = grid.h;
    }
    m
}

pub fn stiffness_entry(grid: &Grid1D, kernel: &KernelSpec, i: usize, j: usize) -> Result<f64> {
    let n = grid.n_cells;
    if i >= n || j >= n {
        return Err(AmlsError::DimensionMismatch(format!(
            "entry ({i}, {j}) outside a {n}-cell grid"
        )));
    }
    match kernel {
        KernelSpec::Log => Ok(log_entry(grid.h, i.abs_diff(j))),
        KernelSpec::Custom { evaluator, .. } => custom_entry(grid, evaluator.as_ref(), i, j),
    }
}

/// Double integral of `log|x - y|` over two cells of width `h` whose indices
/// differ by `k`.
///
/// With `F(t) = t²/2 log|t| - 3t²/4` (so `F'' = log|t|`) the integral is the
/// second difference `F(d + h) - 2 F(d) + F(d - h)`, `d = k h`. Scaling out
/// `h` leaves `h² (log h - 3/2 + Δ²ψ(k) / 2)` with `ψ(t) = t² log|t|`; the
/// second difference of `ψ` is rewritten so that far-apart cells do not lose
/// digits to cancellation.
pub fn log_entry(h: f64, k: usize) -> f64 {
    let d2psi = match k {
        0 => 0.0,
        1 => 4.0 * std::f64::consts::LN_2,
        _ => {
            let k = k as f64;
            let r = 1.0 / k;
            k * k * (-r * r).ln_1p() + (k * k - 1.0).ln() + 4.0 * k * r.atanh()
        }
    };
    h * h * (h.ln() - 1.5 + 0.5 * d2psi)
}

fn custom_entry(
    grid: &Grid1D,
    k: &(dyn Fn(f64, f64) -> f64 + Send + Sync),
    i: usize,
    j: usize,
) -> Result<f64> {
    let tol = CUSTOM_KERNEL_TOL;
    let inner_tol = 0.1 * tol;
    let (a1, b1) = grid.cell(i);
    let (a2, b2) = grid.cell(j);
    let h = grid.h;

    if i == j {
        // s = x - y folds the diagonal singularity onto the endpoint s = 0.
        return integrate_adaptive(0.0, h, tol, &mut |s| {
            integrate_adaptive(a1, b1 - s, inner_tol, &mut |y| k(y + s, y) + k(y, y + s))
                .unwrap_or(f64::NAN)
        })
        .and_then(finite(tol));
    }

    if i.abs_diff(j) == 1 {
        // Shared corner p; x = p ∓ u, y = p ± v and the singularity sits at
        // u = v = 0. Each half of the square is Duffy-mapped onto (r, t).
        let (p, x_left) = if b1 <= a2 { (b1, true) } else { (a1, false) };
        let point = |u: f64, v: f64| {
            if x_left {
                k(p - u, p + v)
            } else {
                k(p + v, p - u)
            }
        };
        let lower = integrate_adaptive(0.0, h, tol, &mut |r| {
            r * integrate_adaptive(0.0, 1.0, inner_tol, &mut |t| point(r, r * t))
                .unwrap_or(f64::NAN)
        })?;
        let upper = integrate_adaptive(0.0, h, tol, &mut |r| {
            r * integrate_adaptive(0.0, 1.0, inner_tol, &mut |t| point(r * t, r))
                .unwrap_or(f64::NAN)
        })?;
        return finite(tol)(lower + upper);
    }

    integrate_adaptive(a1, b1, tol, &mut |x| {
        integrate_adaptive(a2, b2, inner_tol, &mut |y| k(x, y)).unwrap_or(f64::NAN)
    })
    .and_then(finite(tol))
}

fn finite(tol: f64) -> impl Fn(f64) -> Result<f64> {
    move |v| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(AmlsError::QuadratureFailure {
                tol,
                estimate: f64::INFINITY,
            })
        }
    }
}

/// Assembles the lower triangle, mirrors it and returns a bitwise-symmetric
/// stiffness matrix.
pub fn assemble_stiffness(grid: &Grid1D, kernel: &KernelSpec) -> Result<Mat<f64>> {
    let n = grid.n_cells;
    let mut k = Mat::zeros(n, n);
    match kernel {
        KernelSpec::Log => {
            // Toeplitz: one value per cell distance.
            let diag: Vec<f64> = (0..n).map(|d| log_entry(grid.h, d)).collect();
            for j in 0..n {
                for i in 0..n {
                    k[(i, j)] = diag[i.abs_diff(j)];
                }
            }
        }
        KernelSpec::Custom { .. } => {
            for j in 0..n {
                for i in j..n {
                    let v = stiffness_entry(grid, kernel, i, j)?;
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
        }
    }
    Ok(k)
}

/// Values of the piecewise-constant function with coefficients `coeffs` at the
/// nodal points.
pub fn sample_eigenfunction(grid: &Grid1D, coeffs: &[f64]) -> Result<Vec<(f64, f64)>> {
    if coeffs.len() != grid.n_cells {
        return Err(AmlsError::LengthMismatch {
            expected: grid.n_cells,
            got: coeffs.len(),
        });
    }
    Ok(grid
        .nodal_points
        .iter()
        .copied()
        .zip(coeffs.iter().copied())
        .collect())
}

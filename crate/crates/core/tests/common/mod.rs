//! Independent reference computations for the integration tests.
#![allow(dead_code)]

use faer::{Mat, MatRef, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gauss–Legendre nodes and weights on `[-1, 1]` via the three-term
/// recurrence and Newton's method.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..200 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-15 {
                let (mut q0, mut q1) = (1.0, z);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let dq = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                break;
            }
        }
        x[i] = z;
    }
    (x, w)
}

/// `∫_a^b f` with geometric grading towards both endpoints, where
/// integrable log singularities may sit.
fn graded(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (x, w) = gauss_legendre(20);
    let mid = 0.5 * (a + b);
    // fractions 0, 4^-40, ..., 4^-1, 1 of the half interval
    let edges: Vec<f64> = std::iter::once(0.0)
        .chain((0..=40).rev().map(|k| 0.25f64.powi(k)))
        .collect();
    let half = mid - a;
    let mut sum = 0.0;
    for win in edges.windows(2) {
        let (lo, hi) = (win[0] * half, win[1] * half);
        let c = 0.5 * (hi - lo);
        for (xi, wi) in x.iter().zip(&w) {
            let s = lo + c * (xi + 1.0);
            sum += wi * c * (f(a + s) + f(b - s));
        }
    }
    sum
}

/// `∫_{cell i} ∫_{cell j} ln|x - y| dy dx` on a uniform mesh of width `h`,
/// reduced to `∫_{-h}^{h} (h - |s|) ln|(i - j) h + s| ds`.
pub fn log_entry_oracle(h: f64, i: usize, j: usize) -> f64 {
    let off = (i as f64 - j as f64) * h;
    let f = |s: f64| {
        let r = (off + s).abs();
        if r == 0.0 {
            0.0
        } else {
            (h - s.abs()) * r.ln()
        }
    };
    let mut cuts = vec![-h, 0.0, h, -off];
    cuts.retain(|c| *c >= -h && *c <= h);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2).map(|w| graded(&f, w[0], w[1])).sum()
}

/// Lower Cholesky factor by the textbook column algorithm.
pub fn cholesky(m: MatRef<'_, f64>) -> Mat<f64> {
    let n = m.nrows();
    let mut l = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        let d = m[(j, j)] - (0..j).map(|p| l[(j, p)] * l[(j, p)]).sum::<f64>();
        assert!(d > 0.0, "mass matrix is not positive definite");
        l[(j, j)] = d.sqrt();
        for i in j + 1..n {
            let s = m[(i, j)] - (0..j).map(|p| l[(i, p)] * l[(j, p)]).sum::<f64>();
            l[(i, j)] = s / l[(j, j)];
        }
    }
    l
}

/// `l⁻¹ b` by forward substitution.
fn forward(l: &Mat<f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for c in 0..x.ncols() {
        for i in 0..n {
            let s = x[(i, c)] - (0..i).map(|p| l[(i, p)] * x[(p, c)]).sum::<f64>();
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// All eigenvalues of `(k, m)` with `m` SPD, via `L⁻¹ k L⁻ᵀ` with
/// `m = L Lᵀ`, sorted by decreasing magnitude.
pub fn pencil_eigenvalues(k: MatRef<'_, f64>, m: MatRef<'_, f64>) -> Vec<f64> {
    let l = cholesky(m);
    let w = forward(&l, k);
    let c = forward(&l, w.transpose());
    let ct = c.transpose().to_owned();
    let c = faer::Scale(0.5) * (&c + &ct);
    let mut vals: Vec<f64> = c
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("standard eigenvalues");
    vals.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    vals
}

/// Ritz values of `(k, m)` on `range(v)` without orthonormalising `v`.
pub fn ritz_oracle(k: MatRef<'_, f64>, m: MatRef<'_, f64>, v: MatRef<'_, f64>) -> Vec<f64> {
    let a = v.transpose() * k * v;
    let b = v.transpose() * m * v;
    pencil_eigenvalues(a.as_ref(), b.as_ref())
}

pub fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs())
        .fold(0.0, f64::max)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_symmetric(rng: &mut impl Rng, n: usize) -> Mat<f64> {
    let a = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    faer::Scale(0.5) * (&a + a.transpose())
}

/// Well-conditioned SPD matrix: `B Bᵀ / n + I / 2`.
pub fn random_spd(rng: &mut impl Rng, n: usize) -> Mat<f64> {
    let b = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut m = &b * b.transpose() * faer::Scale(1.0 / n as f64);
    for i in 0..n {
        m[(i, i)] += 0.5;
    }
    let mt = m.transpose().to_owned();
    faer::Scale(0.5) * (&m + &mt)
}

/// Cosine between two vectors in the Euclidean inner product.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

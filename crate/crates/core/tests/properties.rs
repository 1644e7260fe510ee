mod common;

use std::sync::Arc;

use amls::bench::{make_error_report, ErrorReport};
use amls::dense::{
    back_transform, block_ldlt, orthonormalize_columns, rayleigh_ritz, sym_eig_generalized,
    transform_mass, Which,
};
use amls::dense_amls::{dense_amls_solve, AmlsConfig, KRule, Partition};
use amls::hmatrix::{BlockClusterTree, ClusterTree, HMatrix, LeafKind};
use amls::mesh::{build_grid, DiscreteProblem};
use common::*;
use faer::{Mat, MatRef};
use proptest::prelude::*;

fn pencil(seed: u64, n: usize, definite: bool) -> (Mat<f64>, Mat<f64>) {
    let mut r = rng(seed);
    let k = if definite { random_spd(&mut r, n) } else { random_symmetric(&mut r, n) };
    (k, random_spd(&mut r, n))
}

/// `|a_i - b_i| / max_j |b_j|`; eigenvalue perturbations scale with the
/// spectrum, not with the individual value.
fn spectral_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn block_diag(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let (n1, n2) = (a.nrows(), b.nrows());
    let mut d = Mat::zeros(n1 + n2, n1 + n2);
    d.submatrix_mut(0, 0, n1, n1).copy_from(a);
    d.submatrix_mut(n1, n1, n2, n2).copy_from(b);
    d
}

fn sizes() -> impl Strategy<Value = (usize, usize, u64)> {
    (2usize..=32).prop_flat_map(|n| (Just(n), 1..n, any::<u64>()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transformed_pencil_keeps_the_spectrum((n, n1, seed) in sizes()) {
        let (k, m) = pencil(seed, n, false);
        let f = block_ldlt(k.as_ref(), n1).unwrap();
        let mt = transform_mass(m.as_ref(), &f).unwrap();
        let kt = block_diag(f.k11.as_ref(), f.schur.as_ref());
        let got = pencil_eigenvalues(kt.as_ref(), mt.as_ref());
        let want = pencil_eigenvalues(k.as_ref(), m.as_ref());
        prop_assert!(spectral_rel(&got, &want) < 1e-9);
    }

    #[test]
    fn back_transformed_vectors_solve_the_original_pencil((n, n1, seed) in sizes()) {
        let (k, m) = pencil(seed, n, false);
        let f = block_ldlt(k.as_ref(), n1).unwrap();
        let mt = transform_mass(m.as_ref(), &f).unwrap();
        let kt = block_diag(f.k11.as_ref(), f.schur.as_ref());
        let sol = sym_eig_generalized(kt.as_ref(), mt.as_ref(), n, Which::All).unwrap();
        let x = back_transform(&f, sol.vectors.as_ref()).unwrap();
        let knorm = k.norm_l2();
        for (j, &lam) in sol.values.iter().enumerate() {
            let r = &k * x.col(j) - faer::Scale(lam) * (&m * x.col(j));
            prop_assert!(r.norm_l2() <= 1e-8 * knorm, "residual {} for j = {j}", r.norm_l2());
        }
    }

    #[test]
    fn ritz_values_stay_inside_the_spectrum((n, cols, seed) in sizes()) {
        let (k, m) = pencil(seed, n, true);
        let mut r = rng(seed ^ 1);
        let q = Mat::from_fn(n, cols, |_, _| rand::Rng::random_range(&mut r, -1.0..1.0));
        let all = pencil_eigenvalues(k.as_ref(), m.as_ref());
        let (hi, lo) = (all[0], all[n - 1]);
        let ritz = rayleigh_ritz(k.as_ref(), m.as_ref(), q.as_ref(), cols).unwrap();
        for v in ritz.values {
            prop_assert!(v <= hi + 1e-10 * hi && v >= lo - 1e-10 * hi, "{v} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn ritz_values_match_explicit_projection((n, cols, seed) in sizes()) {
        let (k, m) = pencil(seed, n, false);
        let mut r = rng(seed ^ 2);
        let q = Mat::from_fn(n, cols, |_, _| rand::Rng::random_range(&mut r, -1.0..1.0));
        let ritz = rayleigh_ritz(k.as_ref(), m.as_ref(), q.as_ref(), cols).unwrap();
        let want = ritz_oracle(k.as_ref(), m.as_ref(), q.as_ref());
        prop_assert_eq!(ritz.values.len(), want.len());
        prop_assert!(spectral_rel(&ritz.values, &want) < 1e-8);
    }

    #[test]
    fn enlarging_the_subspace_never_lowers_the_top_ritz_value((n, cols, seed) in sizes()) {
        let (k, m) = pencil(seed, n, true);
        let mut r = rng(seed ^ 3);
        let big = Mat::from_fn(n, cols, |_, _| rand::Rng::random_range(&mut r, -1.0..1.0));
        let mut prev = f64::NEG_INFINITY;
        for c in 1..=cols {
            let top = rayleigh_ritz(k.as_ref(), m.as_ref(), big.subcols(0, c), 1).unwrap().values[0];
            prop_assert!(top >= prev - 1e-12 * top.abs());
            prev = top;
        }
    }

    #[test]
    fn orthonormalisation_is_idempotent((n, cols, seed) in sizes(), dup in any::<bool>()) {
        let mut r = rng(seed);
        let mut q = Mat::from_fn(n, cols, |_, _| rand::Rng::random_range(&mut r, -1.0..1.0));
        if dup && cols > 1 {
            let c0 = q.col(0).to_owned();
            q.col_mut(cols - 1).copy_from(faer::Scale(2.0) * &c0);
        }
        let once = orthonormalize_columns(q.as_ref(), 1e-8).unwrap();
        let p = once.q.ncols();
        let gram = once.q.transpose() * &once.q;
        prop_assert!((gram - Mat::<f64>::identity(p, p)).norm_max() < 1e-10);
        let twice = orthonormalize_columns(once.q.as_ref(), 1e-8).unwrap();
        prop_assert_eq!(twice.kept.len(), p);
        prop_assert!((&twice.q - &once.q).norm_max() < 1e-12);
        // range(Q) contains every input column
        let resid = &q - &once.q * (once.q.transpose() * &q);
        prop_assert!(resid.norm_max() <= 10.0 * 1e-8 * q.norm_max().max(1.0));
    }

    #[test]
    fn full_selection_reproduces_the_pencil((n, n1, seed) in sizes()) {
        let (k, m) = pencil(seed, n, false);
        let problem = DiscreteProblem { k, m, grid: build_grid(0.0, 1.0, n).unwrap() };
        let config = AmlsConfig { k_rule: KRule::Full, n_es: n, ..AmlsConfig::default() };
        let got = dense_amls_solve(&problem, &Partition::identity(n, n1), &config).unwrap();
        let want = pencil_eigenvalues(problem.k.as_ref(), problem.m.as_ref());
        prop_assert!(spectral_rel(&got.values, &want) < 1e-9);
    }

    #[test]
    fn report_fields_are_pure_bookkeeping(
        vals in proptest::collection::vec((-10.0f64..-1e-3, 0.5f64..1.5, 0.5f64..1.5), 1..30)
    ) {
        let reference: Vec<f64> = vals.iter().map(|v| v.0).collect();
        let discrete: Vec<f64> = vals.iter().map(|v| v.0 * v.1).collect();
        let approx: Vec<f64> = vals.iter().map(|v| v.0 * v.2).collect();
        let rep = make_error_report(&approx, &discrete, &reference, vals.len()).unwrap();
        let json = serde_json::to_string(&rep).unwrap();
        let back: ErrorReport = serde_json::from_str(&json).unwrap();
        let mut gamma = f64::NAN;
        for r in &back.rows {
            let dh = (r.lambda_ref - r.lambda_hat).abs() / r.lambda_ref.abs();
            let d = (r.lambda_ref - r.lambda_h).abs() / r.lambda_ref.abs();
            prop_assert_eq!(dh.to_bits(), r.delta_hat.to_bits());
            prop_assert_eq!(d.to_bits(), r.delta.to_bits());
            if d != 0.0 {
                prop_assert_eq!((dh / d).to_bits(), r.ratio.to_bits());
                gamma = gamma.max(dh / d);
            } else {
                prop_assert!(r.ratio.is_nan());
            }
        }
        prop_assert!(gamma.to_bits() == back.gamma.to_bits() || (gamma.is_nan() && back.gamma.is_nan()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn low_rank_leaves_meet_their_bound(n in 64usize..400, exp in 2i32..11, n_min in 8usize..40) {
        let eps = 10f64.powi(-exp);
        let p = DiscreteProblem::log_kernel(n).unwrap();
        let t = Arc::new(ClusterTree::from_grid(&p.grid, n_min));
        let bct = BlockClusterTree::build(t.clone(), t.clone(), 1.0);
        let h = HMatrix::from_dense(p.k.as_ref(), &bct, eps).unwrap();
        let perm = h.row_indices();
        let kc = Mat::from_fn(n, n, |i, j| p.k[(perm[i], perm[j])]);
        let hd = h.to_dense();
        for leaf in h.root.leaves() {
            let (r0, c0, nr, nc) = (leaf.row_offset, leaf.col_offset, leaf.nrows, leaf.ncols);
            let exact = kc.submatrix(r0, c0, nr, nc);
            let diff = hd.submatrix(r0, c0, nr, nc) - exact;
            let s_exact = exact.singular_values().unwrap()[0];
            let s_diff = diff.singular_values().unwrap().first().copied().unwrap_or(0.0);
            match leaf.kind {
                LeafKind::LowRank => prop_assert!(s_diff <= eps * s_exact * (1.0 + 1e-8) + 1e-300),
                LeafKind::Full => prop_assert_eq!(diff.norm_max(), 0.0),
            }
        }
        // permutation round trip
        let rel = (h.to_dense_original() - &p.k).norm_l2() / p.k.norm_l2();
        prop_assert!(rel <= 10.0 * eps);
    }
}

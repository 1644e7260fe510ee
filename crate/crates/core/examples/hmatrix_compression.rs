//! H-matrix approximation of the stiffness matrix and its block structure.
//!
//! `cargo run --release --example hmatrix_compression -- 2048 1e-6`

use std::sync::Arc;

use amls::hmatrix::{BlockClusterTree, ClusterTree, HMatrix};
use amls::mesh::DiscreteProblem;

fn main() -> amls::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2048);
    let eps: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1e-6);
    let p = DiscreteProblem::log_kernel(n)?;

    let tree = Arc::new(ClusterTree::from_grid(&p.grid, 32));
    let bct = BlockClusterTree::build(tree.clone(), tree.clone(), 1.0);
    let start = std::time::Instant::now();
    let k = HMatrix::from_dense(p.k.as_ref(), &bct, eps)?;
    println!("built in {:.2?}, cluster depth {}", start.elapsed(), tree.depth());

    let s = k.storage_stats();
    println!("{s:#?}");
    let err = (k.to_dense_original() - &p.k).norm_l2() / p.k.norm_l2();
    println!("relative Frobenius error {err:.3e}");

    // matvec works in cluster ordering
    let x: Vec<f64> = (0..n).map(|i| ((i * 7919) % 97) as f64 / 97.0).collect();
    let xp: Vec<f64> = k.col_indices().iter().map(|&i| x[i]).collect();
    let y = k.matvec(&xp);
    let yd = &p.k * faer::ColRef::from_slice(&x);
    let worst = k
        .row_indices()
        .iter()
        .enumerate()
        .map(|(pos, &i)| (y[pos] - yd[i]).abs())
        .fold(0.0, f64::max);
    println!("max matvec deviation {worst:.3e}");
    Ok(())
}

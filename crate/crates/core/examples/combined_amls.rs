//! Combined dense AMLS: the union of both single-split subspaces.
//!
//! `cargo run --release --example combined_amls`

use amls::combined::{combined_dense_amls_solve, combined_subspace};
use amls::dense::direct_eigenpairs;
use amls::dense_amls::AmlsConfig;
use amls::mesh::DiscreteProblem;

fn main() -> amls::Result<()> {
    let p = DiscreteProblem::log_kernel(200)?;
    let config = AmlsConfig::fixed(5, 5, 20);

    let sub = combined_subspace(&p, 0.5, &config)?;
    println!(
        "raw columns {} + {}, kept {}, dropped {}",
        sub.cols_a,
        sub.cols_b,
        sub.basis.q.ncols(),
        sub.dropped()
    );

    let ritz = combined_dense_amls_solve(&p, 0.5, &config)?;
    let direct = direct_eigenpairs(p.k.as_ref(), p.m.as_ref(), 20)?;
    for (j, (a, d)) in ritz.values.iter().zip(&direct.values).enumerate() {
        println!("{:>3} {a:>14.6e} {d:>14.6e} {:>10.2e}", j + 1, ((a - d) / d).abs());
    }

    // eigenvector agreement in the M inner product (M = h I)
    let h = p.grid.h;
    for j in 0..5 {
        let dot: f64 = (0..p.dim()).map(|i| ritz.vectors[(i, j)] * direct.vectors[(i, j)] * h).sum();
        println!("|cos| of vector {}: {:.6}", j + 1, dot.abs());
    }
    Ok(())
}

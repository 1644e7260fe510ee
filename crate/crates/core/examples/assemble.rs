//! Assembles the log-kernel pencil and inspects its structure.
//!
//! `cargo run --example assemble -- 8`

use amls::dense::eigenvalues_by_magnitude;
use amls::mesh::{build_grid, DiscreteProblem, KernelSpec};

fn main() -> amls::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let p = DiscreteProblem::log_kernel(n)?;
    println!("N = {n}, h = {}", p.grid.h);
    println!("M = h * I, diagonal entry {:.6e}", p.m[(0, 0)]);

    // translation invariance of the kernel makes K a symmetric Toeplitz matrix
    println!("first row of K:");
    for j in 0..n.min(8) {
        println!("  K[0][{j}] = {:+.12e}", p.k[(0, j)]);
    }
    let toeplitz = (1..n).all(|i| (0..n - i).all(|j| p.k[(i + j, j)] == p.k[(i, 0)]));
    println!("Toeplitz: {toeplitz}");

    let values = eigenvalues_by_magnitude(p.k.as_ref(), p.m.as_ref())?;
    println!("eigenvalues by magnitude: {:?}", &values[..values.len().min(5)]);

    // any kernel can be integrated by adaptive quadrature
    let smooth = DiscreteProblem::assemble(build_grid(0.0, 1.0, n)?, &KernelSpec::custom(|x, y| (-(x - y).powi(2)).exp()))?;
    println!("Gaussian kernel, K[0][0] = {:.12e}", smooth.k[(0, 0)]);
    Ok(())
}

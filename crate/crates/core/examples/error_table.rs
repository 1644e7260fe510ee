//! Relative error table of combined AMLS against a fine reference mesh.
//!
//! `cargo run --release --example error_table -- 5000`
//! The reference eigenvalues are cached under `$AMLS_CACHE_DIR` (default
//! `./cache`).

use amls::bench::{compute_reference, format_table, make_error_report, ReferenceCache};
use amls::combined::combined_dense_amls_solve;
use amls::dense::eigenvalues_by_magnitude;
use amls::dense_amls::AmlsConfig;
use amls::mesh::DiscreteProblem;

fn main() -> amls::Result<()> {
    let n_ref: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let p = DiscreteProblem::log_kernel(200)?;
    let ritz = combined_dense_amls_solve(&p, 0.5, &AmlsConfig::fixed(5, 5, 20))?;
    let discrete = eigenvalues_by_magnitude(p.k.as_ref(), p.m.as_ref())?;
    let reference = compute_reference(n_ref, 20, &ReferenceCache::from_env())?;
    let report = make_error_report(&ritz.values, &discrete, &reference, 20)?;
    print!("{}", format_table(&report, Some(12)));
    Ok(())
}

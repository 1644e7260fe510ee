//! Writes the leading eigenfunctions as CSV files.
//!
//! `cargo run --release --example eigenfunctions -- out_dir`

use std::io::Write;

use amls::bench::{eigenfunction_samples, write_eigenfunction_csv};
use amls::combined::combined_dense_amls_solve;
use amls::dense_amls::AmlsConfig;
use amls::mesh::DiscreteProblem;

fn main() -> amls::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "eigenfunctions".into());
    std::fs::create_dir_all(&dir)?;
    let p = DiscreteProblem::log_kernel(200)?;
    let ritz = combined_dense_amls_solve(&p, 0.5, &AmlsConfig::fixed(5, 5, 5))?;
    for j in 0..5 {
        let samples = eigenfunction_samples(&p.grid, ritz.vectors.as_ref(), j)?;
        let sign_changes = samples.windows(2).filter(|w| w[0].1 * w[1].1 < 0.0).count();
        let path = format!("{dir}/eigenfunction_{:02}.csv", j + 1);
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        write_eigenfunction_csv(&mut f, &samples)?;
        f.flush()?;
        println!("{path}: lambda = {:.6e}, {sign_changes} sign changes", ritz.values[j]);
    }
    Ok(())
}

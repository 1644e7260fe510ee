//! Wall time and accuracy of the solvers as N grows.
//!
//! `cargo run --release --example scaling`

use std::time::Instant;

use amls::bench::{run_method, Method};
use amls::dense_amls::{AmlsConfig, Orientation};
use amls::hamls::h_pencil;
use amls::mesh::DiscreteProblem;

fn main() -> amls::Result<()> {
    println!(
        "{:>6} {:>10} {:>10} {:>10} {:>8} {:>10} {:>10}",
        "N", "direct s", "combined s", "hamls s", "depth", "H ratio", "rel. err"
    );
    for n in [256, 512, 1024, 2048] {
        let p = DiscreteProblem::log_kernel(n)?;
        let config = AmlsConfig {
            n_es: 5,
            ..AmlsConfig::default()
        };
        let mut times = Vec::new();
        let mut results = Vec::new();
        for method in [Method::Direct, Method::Combined, Method::Hamls] {
            let start = Instant::now();
            results.push(run_method(&p, method, 0.5, Orientation::Omega1First, &config)?);
            times.push(start.elapsed().as_secs_f64());
        }
        let (kh, _) = h_pencil(&p, &config)?;
        let err = results[2]
            .pairs
            .values
            .iter()
            .zip(&results[0].pairs.values)
            .map(|(a, d)| ((a - d) / d).abs())
            .fold(0.0, f64::max);
        println!(
            "{n:>6} {:>10.3} {:>10.3} {:>10.3} {:>8} {:>10.3} {:>10.2e}",
            times[0],
            times[1],
            times[2],
            results[2].recursion_depth,
            kh.storage_stats().compression_ratio,
            err
        );
    }
    Ok(())
}

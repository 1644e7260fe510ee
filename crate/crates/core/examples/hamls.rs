//! Recursive AMLS on H-matrices with a per-level trace.
//!
//! `cargo run --release --example hamls -- 1024`

use amls::dense::direct_eigenpairs;
use amls::dense_amls::{AmlsConfig, KRule};
use amls::hamls::hamls_solve_problem;
use amls::mesh::DiscreteProblem;

fn main() -> amls::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1024);
    let p = DiscreteProblem::log_kernel(n)?;
    let direct = direct_eigenpairs(p.k.as_ref(), p.m.as_ref(), 10)?;

    for (name, rule) in [
        ("power rule", KRule::Power { c: 2.0, beta: 1.0 / 3.0 }),
        ("power rule, c = 8", KRule::Power { c: 8.0, beta: 1.0 / 3.0 }),
        ("all modes", KRule::Full),
    ] {
        let config = AmlsConfig {
            k_rule: rule,
            h_accuracy: 1e-10,
            ..AmlsConfig::default()
        };
        let start = std::time::Instant::now();
        let out = hamls_solve_problem(&p, &config)?;
        let worst = out
            .pairs
            .values
            .iter()
            .zip(&direct.values)
            .map(|(a, d)| ((a - d) / d).abs())
            .fold(0.0, f64::max);
        println!(
            "{name:>18}: depth {}, subspace {}, worst relative error {worst:.2e}, {:.2?}",
            out.recursion_depth,
            out.pairs.subspace_dim,
            start.elapsed()
        );
        if matches!(rule, KRule::Power { c, .. } if c == 2.0) {
            // every split spawns four child solves, so level d holds 4^d records
            for depth in 0..out.recursion_depth {
                let level: Vec<_> = out.trace.iter().filter(|t| t.depth == depth).collect();
                let t = level[0];
                println!(
                    "    depth {depth}: {:>3} splits, N {:>5}, k = ({}, {}), columns {}",
                    level.len(),
                    t.n,
                    t.k1,
                    t.k2,
                    t.kbar
                );
            }
        }
    }
    Ok(())
}

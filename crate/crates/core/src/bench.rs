//! Error metrics, reference eigenvalues, report formats and file exports.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use faer::MatRef;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::combined::combined_dense_amls_solve;
use crate::dense::{direct_eigenpairs, eigenvalues_by_magnitude, RitzPairs};
use crate::dense_amls::{dense_amls_solve, partition_indices, AmlsConfig, Orientation};
use crate::error::{AmlsError, Result};
use crate::hamls::{hamls_solve_problem, LevelTrace};
use crate::mesh::{DiscreteProblem, Grid1D};

pub const DEFAULT_N: usize = 200;
pub const DEFAULT_SPLIT: f64 = 0.5;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_N_REF: usize = 5000;
pub const CACHE_ENV: &str = "AMLS_CACHE_DIR";

/// One row of an error table. `ratio` is NaN when `delta` is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub j: usize,
    pub lambda_hat: f64,
    pub lambda_h: f64,
    pub lambda_ref: f64,
    pub delta_hat: f64,
    pub delta: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub ratio: f64,
}

fn nan_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignCounts {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl SignCounts {
    pub fn of(values: &[f64]) -> Self {
        let mut s = SignCounts::default();
        for &v in values {
            match v.partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => s.positive += 1,
                Some(std::cmp::Ordering::Less) => s.negative += 1,
                _ => s.zero += 1,
            }
        }
        s
    }
}

/// Eigenvalue signs over the reported rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedSigns {
    pub approx: SignCounts,
    pub discrete: SignCounts,
    pub reference: SignCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    /// Largest ratio over all rows, ignoring undefined ratios.
    #[serde(deserialize_with = "nan_from_null")]
    pub gamma: f64,
    pub n_es: usize,
    pub signs: ObservedSigns,
}

impl ErrorReport {
    /// Largest ratio over the first `count` rows.
    pub fn gamma_upto(&self, count: usize) -> f64 {
        max_ratio(&self.rows[..count.min(self.rows.len())])
    }
}

fn max_ratio(rows: &[ErrorRow]) -> f64 {
    rows.iter()
        .map(|r| r.ratio)
        .filter(|r| !r.is_nan())
        .fold(f64::NAN, f64::max)
}

/// Relative errors of the method (`δ̂`) and of the discretisation (`δ`)
/// against the reference, matched by magnitude rank.
pub fn make_error_report(
    approx: &[f64],
    discrete: &[f64],
    reference: &[f64],
    n_es: usize,
) -> Result<ErrorReport> {
    let available = approx.len().min(discrete.len()).min(reference.len());
    if available < n_es {
        return Err(AmlsError::IndexShortfall {
            needed: n_es,
            available,
        });
    }
    let rows: Vec<ErrorRow> = (0..n_es)
        .map(|i| {
            let (lh, l, lr) = (approx[i], discrete[i], reference[i]);
            let delta_hat = (lr - lh).abs() / lr.abs();
            let delta = (lr - l).abs() / lr.abs();
            ErrorRow {
                j: i + 1,
                lambda_hat: lh,
                lambda_h: l,
                lambda_ref: lr,
                delta_hat,
                delta,
                ratio: if delta == 0.0 { f64::NAN } else { delta_hat / delta },
            }
        })
        .collect();
    let signs = ObservedSigns {
        approx: SignCounts::of(&approx[..n_es]),
        discrete: SignCounts::of(&discrete[..n_es]),
        reference: SignCounts::of(&reference[..n_es]),
    };
    Ok(ErrorReport {
        gamma: max_ratio(&rows),
        rows,
        n_es,
        signs,
    })
}

/// On-disk cache of reference eigenvalues.
#[derive(Debug, Clone)]
pub struct ReferenceCache {
    dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct CachedReference {
    kernel: String,
    n_ref: usize,
    values: Vec<f64>,
}

impl ReferenceCache {
    /// `$AMLS_CACHE_DIR`, else `./cache`.
    pub fn from_env() -> Self {
        let dir = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("cache"));
        Self { dir: Some(dir) }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
        }
    }

    pub fn disabled() -> Self {
        Self { dir: None }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path_for(&self, kernel: &str, n_ref: usize) -> Option<PathBuf> {
        let digest = Sha256::digest(format!("reference-eigenvalues/v1/{kernel}/{n_ref}").as_bytes());
        let hex: String = digest.iter().take(12).map(|b| format!("{b:02x}")).collect();
        self.dir.as_ref().map(|d| d.join(format!("ref-{hex}.json")))
    }

    fn load(&self, kernel: &str, n_ref: usize) -> Option<Vec<f64>> {
        let path = self.path_for(kernel, n_ref)?;
        let text = std::fs::read_to_string(&path).ok()?;
        match serde_json::from_str::<CachedReference>(&text) {
            Ok(c) if c.kernel == kernel && c.n_ref == n_ref => Some(c.values),
            _ => {
                log::warn!("ignoring unreadable cache entry {}", path.display());
                None
            }
        }
    }

    fn store(&self, kernel: &str, n_ref: usize, values: &[f64]) -> Result<()> {
        let Some(path) = self.path_for(kernel, n_ref) else {
            return Ok(());
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let entry = CachedReference {
            kernel: kernel.to_string(),
            n_ref,
            values: values.to_vec(),
        };
        // write-then-rename keeps concurrent readers from seeing partial files
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, serde_json::to_vec(&entry)?)?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }
}

/// The `count` largest-magnitude eigenvalues of the log-kernel problem with
/// `n_ref` cells.
pub fn compute_reference(n_ref: usize, count: usize, cache: &ReferenceCache) -> Result<Vec<f64>> {
    const KERNEL: &str = "log";
    if count > n_ref {
        return Err(AmlsError::IndexShortfall {
            needed: count,
            available: n_ref,
        });
    }
    if let Some(values) = cache.load(KERNEL, n_ref) {
        if values.len() >= count {
            return Ok(values[..count].to_vec());
        }
    }
    log::info!("computing reference eigenvalues with {n_ref} cells");
    let problem = DiscreteProblem::log_kernel(n_ref)?;
    let values = eigenvalues_by_magnitude(problem.k.as_ref(), problem.m.as_ref())?;
    if let Err(e) = cache.store(KERNEL, n_ref, &values) {
        log::warn!("could not write the reference cache: {e}");
    }
    Ok(values[..count].to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    /// Dense AMLS with one subdomain ordering.
    Amls,
    /// Combined dense AMLS over both orderings.
    Combined,
    /// Recursive AMLS on H-matrices.
    Hamls,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Amls => "amls",
            Method::Combined => "combined",
            Method::Hamls => "hamls",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub pairs: RitzPairs,
    pub trace: Vec<LevelTrace>,
    pub recursion_depth: usize,
}

/// Runs one solver on an assembled problem.
pub fn run_method(
    problem: &DiscreteProblem,
    method: Method,
    split: f64,
    orientation: Orientation,
    config: &AmlsConfig,
) -> Result<SolveOutcome> {
    let plain = |pairs| SolveOutcome {
        pairs,
        trace: Vec::new(),
        recursion_depth: 0,
    };
    Ok(match method {
        Method::Direct => {
            plain(direct_eigenpairs(problem.k.as_ref(), problem.m.as_ref(), config.n_es)?)
        }
        Method::Amls => {
            let part = partition_indices(&problem.grid, split, orientation)?;
            plain(dense_amls_solve(problem, &part, config)?)
        }
        Method::Combined => plain(combined_dense_amls_solve(problem, split, config)?),
        Method::Hamls => {
            let out = hamls_solve_problem(problem, config)?;
            SolveOutcome {
                pairs: out.pairs,
                trace: out.trace,
                recursion_depth: out.recursion_depth,
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub tool: String,
    pub version: String,
    /// Seconds since the Unix epoch; the only run-dependent field.
    pub timestamp: u64,
    pub method: Method,
    pub kernel: String,
    pub n: usize,
    pub n_ref: usize,
    pub h: f64,
    pub h0: f64,
    pub split: f64,
    pub orientation: Orientation,
    pub subspace_dim: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub assemble: f64,
    pub reference: f64,
    pub discrete: f64,
    pub solve: f64,
}

/// Machine-readable benchmark report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub meta: ReportMeta,
    pub config: AmlsConfig,
    pub rows: Vec<ErrorRow>,
    #[serde(deserialize_with = "nan_from_null")]
    pub gamma: f64,
    pub signs: ObservedSigns,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<Timings>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<LevelTrace>,
}

impl BenchReport {
    pub fn error_report(&self) -> ErrorReport {
        ErrorReport {
            rows: self.rows.clone(),
            gamma: self.gamma,
            n_es: self.rows.len(),
            signs: self.signs,
        }
    }
}

pub fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn sci(v: f64) -> String {
    if v.is_nan() {
        "-".to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Fixed-width table with columns `j, λ̂, λ_h, λ_ref, δ̂, δ, δ̂/δ`. A rule is
/// drawn below row `mark` when given.
pub fn format_table(report: &ErrorReport, mark: Option<usize>) -> String {
    let mut out = String::new();
    let header = format!(
        "{:>4} | {:>12} {:>12} {:>12} | {:>10} {:>10} {:>10}",
        "j", "lambda_hat", "lambda_h", "lambda_ref", "delta_hat", "delta", "ratio"
    );
    let rule = "-".repeat(header.len());
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{rule}");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:>4} | {:>12.5e} {:>12.5e} {:>12.5e} | {:>10} {:>10} {:>10}",
            r.j,
            r.lambda_hat,
            r.lambda_h,
            r.lambda_ref,
            sci(r.delta_hat),
            sci(r.delta),
            sci(r.ratio)
        );
        if Some(r.j) == mark {
            let _ = writeln!(out, "{rule}");
        }
    }
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(out, "gamma over {} rows: {}", report.rows.len(), sci(report.gamma));
    if let Some(m) = mark {
        let _ = writeln!(out, "gamma over {m} rows: {}", sci(report.gamma_upto(m)));
    }
    let s = report.signs.discrete;
    let _ = writeln!(
        out,
        "discrete eigenvalue signs: {} positive, {} negative, {} zero",
        s.positive, s.negative, s.zero
    );
    out
}

/// Dense matrix in Matrix Market array format (column-major).
pub fn write_matrix_market_array(w: &mut impl Write, a: MatRef<'_, f64>) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", a.nrows(), a.ncols())?;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            writeln!(w, "{:.16e}", a[(i, j)])?;
        }
    }
    Ok(())
}

/// Nonzero entries in Matrix Market coordinate format, 1-based.
pub fn write_matrix_market_coordinate(w: &mut impl Write, a: MatRef<'_, f64>) -> Result<()> {
    let mut entries = Vec::new();
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)] != 0.0 {
                entries.push((i + 1, j + 1, a[(i, j)]));
            }
        }
    }
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{i} {j} {v:.16e}")?;
    }
    Ok(())
}

/// `x,value` rows with 16 significant digits.
pub fn write_eigenfunction_csv(w: &mut impl Write, samples: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "x,value")?;
    for (x, v) in samples {
        writeln!(w, "{x:.15e},{v:.15e}")?;
    }
    Ok(())
}

/// Parses a file written by [`write_eigenfunction_csv`].
pub fn read_eigenfunction_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines();
    if lines.next() != Some("x,value") {
        return Err(AmlsError::Config("eigenfunction CSV must start with `x,value`".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let (x, v) = l
                .split_once(',')
                .ok_or_else(|| AmlsError::Config(format!("malformed CSV row `{l}`")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| AmlsError::Config(format!("malformed number `{s}`")))
            };
            Ok((parse(x)?, parse(v)?))
        })
        .collect()
}

/// Samples of column `j` of `vectors` on `grid`.
pub fn eigenfunction_samples(grid: &Grid1D, vectors: MatRef<'_, f64>, j: usize) -> Result<Vec<(f64, f64)>> {
    let coeffs: Vec<f64> = vectors.col(j).iter().copied().collect();
    crate::mesh::sample_eigenfunction(grid, &coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_approximation_has_unit_ratios() {
        let d = [-3.0, -2.0, -1.0];
        let r = [-3.1, -2.05, -1.01];
        let rep = make_error_report(&d, &d, &r, 3).unwrap();
        assert!(rep.rows.iter().all(|row| row.ratio == 1.0));
        assert_eq!(rep.gamma, 1.0);
        assert_eq!(rep.signs.discrete.negative, 3);
    }

    #[test]
    fn self_reference_gives_undefined_ratio() {
        let d = [-3.0, -2.0];
        let rep = make_error_report(&[-2.9, -1.9], &d, &d, 2).unwrap();
        assert!(rep.rows.iter().all(|r| r.delta == 0.0 && r.ratio.is_nan()));
        assert!(rep.gamma.is_nan());
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"ratio\":null"));
        let back: ErrorReport = serde_json::from_str(&json).unwrap();
        assert!(back.rows[0].ratio.is_nan());
    }

    #[test]
    fn shortfall_is_reported() {
        let e = make_error_report(&[1.0], &[1.0, 2.0], &[1.0, 2.0], 2).unwrap_err();
        assert!(matches!(e, AmlsError::IndexShortfall { needed: 2, available: 1 }));
    }

    #[test]
    fn gamma_prefix() {
        let rep = make_error_report(&[1.1, 2.5, 3.0], &[1.05, 2.1, 3.2], &[1.0, 2.0, 3.3], 3).unwrap();
        assert!(rep.gamma_upto(1) <= rep.gamma);
        assert_eq!(rep.gamma_upto(3), rep.gamma);
    }

    #[test]
    fn matrix_market_layouts() {
        let a = faer::mat![[1.0, 2.0], [3.0, 4.0]];
        let mut buf = Vec::new();
        write_matrix_market_array(&mut buf, a.as_ref()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "2 2");
        assert_eq!(lines[3].parse::<f64>().unwrap(), 3.0);
        let d = faer::mat![[0.5, 0.0], [0.0, 0.5]];
        let mut buf = Vec::new();
        write_matrix_market_coordinate(&mut buf, d.as_ref()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1) == Some("2 2 2"));
        assert!(text.contains("2 2 5.0000000000000000e-1"));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = vec![(0.0025, -1.234567890123456e-3), (0.0075, 1.0 / 3.0)];
        let mut buf = Vec::new();
        write_eigenfunction_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,value\n2.500000000000000e-3,"));
        assert_eq!(read_eigenfunction_csv(&text).unwrap(), s);
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReferenceCache::at(dir.path());
        let a = compute_reference(40, 5, &cache).unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let b = compute_reference(40, 5, &cache).unwrap();
        assert_eq!(a, b);
        let c = compute_reference(40, 5, &ReferenceCache::disabled()).unwrap();
        assert_eq!(a, c);
    }
}

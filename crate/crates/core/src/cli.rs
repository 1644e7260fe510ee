//! Command-line front end. Exit codes: 0 success, 1 usage or configuration
//! error, 2 numerical or I/O failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{
    compute_reference, eigenfunction_samples, format_table, make_error_report, run_method,
    unix_timestamp, write_eigenfunction_csv, write_matrix_market_array,
    write_matrix_market_coordinate, BenchReport, ErrorRow, Method, ObservedSigns, ReferenceCache,
    ReportMeta, Timings, DEFAULT_K, DEFAULT_N, DEFAULT_N_REF, DEFAULT_SPLIT,
};
use crate::dense::eigenvalues_by_magnitude;
use crate::dense_amls::{AmlsConfig, KRule, Orientation};
use crate::error::{AmlsError, Result};
use crate::hamls::LevelTrace;
use crate::hmatrix::{BlockClusterTree, ClusterTree, HMatrix, StorageStats};
use crate::mesh::DiscreteProblem;

/// Writes to stdout; a closed pipe (`amls ... | head`) ends output quietly.
fn emit(args: std::fmt::Arguments<'_>) -> Result<()> {
    match std::io::stdout().lock().write_fmt(args) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

macro_rules! out {
    ($($t:tt)*) => {
        emit(format_args!($($t)*))?
    };
}

macro_rules! outln {
    ($($t:tt)*) => {
        emit(format_args!("{}\n", format_args!($($t)*)))?
    };
}

#[derive(Parser, Debug)]
#[command(name = "amls", version, about = "Eigenvalues of a 1D log-kernel integral operator by AMLS")]
struct Cli {
    /// Worker threads for dense kernels and H-matrix compression.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Recompute reference eigenvalues instead of reading the cache.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Add wall-clock timings to JSON output.
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write K and M in Matrix Market format.
    Assemble {
        #[arg(long, default_value_t = DEFAULT_N)]
        n: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run one solver and report its eigenvalues.
    Solve(SolveArgs),
    /// Error tables against a fine reference discretisation.
    Bench {
        #[arg(value_enum)]
        table: Table,
        #[arg(long, default_value_t = DEFAULT_N)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_N_REF)]
        n_ref: usize,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        /// Write the JSON report here (`-` for stdout instead of the table).
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write sampled eigenfunctions as CSV files.
    ExportEigenfunctions {
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Storage and accuracy of the H-matrix approximation of K.
    HrefStats {
        #[arg(long, default_value_t = 2048)]
        n: usize,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long, default_value_t = 32)]
        nmin: usize,
        /// Write the block structure as JSON.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Table {
    /// Dense AMLS, one subdomain ordering, 10 eigenvalues.
    Table2,
    /// Combined dense AMLS, 20 eigenvalues.
    Table3,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    #[value(alias = "dense")]
    Direct,
    Amls,
    Combined,
    Hamls,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Direct => Method::Direct,
            MethodArg::Amls => Method::Amls,
            MethodArg::Combined => Method::Combined,
            MethodArg::Hamls => Method::Hamls,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OrientationArg {
    #[value(name = "omega1-first", alias = "1")]
    Omega1First,
    #[value(name = "omega2-first", alias = "2")]
    Omega2First,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SubRule {
    /// Same rule as the top level.
    Same,
    /// Every mode of recursive subproblems.
    Full,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "direct")]
    method: MethodArg,
    #[arg(long, default_value_t = DEFAULT_N)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SPLIT)]
    split: f64,
    /// Modes of both subproblems; shorthand for `--k1 K --k2 K`.
    #[arg(long, conflicts_with_all = ["k1", "k2", "c", "beta", "full"])]
    k: Option<usize>,
    #[arg(long, requires = "k2")]
    k1: Option<usize>,
    #[arg(long, requires = "k1")]
    k2: Option<usize>,
    /// Power-rule factor (`k_i = ceil(c * N_i^beta)`).
    #[arg(long, conflicts_with_all = ["k1", "full"])]
    c: Option<f64>,
    #[arg(long, conflicts_with_all = ["k1", "full"])]
    beta: Option<f64>,
    /// Keep every mode of every subproblem.
    #[arg(long, conflicts_with = "k1")]
    full: bool,
    #[arg(long, value_enum, default_value = "same")]
    sub_rule: SubRule,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    nmin: Option<usize>,
    #[arg(long)]
    recursion_threshold: Option<usize>,
    #[arg(long)]
    nes: Option<usize>,
    #[arg(long, value_enum, default_value = "omega1-first")]
    orientation: OrientationArg,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    solver: SolverArgs,
    /// Compare against a reference discretisation with this many cells.
    #[arg(long)]
    n_ref: Option<usize>,
    /// Include the per-level recursion trace.
    #[arg(long)]
    trace: bool,
    /// Write the JSON report here (`-` for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
}

impl SolverArgs {
    fn orientation(&self) -> Orientation {
        match self.orientation {
            OrientationArg::Omega1First => Orientation::Omega1First,
            OrientationArg::Omega2First => Orientation::Omega2First,
        }
    }

    fn config(&self) -> Result<AmlsConfig> {
        let mut cfg = AmlsConfig::default();
        if let Some(k) = self.k {
            cfg.k_rule = KRule::Fixed { k1: k, k2: k };
        } else if let (Some(k1), Some(k2)) = (self.k1, self.k2) {
            cfg.k_rule = KRule::Fixed { k1, k2 };
        } else if self.full {
            cfg.k_rule = KRule::Full;
        } else if let KRule::Power { c, beta } = &mut cfg.k_rule {
            *c = self.c.unwrap_or(*c);
            *beta = self.beta.unwrap_or(*beta);
        }
        if self.sub_rule == SubRule::Full {
            cfg.sub_k_rule = Some(KRule::Full);
        }
        cfg.h_accuracy = self.eps.unwrap_or(cfg.h_accuracy);
        cfg.eta = self.eta.unwrap_or(cfg.eta);
        cfg.n_min = self.nmin.unwrap_or(cfg.n_min);
        cfg.recursion_threshold = self.recursion_threshold.unwrap_or(cfg.recursion_threshold);
        cfg.n_es = self.nes.unwrap_or(cfg.n_es).min(self.n.max(1));
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs the command line `argv` (including the program name) and returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {} threads: {e}", cli.threads);
            return 2;
        }
    };
    faer::set_global_parallelism(if cli.threads <= 1 {
        faer::Par::Seq
    } else {
        faer::Par::rayon(cli.threads)
    });
    match pool.install(|| execute(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &AmlsError) -> i32 {
    match e {
        AmlsError::Config(_)
        | AmlsError::InvalidRange { .. }
        | AmlsError::InvalidSize { .. }
        | AmlsError::DegeneratePartition { .. }
        | AmlsError::IndexShortfall { .. } => 1,
        _ => 2,
    }
}

fn cache(cli: &Cli) -> ReferenceCache {
    if cli.no_cache {
        ReferenceCache::disabled()
    } else {
        ReferenceCache::from_env()
    }
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Assemble { n, out } => assemble(*n, out),
        Command::Solve(args) => solve(cli, args),
        Command::Bench {
            table,
            n,
            n_ref,
            k,
            json,
        } => bench(cli, *table, *n, *n_ref, *k, json.as_deref()),
        Command::ExportEigenfunctions { count, solver, out } => export(solver, *count, out),
        Command::HrefStats {
            n,
            eps,
            eta,
            nmin,
            dump,
            json,
        } => href_stats(cli, *n, *eps, *eta, *nmin, dump.as_deref(), json.as_deref()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Pretty JSON to `path`, or to stdout for `-`.
fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if path == Path::new("-") {
        out!("{text}");
    } else {
        create(path)?.write_all(text.as_bytes())?;
    }
    Ok(())
}

fn assemble(n: usize, out: &Path) -> Result<()> {
    let p = DiscreteProblem::log_kernel(n)?;
    std::fs::create_dir_all(out)?;
    let (kp, mp) = (out.join("K.mtx"), out.join("M.mtx"));
    let mut w = create(&kp)?;
    write_matrix_market_array(&mut w, p.k.as_ref())?;
    w.flush()?;
    let mut w = create(&mp)?;
    write_matrix_market_coordinate(&mut w, p.m.as_ref())?;
    w.flush()?;
    outln!("wrote {} and {}", kp.display(), mp.display());
    Ok(())
}

#[derive(Serialize)]
struct SolveReport {
    meta: ReportMeta,
    config: AmlsConfig,
    eigenvalues: Vec<f64>,
    recursion_depth: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows: Option<Vec<ErrorRow>>,
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "nan_as_null")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    signs: Option<ObservedSigns>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings: Option<Timings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<Vec<LevelTrace>>,
}

fn nan_as_null<S: serde::Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) if x.is_finite() => s.serialize_f64(*x),
        _ => s.serialize_none(),
    }
}

fn meta(method: Method, n: usize, n_ref: usize, split: f64, orientation: Orientation, dim: usize) -> ReportMeta {
    ReportMeta {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: unix_timestamp(),
        method,
        kernel: "log".to_string(),
        n,
        n_ref,
        h: 1.0 / n as f64,
        h0: 1.0 / n_ref as f64,
        split,
        orientation,
        subspace_dim: dim,
    }
}

fn solve(cli: &Cli, args: &SolveArgs) -> Result<()> {
    let s = &args.solver;
    let config = s.config()?;
    let method = Method::from(s.method);
    let mut t = Timings::default();
    let clock = Instant::now();
    let problem = DiscreteProblem::log_kernel(s.n)?;
    t.assemble = clock.elapsed().as_secs_f64();
    let clock = Instant::now();
    let out = run_method(&problem, method, s.split, s.orientation(), &config)?;
    t.solve = clock.elapsed().as_secs_f64();

    let mut report = SolveReport {
        meta: meta(method, s.n, args.n_ref.unwrap_or(s.n), s.split, s.orientation(), out.pairs.subspace_dim),
        config: config.clone(),
        eigenvalues: out.pairs.values.clone(),
        recursion_depth: out.recursion_depth,
        rows: None,
        gamma: None,
        signs: None,
        timings: None,
        trace: args.trace.then(|| out.trace.clone()),
    };
    if let Some(n_ref) = args.n_ref {
        let clock = Instant::now();
        let discrete = eigenvalues_by_magnitude(problem.k.as_ref(), problem.m.as_ref())?;
        t.discrete = clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        let reference = compute_reference(n_ref, config.n_es, &cache(cli))?;
        t.reference = clock.elapsed().as_secs_f64();
        let er = make_error_report(&out.pairs.values, &discrete, &reference, config.n_es)?;
        if args.json.as_deref() != Some(Path::new("-")) {
            out!("{}", format_table(&er, None));
        }
        report.rows = Some(er.rows);
        report.gamma = Some(er.gamma);
        report.signs = Some(er.signs);
    } else if args.json.as_deref() != Some(Path::new("-")) {
        outln!("{:>4}  {:>24}", "j", "eigenvalue");
        for (j, v) in out.pairs.values.iter().enumerate() {
            outln!("{:>4}  {:>24.16e}", j + 1, v);
        }
    }
    if cli.timings {
        report.timings = Some(t);
    }
    if let Some(path) = &args.json {
        write_json(path, &report)?;
    }
    Ok(())
}

fn bench(cli: &Cli, table: Table, n: usize, n_ref: usize, k: usize, json: Option<&Path>) -> Result<()> {
    if n_ref < n {
        return Err(AmlsError::Config(format!("reference size {n_ref} is below N = {n}")));
    }
    let (method, n_es, mark) = match table {
        Table::Table2 => (Method::Amls, 10, None),
        Table::Table3 => (Method::Combined, 20, Some(12)),
    };
    let orientation = Orientation::Omega1First;
    let config = AmlsConfig::fixed(k, k, n_es);
    config.validate()?;
    let mut t = Timings::default();

    let clock = Instant::now();
    let problem = DiscreteProblem::log_kernel(n)?;
    t.assemble = clock.elapsed().as_secs_f64();
    let clock = Instant::now();
    let out = run_method(&problem, method, DEFAULT_SPLIT, orientation, &config)?;
    t.solve = clock.elapsed().as_secs_f64();
    let clock = Instant::now();
    let discrete = eigenvalues_by_magnitude(problem.k.as_ref(), problem.m.as_ref())?;
    t.discrete = clock.elapsed().as_secs_f64();
    let clock = Instant::now();
    let reference = compute_reference(n_ref, n_es, &cache(cli))?;
    t.reference = clock.elapsed().as_secs_f64();

    let er = make_error_report(&out.pairs.values, &discrete, &reference, n_es)?;
    let to_stdout = json == Some(Path::new("-"));
    if !to_stdout {
        out!("{}", format_table(&er, mark));
    }
    let report = BenchReport {
        meta: meta(method, n, n_ref, DEFAULT_SPLIT, orientation, out.pairs.subspace_dim),
        config,
        rows: er.rows,
        gamma: er.gamma,
        signs: er.signs,
        timings: cli.timings.then_some(t),
        trace: Vec::new(),
    };
    if let Some(path) = json {
        write_json(path, &report)?;
    }
    Ok(())
}

fn export(s: &SolverArgs, count: usize, out: &Path) -> Result<()> {
    if count == 0 || count > s.n {
        return Err(AmlsError::Config(format!("--count must lie in [1, {}]", s.n)));
    }
    let mut config = s.config()?;
    config.n_es = config.n_es.max(count);
    let problem = DiscreteProblem::log_kernel(s.n)?;
    let res = run_method(&problem, s.method.into(), s.split, s.orientation(), &config)?;
    let available = res.pairs.vectors.ncols();
    if available < count {
        return Err(AmlsError::IndexShortfall {
            needed: count,
            available,
        });
    }
    std::fs::create_dir_all(out)?;
    for j in 0..count {
        let samples = eigenfunction_samples(&problem.grid, res.pairs.vectors.as_ref(), j)?;
        let path = out.join(format!("eigenfunction_{:02}.csv", j + 1));
        let mut w = create(&path)?;
        write_eigenfunction_csv(&mut w, &samples)?;
        w.flush()?;
        outln!("{}  lambda = {:.16e}", path.display(), res.pairs.values[j]);
    }
    Ok(())
}

#[derive(Serialize)]
struct HStats {
    n: usize,
    eps: f64,
    eta: f64,
    n_min: usize,
    cluster_depth: usize,
    #[serde(flatten)]
    storage: StorageStats,
    relative_frobenius_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    build_seconds: Option<f64>,
}

fn href_stats(
    cli: &Cli,
    n: usize,
    eps: f64,
    eta: f64,
    nmin: usize,
    dump: Option<&Path>,
    json: Option<&Path>,
) -> Result<()> {
    if !(eps > 0.0) || !(eta > 0.0) || nmin == 0 {
        return Err(AmlsError::Config("--eps and --eta must be positive, --nmin at least 1".into()));
    }
    let problem = DiscreteProblem::log_kernel(n)?;
    let clock = Instant::now();
    let tree = std::sync::Arc::new(ClusterTree::from_grid(&problem.grid, nmin));
    let bct = BlockClusterTree::build(tree.clone(), tree.clone(), eta);
    let kh = HMatrix::from_dense(problem.k.as_ref(), &bct, eps)?;
    let build = clock.elapsed().as_secs_f64();
    let err = (kh.to_dense_original() - &problem.k).norm_l2() / problem.k.norm_l2();
    let stats = HStats {
        n,
        eps,
        eta,
        n_min: nmin,
        cluster_depth: tree.depth(),
        storage: kh.storage_stats(),
        relative_frobenius_error: err,
        build_seconds: cli.timings.then_some(build),
    };
    if json != Some(Path::new("-")) {
        let s = &stats.storage;
        outln!("N                      {n}");
        outln!("eps / eta / n_min      {eps:e} / {eta} / {nmin}");
        outln!("cluster tree depth     {}", stats.cluster_depth);
        outln!("leaves (full / low)    {} / {}", s.full_leaves, s.low_rank_leaves);
        outln!("stored reals           {}", s.bytes_equivalent);
        outln!("compression ratio      {:.4}", s.compression_ratio);
        outln!("max rank               {}", s.max_rank);
        outln!("relative error (Frob)  {err:.3e}");
    }
    if let Some(path) = json {
        write_json(path, &stats)?;
    }
    if let Some(path) = dump {
        write_json(path, &kh.dump_json())?;
    }
    Ok(())
}

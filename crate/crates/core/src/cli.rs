//! Command-line front end: `eval`, `verify`, `embed` and `table`.
//!
//! Settings resolve as flags, then the TOML file given by `--config`, then
//! built-in defaults. Exit codes: 0 success, 1 failed check or numerical
//! failure, 2 bad arguments or configuration.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::kernels::{
    p_integral, p_series, q_eval_with, q_of_distance, q_t_spectral, q_tilde, EvalPolicy,
    QRepresentation,
};
use crate::rigidity::{isometry_report, select_base_points, EmbeddingKind};
use crate::su2::{haar_sample, HaarGrid, PairCoords};
use crate::verify::{run_suite, Status, SuiteConfig, SuiteName};

#[derive(Debug, Parser)]
#[command(name = "hopf-heat", version, about = "Heat kernels on SU(2) and the Hopf fibration")]
pub struct Cli {
    /// TOML file with defaults for seed, policy and thresholds.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one kernel value.
    Eval(EvalArgs),
    /// Run a verification suite and write its report.
    Verify(VerifyArgs),
    /// Build both embeddings on a Haar sample and write the coordinates.
    Embed(EmbedArgs),
    /// Tabulate a kernel on a grid as CSV.
    Table(TableArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kernel {
    /// Subelliptic kernel p_t(r, theta) on SU(2).
    P,
    /// The function q(t, x); give --x, or --delta for x = cos delta.
    Q,
    /// Round kernel q_t on S³.
    Qt,
    /// Quotient kernel on S², a function of r.
    Qtilde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Eigenfunction expansion (for q: the Chebyshev sum).
    Series,
    /// p: contour-shifted line integral; q and qt: Gaussian-side direct form.
    Integral,
    /// Whichever is better conditioned at this time.
    Auto,
}

/// Policy settings shared by the numerical commands.
#[derive(Debug, Clone, Args)]
pub struct PolicyArgs {
    /// Relative truncation tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Time below which the Gaussian-side forms are preferred.
    #[arg(long)]
    pub t_switch: Option<f64>,
    /// Gauss-Legendre nodes for line integrals.
    #[arg(long)]
    pub quad_nodes: Option<usize>,
    /// Integration half-width in units of sqrt(t).
    #[arg(long)]
    pub y_cut: Option<f64>,
    /// Nodes per axis of the Haar product quadrature.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub kernel: Kernel,
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, conflicts_with = "delta")]
    pub theta: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Argument of q; may exceed 1.
    #[arg(long, conflicts_with_all = ["delta", "r", "theta"])]
    pub x: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: Method,
    #[command(flatten)]
    pub policy: PolicyArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub suite: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Main sample size of the suite.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of random pairs for pairwise checks.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Time for the small-time suite.
    #[arg(long)]
    pub t: Option<f64>,
    /// Comma-separated `name=value` threshold overrides, keyed by check name.
    #[arg(long)]
    pub tol_overrides: Option<String>,
    /// JSON report path; the report goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional CSV of per-check residuals.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub policy: PolicyArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random pairs for the isometry check.
    #[arg(long, default_value_t = 10_000)]
    pub pairs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct TableArgs {
    #[arg(long, value_enum)]
    pub kernel: Kernel,
    /// Comma-separated values or `start:stop:count`.
    #[arg(long, allow_hyphen_values = true)]
    pub t_grid: String,
    #[arg(long, allow_hyphen_values = true)]
    pub r_grid: String,
    #[arg(long, allow_hyphen_values = true, default_value = "0")]
    pub theta_grid: String,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: Method,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub policy: PolicyArgs,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub policy: EvalPolicy,
    pub thresholds: BTreeMap<String, f64>,
    pub verify: VerifyFile,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyFile {
    pub n: Option<usize>,
    pub pairs: Option<usize>,
    pub t: Option<f64>,
}

pub fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn resolve_policy(base: EvalPolicy, args: &PolicyArgs) -> Result<EvalPolicy> {
    let mut p = base;
    if let Some(v) = args.tol {
        p.tol = v;
    }
    if let Some(v) = args.t_switch {
        p.t_switch = v;
    }
    if let Some(v) = args.quad_nodes {
        p.quad_nodes = v;
    }
    if let Some(v) = args.y_cut {
        p.y_cut = v;
    }
    if let Some(v) = args.grid {
        p.haar_grid = HaarGrid::cube(v);
    }
    p.validate()?;
    Ok(p)
}

fn require_seed(flag: Option<u64>, file: &FileConfig) -> Result<u64> {
    flag.or(file.seed)
        .ok_or_else(|| Error::Config("a seed is required: pass --seed or set seed in the config file".into()))
}

/// Parse `a,b,c` or `start:stop:count` (inclusive, evenly spaced).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::Config(format!("bad grid '{spec}': {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let out = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(bad("expected start:stop:count"));
        };
        let (a, b) = (num(a)?, num(b)?);
        let n: usize = n.trim().parse().map_err(|_| bad("count must be a positive integer"))?;
        match n {
            0 => return Err(bad("count must be positive")),
            1 => vec![a],
            _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
        }
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if out.is_empty() || out.iter().any(|v| !v.is_finite()) {
        return Err(bad("values must be finite and the grid nonempty"));
    }
    Ok(out)
}

/// `name=value,name=value`.
pub fn parse_overrides(spec: &str) -> Result<BTreeMap<String, f64>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{kv}' is not name=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("override '{kv}' has a non-numeric value")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

/// Write via a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error.to_string()))?;
    Ok(())
}

/// Below this time `--method auto` integrates rather than sums for `p`.
pub const P_SERIES_MIN_T: f64 = 0.05;

/// Kernel value and the name of the representation that produced it.
pub fn evaluate(
    kernel: Kernel,
    t: f64,
    coords: Coords,
    method: Method,
    policy: &EvalPolicy,
) -> Result<(f64, &'static str)> {
    let need = |v: Option<f64>, what: &str| {
        v.ok_or_else(|| Error::Domain(format!("kernel {kernel:?} needs --{what}")))
    };
    match kernel {
        Kernel::P => {
            let (r, theta) = (need(coords.r, "r")?, need(coords.theta, "theta")?);
            match method {
                Method::Series => Ok((p_series(t, r, theta, policy)?, "series")),
                Method::Integral => Ok((p_integral(t, r, theta, policy)?, "integral")),
                Method::Auto if t < P_SERIES_MIN_T => Ok((p_integral(t, r, theta, policy)?, "integral")),
                Method::Auto => match p_series(t, r, theta, policy) {
                    Err(Error::NonConvergence(_)) => Ok((p_integral(t, r, theta, policy)?, "integral")),
                    other => Ok((other?, "series")),
                },
            }
        }
        Kernel::Q => {
            let x = match (coords.x, coords.delta) {
                (Some(x), _) => x,
                (None, Some(d)) => d.cos(),
                _ => return Err(Error::Domain("kernel q needs --x or --delta".into())),
            };
            let repr = match method {
                Method::Series => QRepresentation::Dual,
                Method::Integral => QRepresentation::Direct,
                Method::Auto if t < policy.t_switch => QRepresentation::Direct,
                Method::Auto => QRepresentation::Dual,
            };
            let name = if repr == QRepresentation::Dual { "dual" } else { "direct" };
            Ok((q_eval_with(t, x, repr, policy)?, name))
        }
        Kernel::Qt => {
            let (delta, rt) = match (coords.delta, coords.r, coords.theta) {
                (Some(d), None, None) => (d, None),
                (None, Some(r), th) => {
                    let th = th.unwrap_or(0.0);
                    (PairCoords::from_r_theta(r, th).delta, Some((r, th)))
                }
                _ => return Err(Error::Domain("kernel qt needs --delta, or --r with --theta".into())),
            };
            let spectral = match method {
                Method::Series => true,
                Method::Integral => false,
                Method::Auto => t >= policy.t_switch,
            };
            if spectral {
                // along a fiber (r = 0) the distance is theta itself
                let (r, th) = rt.unwrap_or((0.0, delta));
                Ok((q_t_spectral(t, r, th, policy)?, "spectral"))
            } else {
                Ok((q_of_distance(t, delta, policy)?, "direct"))
            }
        }
        Kernel::Qtilde => Ok((q_tilde(t, need(coords.r, "r")?, policy)?, "series")),
    }
}

/// Optional point coordinates from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct Coords {
    pub r: Option<f64>,
    pub theta: Option<f64>,
    pub delta: Option<f64>,
    pub x: Option<f64>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Config(_) => 2,
        _ => 1,
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("hopf-heat: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let file = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Eval(a) => cmd_eval(a, &file),
        Command::Verify(a) => cmd_verify(a, &file),
        Command::Embed(a) => cmd_embed(a, &file),
        Command::Table(a) => cmd_table(a, &file),
    }
}

fn cmd_eval(a: EvalArgs, file: &FileConfig) -> Result<i32> {
    let policy = resolve_policy(file.policy, &a.policy)?;
    let coords = Coords {
        r: a.r,
        theta: a.theta,
        delta: a.delta,
        x: a.x,
    };
    let (value, method) = evaluate(a.kernel, a.t, coords, a.method, &policy)?;
    println!("{value:e} {method}");
    Ok(0)
}

fn cmd_verify(a: VerifyArgs, file: &FileConfig) -> Result<i32> {
    let suite: SuiteName = a.suite.parse()?;
    let seed = require_seed(a.seed, file)?;
    let mut config = SuiteConfig::new(suite, seed);
    config.policy = resolve_policy(file.policy, &a.policy)?;
    config.n = a.n.or(file.verify.n);
    config.pairs = a.pairs.or(file.verify.pairs);
    config.t = a.t.or(file.verify.t);
    // thresholds for other suites may share a config file; keep only ours
    config.thresholds = file
        .thresholds
        .iter()
        .filter(|(k, _)| suite.check_names().contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), *v))
        .collect();
    if let Some(spec) = &a.tol_overrides {
        config.thresholds.extend(parse_overrides(spec)?);
    }
    config.validate()?;
    let report = run_suite(&config)?;
    let text = report.to_json()?;
    match &a.out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => println!("{text}"),
    }
    if let Some(path) = &a.csv {
        write_atomic(path, report.to_csv()?.as_bytes())?;
    }
    for c in &report.checks {
        let status = match c.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Error => "ERROR",
        };
        let residual = c.residual.map_or_else(|| "-".to_string(), |r| format!("{r:.3e}"));
        eprintln!("{status:5} {:28} {residual:>10} (threshold {:.1e})", c.name, c.threshold);
        if let Some(m) = &c.message {
            eprintln!("      {m}");
        }
    }
    Ok(if report.passed() { 0 } else { 1 })
}

fn cmd_embed(a: EmbedArgs, file: &FileConfig) -> Result<i32> {
    let seed = require_seed(a.seed, file)?;
    if a.n < crate::rigidity::MIN_SAMPLE {
        return Err(Error::Config(format!(
            "embed needs --n >= {}, got {}",
            crate::rigidity::MIN_SAMPLE,
            a.n
        )));
    }
    let sample = haar_sample(a.n, seed)?;
    let m3 = select_base_points(EmbeddingKind::S3, &sample.points)?;
    let m2 = select_base_points(EmbeddingKind::S2, &sample.points)?;
    let e3 = m3.embed_all(&sample.points);
    let e2 = m2.embed_all(&sample.points);
    let points: Vec<_> = sample
        .points
        .iter()
        .zip(e3.iter().zip(&e2))
        .enumerate()
        .map(|(i, (p, (a3, a2)))| json!({"id": i, "quaternion": p.components(), "s3": a3, "s2": a2}))
        .collect();
    let out = json!({
        "schema": "hopf-heat/embed/v1",
        "seed": seed,
        "n": a.n,
        "s3_report": isometry_report(&m3, &sample.points, a.pairs, seed)?,
        "s2_report": isometry_report(&m2, &sample.points, a.pairs, seed)?,
        "points": points,
    });
    let text = serde_json::to_string_pretty(&out).map_err(|e| Error::Io(e.to_string()))?;
    write_atomic(&a.out, text.as_bytes())?;
    Ok(0)
}

/// CSV rows `t,r,theta,value,method` in lexicographic grid order.
pub fn kernel_table(
    kernel: Kernel,
    ts: &[f64],
    rs: &[f64],
    thetas: &[f64],
    method: Method,
    policy: &EvalPolicy,
) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["t", "r", "theta", "value", "method"]).map_err(io)?;
    for &t in ts {
        for &r in rs {
            for &theta in thetas {
                let coords = match kernel {
                    // the table's (r, theta) always name a pair of points
                    Kernel::Q => Coords {
                        delta: Some(PairCoords::from_r_theta(r, theta).delta),
                        ..Default::default()
                    },
                    _ => Coords {
                        r: Some(r),
                        theta: Some(theta),
                        ..Default::default()
                    },
                };
                let (v, m) = evaluate(kernel, t, coords, method, policy)?;
                w.write_record([
                    t.to_string(),
                    r.to_string(),
                    theta.to_string(),
                    format!("{v:e}"),
                    m.to_string(),
                ])
                .map_err(io)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn cmd_table(a: TableArgs, file: &FileConfig) -> Result<i32> {
    let policy = resolve_policy(file.policy, &a.policy)?;
    let ts = parse_grid(&a.t_grid)?;
    let rs = parse_grid(&a.r_grid)?;
    let thetas = parse_grid(&a.theta_grid)?;
    let csv = kernel_table(a.kernel, &ts, &rs, &thetas, a.method, &policy)?;
    write_atomic(&a.out, csv.as_bytes())?;
    Ok(0)
}

//! Named, seeded verification suites with machine-readable reports.
//!
//! Every check reports its residual and threshold whether it passes or not.
//! A check whose computation itself fails (non-convergence, conditioning) is
//! recorded as an error, which is distinct from a failed comparison.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::kernels::{
    convolution_check, eigen_residual, eigen_term, p_integral, p_integral_detailed, p_series,
    q_eval_with, q_ln_of_distance, q_of_distance, q_tilde, EvalPolicy, KernelKind,
    QRepresentation, SpectralIndex, SpectralSeries, SpectralWeight,
};
use crate::rigidity::{
    check_fiber_geodesic, check_submersion, coverage_gap, dot, gram_agreement, isometry_report,
    polyline_lengths, quotient_ball_volume, s3_ball_volume, select_base_points, sphere_angle,
    theta_fiber_average, volume_growth_fit, DirectionSchedule, EmbeddingKind, EmbeddingModel,
};
use crate::special_fn::{theta_sum_direct, theta_sum_dual};
use crate::su2::{
    haar_quadrature, haar_sample, hopf_project, mul, pair_coords, random_element, seeded_rng,
    GroupElement, HaarSample, PairCoords,
};

pub const REPORT_SCHEMA: &str = "hopf-heat/report/v1";

/// Grids shared by the representation and positivity checks.
pub const GRID_T: [f64; 4] = [0.1, 0.3, 1.0, 3.0];
pub const GRID_R: [f64; 4] = [0.0, 0.3, 0.7, 1.2];
pub const GRID_THETA: [f64; 4] = [0.0, 0.5, 1.5, 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteName {
    HeatKernelAxioms,
    CrossRepresentations,
    EigenStructure,
    SmallTime,
    VolumeGrowth,
    Rigidity,
    Submersion,
}

impl SuiteName {
    pub const ALL: [SuiteName; 7] = [
        SuiteName::HeatKernelAxioms,
        SuiteName::CrossRepresentations,
        SuiteName::EigenStructure,
        SuiteName::SmallTime,
        SuiteName::VolumeGrowth,
        SuiteName::Rigidity,
        SuiteName::Submersion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::HeatKernelAxioms => "heat-kernel-axioms",
            SuiteName::CrossRepresentations => "cross-representations",
            SuiteName::EigenStructure => "eigen-structure",
            SuiteName::SmallTime => "small-time",
            SuiteName::VolumeGrowth => "volume-growth",
            SuiteName::Rigidity => "rigidity",
            SuiteName::Submersion => "submersion",
        }
    }

    /// Names of the checks the suite runs, in report order.
    pub fn check_names(self) -> &'static [&'static str] {
        match self {
            SuiteName::HeatKernelAxioms => &[
                "positivity",
                "symmetry",
                "mass-p",
                "mass-qt",
                "mass-qtilde",
                "chapman-kolmogorov-p",
                "chapman-kolmogorov-qt",
                "chapman-kolmogorov-qtilde",
            ],
            SuiteName::CrossRepresentations => &[
                "p-series-vs-integral",
                "p-integral-imaginary",
                "qt-theta-vs-spectral",
                "theta-sum-dual",
                "q-direct-vs-dual",
                "convolution",
                "convolution-small-t",
                "qtilde-fiber-average",
            ],
            SuiteName::EigenStructure => &[
                "eigenvalues",
                "eigen-residual",
                "eigen-diagonal",
                "eigen-orthogonality",
                "large-time-limit",
            ],
            SuiteName::SmallTime => &["ldp", "direct-form-remainder", "p-integral-refinement"],
            SuiteName::VolumeGrowth => &["s3-slope", "quotient-slope"],
            SuiteName::Rigidity => &[
                "s3-min-gram-eigenvalue",
                "s2-min-gram-eigenvalue",
                "s3-unit-norm",
                "s2-unit-norm",
                "s3-inner-product",
                "s2-inner-product",
                "s3-isometry",
                "s2-isometry",
                "s3-seed-agreement",
                "s2-seed-agreement",
                "commuting-diagram",
                "hopf-consistency",
                "surjectivity",
            ],
            SuiteName::Submersion => &[
                "horizontal-length-ratio",
                "refinement-order",
                "single-step",
                "fiber-step-length",
                "fiber-step-projected",
                "fiber-geodesic",
                "theta-fiber-average",
            ],
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SuiteName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<_> = SuiteName::ALL.iter().map(|n| n.as_str()).collect();
                Error::Config(format!("unknown suite '{s}'; expected one of {}", known.join(", ")))
            })
    }
}

/// Everything that determines a suite run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub suite: SuiteName,
    pub seed: u64,
    /// Main sample size; its meaning and default depend on the suite.
    pub n: Option<usize>,
    /// Number of random pairs or points for pairwise checks.
    pub pairs: Option<usize>,
    /// Time for the small-time suite.
    pub t: Option<f64>,
    pub policy: EvalPolicy,
    /// Per-check threshold overrides, keyed by check name.
    pub thresholds: BTreeMap<String, f64>,
}

impl SuiteConfig {
    pub fn new(suite: SuiteName, seed: u64) -> Self {
        Self {
            suite,
            seed,
            n: None,
            pairs: None,
            t: None,
            policy: EvalPolicy::default(),
            thresholds: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        let names = self.suite.check_names();
        for (k, v) in &self.thresholds {
            if !names.contains(&k.as_str()) {
                return Err(Error::Config(format!(
                    "suite {} has no check named '{k}'; checks are {}",
                    self.suite,
                    names.join(", ")
                )));
            }
            if !(*v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("threshold for '{k}' must be positive, got {v}")));
            }
        }
        if let Some(t) = self.t {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("t must be positive, got {t}")));
            }
        }
        if self.pairs == Some(0) {
            return Err(Error::Config("pairs must be positive".into()));
        }
        let n_min = match self.suite {
            SuiteName::Rigidity | SuiteName::Submersion => crate::rigidity::MIN_SAMPLE,
            SuiteName::VolumeGrowth => 1000,
            _ => 1,
        };
        if let Some(n) = self.n {
            if n < n_min {
                return Err(Error::Config(format!(
                    "suite {} needs n >= {n_min}, got {n}",
                    self.suite
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

/// How a residual is compared with its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    /// Pass iff `residual <= threshold`.
    Le,
    /// Pass iff `residual >= threshold`.
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    /// `null` in JSON when the computation itself failed.
    pub residual: Option<f64>,
    pub threshold: f64,
    pub comparison: Comparison,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema: String,
    pub suite: SuiteName,
    pub seed: u64,
    pub status: Status,
    pub checks: Vec<Check>,
    pub runtime_seconds: f64,
    pub config: SuiteConfig,
    /// Suite-specific measurements (fits, embedding reports, tables).
    pub details: BTreeMap<String, Value>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// One row per check: `check,status,residual,threshold,comparison`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["check", "status", "residual", "threshold", "comparison"])
            .map_err(io)?;
        for c in &self.checks {
            let status = match c.status {
                Status::Pass => "pass",
                Status::Fail => "fail",
                Status::Error => "error",
            };
            let cmp = match c.comparison {
                Comparison::Le => "le",
                Comparison::Ge => "ge",
            };
            let residual = c.residual.map(|r| format!("{r:e}")).unwrap_or_default();
            w.write_record([c.name.as_str(), status, &residual, &format!("{:e}", c.threshold), cmp])
                .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

struct Runner<'a> {
    config: &'a SuiteConfig,
    checks: Vec<Check>,
    details: BTreeMap<String, Value>,
}

impl Runner<'_> {
    fn run(&mut self, name: &str, threshold: f64, cmp: Comparison, f: impl FnOnce() -> Result<f64>) {
        debug_assert!(self.config.suite.check_names().contains(&name), "{name}");
        let threshold = self.config.thresholds.get(name).copied().unwrap_or(threshold);
        let start = Instant::now();
        let outcome = f();
        let seconds = start.elapsed().as_secs_f64();
        let (status, residual, message) = match outcome {
            Ok(r) => {
                let ok = match cmp {
                    Comparison::Le => r <= threshold,
                    Comparison::Ge => r >= threshold,
                };
                (if ok { Status::Pass } else { Status::Fail }, Some(r), None)
            }
            Err(e) => (Status::Error, None, Some(e.to_string())),
        };
        self.checks.push(Check {
            name: name.to_string(),
            status,
            residual,
            threshold,
            comparison: cmp,
            seconds,
            message,
        });
    }

    fn le(&mut self, name: &str, threshold: f64, f: impl FnOnce() -> Result<f64>) {
        self.run(name, threshold, Comparison::Le, f)
    }

    fn ge(&mut self, name: &str, threshold: f64, f: impl FnOnce() -> Result<f64>) {
        self.run(name, threshold, Comparison::Ge, f)
    }

    fn detail(&mut self, key: &str, v: Value) {
        self.details.insert(key.to_string(), v);
    }
}

/// Execute one suite. Configuration problems are returned as errors before
/// anything is computed; everything else ends up in the report.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    config.validate()?;
    let start = Instant::now();
    let mut runner = Runner {
        config,
        checks: Vec::new(),
        details: BTreeMap::new(),
    };
    match config.suite {
        SuiteName::HeatKernelAxioms => heat_kernel_axioms(&mut runner),
        SuiteName::CrossRepresentations => cross_representations(&mut runner),
        SuiteName::EigenStructure => eigen_structure(&mut runner),
        SuiteName::SmallTime => small_time(&mut runner),
        SuiteName::VolumeGrowth => volume_growth(&mut runner),
        SuiteName::Rigidity => rigidity(&mut runner),
        SuiteName::Submersion => submersion(&mut runner),
    }
    let status = if runner.checks.iter().any(|c| c.status == Status::Error) {
        Status::Error
    } else if runner.checks.iter().any(|c| c.status == Status::Fail) {
        Status::Fail
    } else {
        Status::Pass
    };
    Ok(SuiteReport {
        schema: REPORT_SCHEMA.to_string(),
        suite: config.suite,
        seed: config.seed,
        status,
        checks: runner.checks,
        runtime_seconds: start.elapsed().as_secs_f64(),
        config: config.clone(),
        details: runner.details,
    })
}

fn random_points(n: usize, seed: u64) -> Vec<GroupElement> {
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| random_element(&mut rng)).collect()
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    // NaN must not be swallowed by f64::max
    values
        .into_iter()
        .fold(0.0, |a: f64, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) })
}

fn weighted_sum(values: &[f64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(v, w)| v * w).sum()
}

/// A kernel frozen at one time, with tables built once.
struct TimedKernel {
    kind: KernelKind,
    t: f64,
    series: Option<SpectralSeries>,
    policy: EvalPolicy,
}

impl TimedKernel {
    fn new(kind: KernelKind, t: f64, policy: &EvalPolicy) -> Result<Self> {
        let series = match kind {
            KernelKind::Qt => None,
            _ => Some(SpectralSeries::tabulated(t, SpectralWeight::Sub, policy)?),
        };
        Ok(Self {
            kind,
            t,
            series,
            policy: *policy,
        })
    }

    fn value(&self, c: &PairCoords) -> Result<f64> {
        match (&self.series, self.kind) {
            (Some(s), KernelKind::P) => s.eval(c.r, c.theta),
            (Some(s), _) => s.eval_fiber_average(c.r),
            (None, _) => q_of_distance(self.t, c.delta, &self.policy),
        }
    }

    /// `K(x, w)` for every quadrature point `w`.
    fn row(&self, x: &GroupElement, grid: &HaarSample) -> Result<Vec<f64>> {
        grid.points
            .par_iter()
            .map(|w| self.value(&pair_coords(x, w)))
            .collect()
    }
}

fn kernel_label(kind: KernelKind) -> &'static str {
    match kind {
        KernelKind::P => "p",
        KernelKind::Qt => "qt",
        KernelKind::QTilde => "qtilde",
    }
}

fn heat_kernel_axioms(run: &mut Runner) {
    let cfg = run.config;
    let policy = cfg.policy;
    let kinds = [KernelKind::P, KernelKind::Qt, KernelKind::QTilde];

    run.le("positivity", 0.0, || {
        let mut bad = 0usize;
        for &t in &GRID_T {
            for &r in &GRID_R {
                for &th in &GRID_THETA {
                    let c = PairCoords::from_r_theta(r, th);
                    for kind in kinds {
                        if !(kind.value(t, &c, &policy)? > 0.0) {
                            bad += 1;
                        }
                    }
                }
            }
        }
        Ok(bad as f64)
    });

    let pairs = cfg.pairs.unwrap_or(1000);
    run.le("symmetry", 1e-12, || {
        let pts = random_points(2 * pairs, cfg.seed);
        let mut worst = 0.0_f64;
        for kind in kinds {
            let k = TimedKernel::new(kind, 0.3, &policy)?;
            let res: Vec<f64> = pts
                .par_chunks(2)
                .map(|xy| {
                    let a = k.value(&pair_coords(&xy[0], &xy[1]))?;
                    let b = k.value(&pair_coords(&xy[1], &xy[0]))?;
                    Ok((a - b).abs() / a.abs())
                })
                .collect::<Result<_>>()?;
            worst = worst.max(max_of(res));
        }
        Ok(worst)
    });

    let grid = match haar_quadrature(policy.haar_grid) {
        Ok(g) => g,
        Err(e) => {
            for name in &cfg.suite.check_names()[2..] {
                run.le(name, 1.0, || Err(e.clone()));
            }
            return;
        }
    };
    let ck_times = [(0.3, 0.3), (0.5, 1.0)];
    let ck_pairs = 20;
    let pair_pts = random_points(2 * ck_pairs, cfg.seed.wrapping_add(1));
    let mut nonpositive = 0usize;

    let mut mass_table = Vec::new();
    let mut ck_table = Vec::new();
    for kind in kinds {
        let label = kernel_label(kind);
        // rows from the identity, reused for mass and as the first CK factor
        let mut rows: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        let mut row_at = |t: f64| -> Result<Vec<f64>> {
            if let Some(r) = rows.get(&t.to_bits()) {
                return Ok(r.clone());
            }
            let r = TimedKernel::new(kind, t, &policy)?.row(&GroupElement::IDENTITY, &grid)?;
            rows.insert(t.to_bits(), r.clone());
            Ok(r)
        };

        let mut mass_rows = Vec::new();
        run.le(&format!("mass-{label}"), 1e-6, || {
            let mut worst = 0.0_f64;
            for t in [0.3, 1.0] {
                let row = row_at(t)?;
                let m = weighted_sum(&row, &grid.weights);
                mass_rows.push(json!({"t": t, "mass": m}));
                worst = worst.max((m - 1.0).abs());
                nonpositive += row.iter().filter(|v| !(**v > 0.0)).count();
            }
            Ok(worst)
        });
        mass_table.push(json!({"kernel": label, "values": mass_rows}));

        let mut ck_rows = Vec::new();
        run.le(&format!("chapman-kolmogorov-{label}"), 1e-5, || {
            let mut worst = 0.0_f64;
            for &(s, t) in &ck_times {
                let first = row_at(s)?;
                let second = TimedKernel::new(kind, t, &policy)?;
                let total = TimedKernel::new(kind, s + t, &policy)?;
                for xy in pair_pts.chunks(2) {
                    // p_s * p_t (x, y) = int p_s(e, w) p_t(w, x^{-1} y) dw
                    let g = mul(&xy[0].inverse(), &xy[1]);
                    let row = second.row(&g, &grid)?;
                    let lhs: f64 = first
                        .iter()
                        .zip(&row)
                        .zip(&grid.weights)
                        .map(|((a, b), w)| a * b * w)
                        .sum();
                    let rhs = total.value(&pair_coords(&GroupElement::IDENTITY, &g))?;
                    let rel = (lhs - rhs).abs() / rhs.abs();
                    worst = worst.max(rel);
                    nonpositive += row.iter().filter(|v| !(**v > 0.0)).count();
                }
                ck_rows.push(json!({"s": s, "t": t, "worst_relative_residual": worst}));
            }
            Ok(worst)
        });
        ck_table.push(json!({"kernel": label, "values": ck_rows}));
    }
    run.detail("mass", Value::Array(mass_table));
    run.detail("chapman_kolmogorov", Value::Array(ck_table));
    run.detail("nonpositive_quadrature_values", json!(nonpositive));
    run.detail("quadrature_points", json!(grid.len()));
    // quadrature-row positivity is folded into the grid positivity check
    if let Some(c) = run.checks.iter_mut().find(|c| c.name == "positivity") {
        if let Some(r) = c.residual.as_mut() {
            *r += nonpositive as f64;
            if *r > c.threshold {
                c.status = Status::Fail;
            }
        }
    }
}

fn cross_representations(run: &mut Runner) {
    let cfg = run.config;
    let policy = cfg.policy;
    let seed = cfg.seed;

    let mut table = Vec::new();
    let mut imag = 0.0_f64;
    run.le("p-series-vs-integral", 1e-8, || {
        let mut worst = 0.0_f64;
        for &t in &GRID_T {
            for &r in &GRID_R {
                for &th in &GRID_THETA {
                    let a = p_series(t, r, th, &policy)?;
                    let b = p_integral_detailed(t, r, th, &policy)?;
                    let rel = (a - b.value).abs() / a.abs();
                    imag = imag.max(b.imag.abs() / b.value.abs().max(1.0));
                    worst = worst.max(rel);
                    table.push(json!({"t": t, "r": r, "theta": th, "series": a,
                                      "integral": b.value, "relative": rel}));
                }
            }
        }
        Ok(worst)
    });
    run.detail("series_vs_integral", Value::Array(table));
    run.le("p-integral-imaginary", 1e-10, || Ok(imag));

    let pairs = cfg.pairs.unwrap_or(100);
    run.le("qt-theta-vs-spectral", 1e-10, || {
        let pts = random_points(2 * pairs, seed);
        let mut worst = 0.0_f64;
        for t in [0.3, 0.8, 2.0] {
            let spectral = SpectralSeries::tabulated(t, SpectralWeight::Round, &policy)?;
            let res: Vec<f64> = pts
                .par_chunks(2)
                .map(|xy| {
                    let c = pair_coords(&xy[0], &xy[1]);
                    let a = q_of_distance(t, c.delta, &policy)?;
                    let b = spectral.eval(c.r, c.theta)?;
                    Ok((a - b).abs() / a.abs())
                })
                .collect::<Result<_>>()?;
            worst = worst.max(max_of(res));
        }
        Ok(worst)
    });

    let theta_grid = || {
        [0.05, 0.1, 0.5, 1.0, 5.0]
            .into_iter()
            .flat_map(|t| (0..32).map(move |i| (t, 0.1 * f64::from(i))))
    };
    run.le("theta-sum-dual", 1e-10, || {
        Ok(max_of(theta_grid().map(|(t, d)| {
            let a = theta_sum_direct(t, d);
            let b = theta_sum_dual(t, d);
            (a - b).abs() / (1.0 + a.abs())
        })))
    });
    run.le("q-direct-vs-dual", 1e-10, || {
        let mut worst = 0.0_f64;
        for (t, d) in theta_grid() {
            let x = d.cos();
            let a = q_eval_with(t, x, QRepresentation::Direct, &policy)?;
            let b = q_eval_with(t, x, QRepresentation::Dual, &policy)?;
            worst = worst.max((a - b).abs() / (1.0 + a.abs()));
        }
        Ok(worst)
    });

    let mut rng = seeded_rng(seed.wrapping_add(2));
    let conv_points: Vec<(f64, f64)> = (0..10)
        .map(|_| (rng.random_range(0.0..FRAC_PI_2), rng.random_range(0.0..PI)))
        .collect();
    let conv = |times: &[f64]| -> Result<f64> {
        let mut worst = 0.0_f64;
        for &t in times {
            for &(r, th) in &conv_points {
                worst = worst.max(convolution_check(t, r, th, &policy)?);
            }
        }
        Ok(worst)
    };
    run.le("convolution", 1e-8, || conv(&[0.5, 1.0]));
    run.le("convolution-small-t", 1e-6, || conv(&[0.1]));

    // the fiber average of the round kernel, a theta sum, against the
    // quotient series; the two share no code
    run.le("qtilde-fiber-average", 1e-10, || {
        let m = 32;
        let pts = random_points(2 * 10, seed.wrapping_add(3));
        let mut worst = 0.0_f64;
        for t in [0.3, 1.0] {
            for xy in pts.chunks(2) {
                let mut s = 0.0;
                for i in 0..m {
                    let xi = mul(&xy[0], &GroupElement::exp_z(2.0 * PI * i as f64 / m as f64));
                    for j in 0..m {
                        let yj = mul(&xy[1], &GroupElement::exp_z(2.0 * PI * j as f64 / m as f64));
                        s += q_of_distance(t, pair_coords(&xi, &yj).delta, &policy)?;
                    }
                }
                let avg = s / (m * m) as f64;
                let direct = q_tilde(t, pair_coords(&xy[0], &xy[1]).r, &policy)?;
                worst = worst.max((avg - direct).abs() / direct.abs());
            }
        }
        Ok(worst)
    });
}

/// Step for the finite-difference eigen check. Second differences of
/// eigenterms of size ~100 lose `eps * 100 / h^2` to rounding while the
/// truncation error grows like `h^2`; the two balance near this step.
pub const EIGEN_STEP: f64 = 6e-5;

/// Interior points for the finite-difference eigen checks.
const EIGEN_POINTS: [(f64, f64); 5] = [(0.3, 0.2), (0.5, 0.3), (0.7, 1.1), (0.9, 2.0), (1.2, 2.9)];

fn eigen_structure(run: &mut Runner) {
    let cfg = run.config;
    let policy = cfg.policy;
    let indices = |kmax: u32, nmax: i32| {
        (0..=kmax).flat_map(move |k| (0..=nmax).map(move |n| SpectralIndex::new(k, n)))
    };

    run.le("eigenvalues", 0.0, || {
        let got = [
            SpectralIndex::new(0, 1).lambda(),
            SpectralIndex::new(0, 1).lambda_prime(),
            SpectralIndex::new(1, 0).lambda_prime(),
            SpectralIndex::new(0, 0).lambda(),
        ];
        let want = [-2.0, -3.0, -8.0, 0.0];
        Ok(max_of(got.iter().zip(&want).map(|(a, b)| (a - b).abs())))
    });

    run.le("eigen-residual", 1e-5, || {
        let mut worst = 0.0_f64;
        for idx in indices(2, 3) {
            for &(r, th) in &EIGEN_POINTS {
                worst = worst.max(eigen_residual(idx, r, th, EIGEN_STEP)?);
            }
        }
        Ok(worst)
    });

    run.le("eigen-diagonal", 1e-12, || {
        let mut worst = 0.0_f64;
        for idx in indices(4, 4) {
            let want = if idx.n == 0 {
                f64::from(2 * idx.k + 1)
            } else {
                2.0 * idx.term_weight()
            };
            worst = worst.max((eigen_term(idx, 0.0, 0.0)? - want).abs());
        }
        Ok(worst)
    });

    run.le("eigen-orthogonality", 1e-6, || {
        let grid = haar_quadrature(policy.haar_grid)?;
        let idx: Vec<SpectralIndex> = indices(2, 2).collect();
        let pts = random_points(4, cfg.seed);
        let mut worst = 0.0_f64;
        for xy in pts.chunks(2) {
            let rows = |p: &GroupElement| -> Result<Vec<Vec<f64>>> {
                idx.iter()
                    .map(|&i| {
                        grid.points
                            .par_iter()
                            .map(|z| {
                                let c = pair_coords(p, z);
                                eigen_term(i, c.r, c.theta)
                            })
                            .collect()
                    })
                    .collect()
            };
            let rx = rows(&xy[0])?;
            let ry = rows(&xy[1])?;
            let c = pair_coords(&xy[0], &xy[1]);
            for (a, ra) in idx.iter().zip(&rx) {
                for (b, rb) in idx.iter().zip(&ry) {
                    let integral: f64 = ra
                        .iter()
                        .zip(rb)
                        .zip(&grid.weights)
                        .map(|((u, v), w)| u * v * w)
                        .sum();
                    let want = if a == b { eigen_term(*a, c.r, c.theta)? } else { 0.0 };
                    worst = worst.max((integral - want).abs());
                }
            }
        }
        Ok(worst)
    });

    run.le("large-time-limit", 1e-12, || {
        let mut worst = 0.0_f64;
        for &r in &GRID_R {
            for &th in &GRID_THETA {
                worst = worst.max((p_series(20.0, r, th, &policy)? - 1.0).abs());
            }
        }
        Ok(worst)
    });
}

/// Draw `count` random pairs whose distance lies in `[lo, hi]`: a random
/// point, then a second at a uniformly drawn distance in a random direction.
fn pairs_at_distance(count: usize, lo: f64, hi: f64, seed: u64) -> Vec<(GroupElement, GroupElement)> {
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|_| {
            let x = random_element(&mut rng);
            let d: f64 = rng.random_range(lo..=hi);
            let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let (s, c) = d.sin_cos();
            let step = GroupElement::new(c, s * v[0] / n, s * v[1] / n, s * v[2] / n)
                .expect("unit quaternion");
            (x, mul(&x, &step))
        })
        .collect()
}

fn small_time(run: &mut Runner) {
    let cfg = run.config;
    let policy = cfg.policy;
    let t = cfg.t.unwrap_or(1e-3);
    let pairs = cfg.pairs.unwrap_or(20);

    let mut table = Vec::new();
    run.le("ldp", 0.01, || {
        let mut worst = 0.0_f64;
        for (x, y) in pairs_at_distance(pairs, 0.2, 2.5, cfg.seed) {
            let d = pair_coords(&x, &y).delta;
            let lhs = -4.0 * t * q_ln_of_distance(t, d)?;
            let rel = (lhs - d * d).abs() / (d * d);
            worst = worst.max(rel);
            table.push(json!({"delta": d, "minus_4t_log_q": lhs, "relative": rel}));
        }
        Ok(worst)
    });
    run.detail("ldp_pairs", Value::Array(table));
    run.detail("t", json!(t));

    run.le("direct-form-remainder", 1e-12, || {
        let (t, d) = (0.01_f64, 0.8_f64);
        let lead = PI.sqrt() * t.exp() / (4.0 * t.powf(1.5)) * (d / d.sin()) * (-d * d / (4.0 * t)).exp();
        Ok((q_of_distance(t, d, &policy)? / lead - 1.0).abs())
    });

    run.le("p-integral-refinement", 1e-8, || {
        let fine = EvalPolicy {
            quad_nodes: 4 * policy.quad_nodes,
            ..policy
        };
        let a = p_integral(0.05, 0.1, 0.2, &policy)?;
        let b = p_integral(0.05, 0.1, 0.2, &fine)?;
        if !(a > 0.0) {
            return Err(Error::NonConvergence(format!("p_integral returned {a}")));
        }
        Ok((a - b).abs() / b)
    });
}

pub const VOLUME_CENTERS: usize = 16;

pub fn volume_radii() -> (Vec<f64>, Vec<f64>) {
    let s3 = (0..9).map(|i| 0.1 + 0.05 * f64::from(i)).collect();
    let quo = (0..9).map(|i| 0.05 + 0.025 * f64::from(i)).collect();
    (s3, quo)
}

fn volume_growth(run: &mut Runner) {
    let cfg = run.config;
    let n = cfg.n.unwrap_or(100_000);
    let fit = haar_sample(n, cfg.seed).and_then(|sample| {
        let centers = random_points(VOLUME_CENTERS, cfg.seed.wrapping_add(1));
        let (rs, rq) = volume_radii();
        volume_growth_fit(&sample, &centers, &rs, &rq)
    });
    match fit {
        Ok(f) => {
            let (rs, rq) = volume_radii();
            run.detail(
                "fit",
                json!({
                    "s3_radii": rs,
                    "quotient_radii": rq,
                    "s3_mass": f.s3_mass,
                    "quotient_mass": f.quotient_mass,
                    "s3_exact": rs.iter().map(|&r| s3_ball_volume(r)).collect::<Vec<_>>(),
                    "quotient_exact": rq.iter().map(|&r| quotient_ball_volume(r)).collect::<Vec<_>>(),
                    "s3_slope": f.s3_slope,
                    "quotient_slope": f.quotient_slope,
                    "samples": n,
                    "centers": VOLUME_CENTERS,
                }),
            );
            run.le("s3-slope", 0.1, || Ok((f.s3_slope - 3.0).abs()));
            run.le("quotient-slope", 0.1, || Ok((f.quotient_slope - 2.0).abs()));
        }
        Err(e) => {
            run.le("s3-slope", 0.1, || Err(e.clone()));
            run.le("quotient-slope", 0.1, || Err(e));
        }
    }
}

/// The two models on an `n`-point Haar sample.
fn build_models(n: usize, seed: u64) -> Result<(HaarSample, EmbeddingModel, EmbeddingModel)> {
    let sample = haar_sample(n, seed)?;
    let m3 = select_base_points(EmbeddingKind::S3, &sample.points)?;
    let m2 = select_base_points(EmbeddingKind::S2, &sample.points)?;
    Ok((sample, m3, m2))
}

/// Regression floor for the smallest Gram eigenvalue of a greedy model.
pub const GRAM_EIGENVALUE_FLOOR: f64 = 0.05;

fn rigidity(run: &mut Runner) {
    let cfg = run.config;
    let n = cfg.n.unwrap_or(500);
    let pairs = cfg.pairs.unwrap_or(10_000);
    let (sample, m3, m2) = match build_models(n, cfg.seed) {
        Ok(v) => v,
        Err(e) => {
            for name in cfg.suite.check_names() {
                run.le(name, 1.0, || Err(e.clone()));
            }
            return;
        }
    };
    let pts = &sample.points;
    run.ge("s3-min-gram-eigenvalue", GRAM_EIGENVALUE_FLOOR, || Ok(m3.min_eigenvalue));
    run.ge("s2-min-gram-eigenvalue", GRAM_EIGENVALUE_FLOOR, || Ok(m2.min_eigenvalue));

    for (model, name) in [(&m3, "s3-unit-norm"), (&m2, "s2-unit-norm")] {
        run.le(name, 1e-10, || {
            Ok(max_of(model.embed_all(pts).iter().map(|e| (dot(e, e).sqrt() - 1.0).abs())))
        });
    }

    let inner_pts = random_points(2 * pairs.min(1000), cfg.seed.wrapping_add(1));
    for (model, name) in [(&m3, "s3-inner-product"), (&m2, "s2-inner-product")] {
        run.le(name, 1e-10, || {
            Ok(max_of(inner_pts.chunks(2).map(|xy| {
                let c = pair_coords(&xy[0], &xy[1]);
                let want = match model.kind {
                    EmbeddingKind::S3 => c.r.cos() * c.theta.cos(),
                    EmbeddingKind::S2 => (2.0 * c.r).cos(),
                };
                (dot(&model.embed(&xy[0]), &model.embed(&xy[1])) - want).abs()
            })))
        });
    }

    let mut reports = BTreeMap::new();
    for (model, name, key) in [(&m3, "s3-isometry", "s3"), (&m2, "s2-isometry", "s2")] {
        run.le(name, 1e-9, || {
            let rep = isometry_report(model, pts, pairs, cfg.seed)?;
            let r = rep.max_isometry_residual;
            reports.insert(key, serde_json::to_value(&rep).map_err(|e| Error::Io(e.to_string()))?);
            Ok(r)
        });
    }
    run.detail("embedding_reports", json!(reports));

    let other = build_models(n, cfg.seed.wrapping_add(1));
    for (mine, name, pick) in [
        (&m3, "s3-seed-agreement", 0usize),
        (&m2, "s2-seed-agreement", 1usize),
    ] {
        run.le(name, 1e-9, || {
            let (_, o3, o2) = other.as_ref().map_err(Clone::clone)?;
            let theirs = if pick == 0 { o3 } else { o2 };
            Ok(gram_agreement(mine, theirs, pts))
        });
    }

    run.le("commuting-diagram", 1e-10, || {
        let mut rng = seeded_rng(cfg.seed.wrapping_add(2));
        let mut worst = 0.0_f64;
        for _ in 0..1000 {
            let x = random_element(&mut rng);
            let y = mul(&x, &GroupElement::exp_z(rng.random_range(0.0..2.0 * PI)));
            let (a, b) = (m2.embed(&x), m2.embed(&y));
            let d: f64 = a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum();
            worst = worst.max(d.sqrt());
        }
        Ok(worst)
    });

    run.le("hopf-consistency", 1e-10, || {
        let unit = |v: [f64; 3]| v.iter().map(|c| 2.0 * c).collect::<Vec<_>>();
        Ok(max_of(inner_pts.chunks(2).map(|xy| {
            let a = sphere_angle(&m2.embed(&xy[0]), &m2.embed(&xy[1]));
            let b = sphere_angle(&unit(hopf_project(&xy[0])), &unit(hopf_project(&xy[1])));
            (a - b).abs()
        })))
    });

    run.le("surjectivity", 0.1, || {
        let cloud = random_points(10_000, cfg.seed.wrapping_add(3));
        let embedded = m2.embed_all(&cloud);
        let mut rng = seeded_rng(cfg.seed.wrapping_add(4));
        let targets: Vec<Vec<f64>> = (0..1000)
            .map(|_| {
                let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
                let n = dot(&v, &v).sqrt();
                v.iter().map(|c| c / n).collect()
            })
            .collect();
        Ok(coverage_gap(&embedded, &targets))
    });
}

fn submersion(run: &mut Runner) {
    let cfg = run.config;
    let n = cfg.n.unwrap_or(500);
    let (_, m3, m2) = match build_models(n, cfg.seed) {
        Ok(v) => v,
        Err(e) => {
            for name in cfg.suite.check_names() {
                run.le(name, 1.0, || Err(e.clone()));
            }
            return;
        }
    };
    let curves = cfg.pairs.unwrap_or(4) as u64;
    let starts = random_points(curves as usize, cfg.seed.wrapping_add(1));

    let mut rows = Vec::new();
    let mut orders = Vec::new();
    run.le("horizontal-length-ratio", 1e-3, || {
        let mut worst = 0.0_f64;
        for (i, x) in starts.iter().enumerate() {
            let sched = DirectionSchedule::random(cfg.seed.wrapping_add(100 + i as u64));
            let coarse = check_submersion(&m3, &m2, x, &sched, 100, 1e-2)?;
            let fine = check_submersion(&m3, &m2, x, &sched, 200, 5e-3)?;
            worst = worst.max((coarse.ratio - 1.0).abs());
            orders.push(coarse.abs_error / fine.abs_error);
            rows.push(json!({"ratio": coarse.ratio, "error_h": coarse.abs_error,
                             "error_h_half": fine.abs_error}));
        }
        Ok(worst)
    });
    run.detail("polylines", Value::Array(rows));
    run.ge("refinement-order", 4.0, || {
        if orders.is_empty() {
            return Err(Error::NonConvergence("no polylines were measured".into()));
        }
        Ok(orders.iter().copied().fold(f64::INFINITY, f64::min))
    });

    run.le("single-step", 1e-6, || {
        let r = check_submersion(
            &m3,
            &m2,
            &GroupElement::IDENTITY,
            &DirectionSchedule::constant(0.0),
            1,
            1e-3,
        )?;
        Ok((r.ratio - 1.0).abs())
    });

    let h = 1e-3;
    let fiber_step: Vec<_> = starts
        .iter()
        .map(|x| polyline_lengths(&m3, &m2, &[*x, mul(x, &GroupElement::exp_z(h))]))
        .collect();
    run.le("fiber-step-length", 1e-12, || {
        let mut worst = 0.0_f64;
        for r in &fiber_step {
            worst = worst.max((r.as_ref().map_err(Clone::clone)?.s3_length - h).abs());
        }
        Ok(worst)
    });
    run.le("fiber-step-projected", 1e-10, || {
        let mut worst = 0.0_f64;
        for r in &fiber_step {
            worst = worst.max(r.as_ref().map_err(Clone::clone)?.s2_half_length);
        }
        Ok(worst)
    });

    run.le("fiber-geodesic", 1e-10, || {
        let mut worst = check_fiber_geodesic(&GroupElement::IDENTITY, 0.5)?;
        for x in &starts {
            worst = worst.max(check_fiber_geodesic(x, 2.0)?);
        }
        Ok(worst)
    });

    run.le("theta-fiber-average", 1e-10, || {
        let bases = random_points(starts.len(), cfg.seed.wrapping_add(2));
        let mut worst = 0.0_f64;
        for (x, b) in starts.iter().zip(&bases) {
            for n in 1..=4 {
                worst = worst.max(theta_fiber_average(x, b, n, 64).abs());
            }
        }
        Ok(worst)
    });
}

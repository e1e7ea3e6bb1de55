//! Reconstruction of the Hopf fibration from kernel data.
//!
//! The first nontrivial eigenterms of the two kernels are
//! `p_{0,1} = 4 cos theta cos r` on SU(2) and `p~_{1,0} = 3 cos 2r` on the
//! quotient. Pinning them at a few base points gives Gram matrices
//! `A = (cos theta cos r)(x_i, x_j)` and `B = (cos 2r)(x_i, x_j)`; with
//! `A = L L^T` the map `x -> L^{-1} c(x)` sends each point to a unit vector
//! and turns kernel values into Euclidean inner products, so the images are
//! round spheres S³ and S².

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{eigen_term, SpectralIndex};
use crate::su2::{mul, pair_coords, seeded_rng, GroupElement, HaarSample};

/// Smallest Gram eigenvalue accepted for a model.
pub const MIN_GRAM_EIGENVALUE: f64 = 1e-6;
/// Minimum sample size for base-point selection.
pub const MIN_SAMPLE: usize = 50;

/// Which eigenspace the embedding uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    /// Into S³ ⊂ R⁴, from `p_{0,1}`.
    S3,
    /// Into S² ⊂ R³, from `p~_{1,0}`; constant along fibers.
    S2,
}

impl EmbeddingKind {
    pub fn dim(self) -> usize {
        match self {
            EmbeddingKind::S3 => 4,
            EmbeddingKind::S2 => 3,
        }
    }

    /// Normalized eigenterm between two points: `cos theta cos r` or `cos 2r`.
    pub fn kernel(self, x: &GroupElement, y: &GroupElement) -> f64 {
        let c = pair_coords(x, y);
        let (idx, scale) = match self {
            EmbeddingKind::S3 => (SpectralIndex::new(0, 1), 4.0),
            EmbeddingKind::S2 => (SpectralIndex::new(1, 0), 3.0),
        };
        // cos 2r is always a valid Jacobi argument
        eigen_term(idx, c.r, c.theta).expect("argument in [-1, 1]") / scale
    }

    /// Distance the embedding is meant to reproduce: `delta` or `2r`.
    pub fn target_distance(self, x: &GroupElement, y: &GroupElement) -> f64 {
        let c = pair_coords(x, y);
        match self {
            EmbeddingKind::S3 => c.delta,
            EmbeddingKind::S2 => 2.0 * c.r,
        }
    }
}

/// Base points, their Gram matrix and its Cholesky factor.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    pub kind: EmbeddingKind,
    pub base_points: Vec<GroupElement>,
    /// Indices of the base points in the sample they were chosen from.
    pub base_ids: Vec<usize>,
    pub gram: DMatrix<f64>,
    /// Lower-triangular `L` with `gram = L L^T`.
    pub factor: DMatrix<f64>,
    pub min_eigenvalue: f64,
}

/// Greedy maximum-determinant choice of `kind.dim()` base points.
///
/// This is pivoted Cholesky: at each step the point with the largest residual
/// diagonal is taken, which maximizes the determinant of the running Gram
/// matrix. Ties go to the lowest index.
pub fn select_base_points(kind: EmbeddingKind, sample: &[GroupElement]) -> Result<EmbeddingModel> {
    if sample.len() < MIN_SAMPLE {
        return Err(Error::Domain(format!(
            "base-point selection needs at least {MIN_SAMPLE} points, got {}",
            sample.len()
        )));
    }
    let dim = kind.dim();
    let mut residual = vec![1.0; sample.len()];
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    let mut ids = Vec::with_capacity(dim);
    for _ in 0..dim {
        let (pivot, &d) = residual
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        if d <= 0.0 {
            return Err(Error::Conditioning(format!(
                "sample spans fewer than {dim} independent directions"
            )));
        }
        let root = d.sqrt();
        let xp = sample[pivot];
        let col: Vec<f64> = sample
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let prior: f64 = cols.iter().map(|c| c[i] * c[pivot]).sum();
                (kind.kernel(x, &xp) - prior) / root
            })
            .collect();
        for (r, l) in residual.iter_mut().zip(&col) {
            *r -= l * l;
        }
        residual[pivot] = 0.0;
        cols.push(col);
        ids.push(pivot);
    }
    model_from_points(kind, ids.iter().map(|&i| sample[i]).collect(), ids)
}

/// Model on explicitly given base points.
pub fn model_from_points(
    kind: EmbeddingKind,
    base_points: Vec<GroupElement>,
    base_ids: Vec<usize>,
) -> Result<EmbeddingModel> {
    let dim = kind.dim();
    if base_points.len() != dim {
        return Err(Error::Domain(format!(
            "{kind:?} embedding needs {dim} base points, got {}",
            base_points.len()
        )));
    }
    let gram = DMatrix::from_fn(dim, dim, |i, j| kind.kernel(&base_points[i], &base_points[j]));
    let min_eigenvalue = SymmetricEigen::new(gram.clone()).eigenvalues.min();
    if !(min_eigenvalue >= MIN_GRAM_EIGENVALUE) {
        return Err(Error::Conditioning(format!(
            "Gram matrix too close to singular: smallest eigenvalue {min_eigenvalue:e}"
        )));
    }
    let factor = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Conditioning("Gram matrix is not positive definite".into()))?
        .unpack();
    Ok(EmbeddingModel {
        kind,
        base_points,
        base_ids,
        gram,
        factor,
        min_eigenvalue,
    })
}

impl EmbeddingModel {
    /// `L^{-1} c(x)` with `c_j(x)` the kernel against base point `j`.
    pub fn embed(&self, x: &GroupElement) -> Vec<f64> {
        let c = DVector::from_iterator(
            self.base_points.len(),
            self.base_points.iter().map(|b| self.kind.kernel(x, b)),
        );
        self.factor
            .solve_lower_triangular(&c)
            .expect("factor has a positive diagonal")
            .iter()
            .copied()
            .collect()
    }

    pub fn embed_all(&self, xs: &[GroupElement]) -> Vec<Vec<f64>> {
        xs.par_iter().map(|x| self.embed(x)).collect()
    }
}

/// Angle between two unit vectors, `2 atan2(|a - b|, |a + b|)`; unlike
/// `arccos(a . b)` this keeps full relative accuracy for nearby vectors.
pub fn sphere_angle(a: &[f64], b: &[f64]) -> f64 {
    let (mut d2, mut s2) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        d2 += (x - y) * (x - y);
        s2 += (x + y) * (x + y);
    }
    2.0 * d2.sqrt().atan2(s2.sqrt())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One pair's isometry residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairResidual {
    pub i: usize,
    pub j: usize,
    pub residual: f64,
}

/// Summary of a rigidity run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub min_gram_eigenvalue: f64,
    pub max_isometry_residual: f64,
    pub base_point_ids: Vec<usize>,
    pub pairs_checked: usize,
    pub seed: u64,
    /// The largest per-pair residuals, worst first.
    pub worst_pairs: Vec<PairResidual>,
}

const WORST_PAIRS_KEPT: usize = 10;

/// Isometry residuals `|angle(emb x, emb y) - target(x, y)|` over `pairs`
/// random pairs drawn from `points`.
pub fn isometry_report(
    model: &EmbeddingModel,
    points: &[GroupElement],
    pairs: usize,
    seed: u64,
) -> Result<EmbeddingReport> {
    if points.len() < 2 {
        return Err(Error::Domain("isometry check needs at least two points".into()));
    }
    let mut rng = seeded_rng(seed);
    let idx: Vec<(usize, usize)> = (0..pairs)
        .map(|_| {
            let i = rng.random_range(0..points.len());
            let mut j = rng.random_range(0..points.len() - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect();
    let mut residuals: Vec<PairResidual> = idx
        .par_iter()
        .map(|&(i, j)| {
            let a = model.embed(&points[i]);
            let b = model.embed(&points[j]);
            let target = model.kind.target_distance(&points[i], &points[j]);
            PairResidual {
                i,
                j,
                residual: (sphere_angle(&a, &b) - target).abs(),
            }
        })
        .collect();
    let max = residuals.iter().map(|p| p.residual).fold(0.0, f64::max);
    residuals.sort_by(|a, b| b.residual.total_cmp(&a.residual));
    residuals.truncate(WORST_PAIRS_KEPT);
    Ok(EmbeddingReport {
        min_gram_eigenvalue: model.min_eigenvalue,
        max_isometry_residual: max,
        base_point_ids: model.base_ids.clone(),
        pairs_checked: pairs,
        seed,
        worst_pairs: residuals,
    })
}

/// Largest disagreement of `<emb(x), emb(y)>` between two models over all
/// pairs of `points`; zero up to rounding iff the models differ by an
/// orthogonal map on these points.
pub fn gram_agreement(a: &EmbeddingModel, b: &EmbeddingModel, points: &[GroupElement]) -> f64 {
    let ea = a.embed_all(points);
    let eb = b.embed_all(points);
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            (i..points.len())
                .map(|j| (dot(&ea[i], &ea[j]) - dot(&eb[i], &eb[j])).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// For each target direction, the angle to the nearest embedded point; the
/// maximum over targets measures how densely the images cover the sphere.
pub fn coverage_gap(embedded: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    targets
        .par_iter()
        .map(|t| {
            embedded
                .iter()
                .map(|e| sphere_angle(e, t))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

/// Smooth horizontal direction `phi(s)` as a short sum of sinusoids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSchedule {
    pub offset: f64,
    /// `(amplitude, frequency, phase)` triples.
    pub modes: Vec<(f64, f64, f64)>,
}

impl DirectionSchedule {
    pub fn constant(phi: f64) -> Self {
        Self {
            offset: phi,
            modes: Vec::new(),
        }
    }

    pub fn random(seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let offset = rng.random_range(0.0..std::f64::consts::TAU);
        let modes = (1..=3)
            .map(|m| {
                (
                    rng.random_range(-1.5..1.5) / f64::from(m),
                    rng.random_range(0.5..3.0) * f64::from(m),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        Self { offset, modes }
    }

    pub fn at(&self, s: f64) -> f64 {
        self.offset + self.modes.iter().map(|&(a, f, p)| a * (f * s + p).sin()).sum::<f64>()
    }
}

/// Substeps per polyline edge; the curve between vertices is itself built
/// from horizontal steps, so it is exactly horizontal at any resolution.
const SUBSTEPS: usize = 32;

/// Vertices, spaced `h` apart in arclength, of the horizontal curve through
/// `start` whose direction follows `schedule`.
pub fn horizontal_curve(
    start: &GroupElement,
    schedule: &DirectionSchedule,
    n_steps: usize,
    h: f64,
) -> Vec<GroupElement> {
    let dh = h / SUBSTEPS as f64;
    let mut x = *start;
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(x);
    for i in 0..n_steps {
        for j in 0..SUBSTEPS {
            let s = i as f64 * h + (j as f64 + 0.5) * dh;
            x = crate::su2::horizontal_step(&x, schedule.at(s), dh);
        }
        out.push(x);
    }
    out
}

/// Lengths of a polyline measured in the two embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubmersionReport {
    pub n_steps: usize,
    pub h: f64,
    /// Sum of chord angles in the S³ embedding.
    pub s3_length: f64,
    /// Half the sum of chord angles in the S² embedding.
    pub s2_half_length: f64,
    /// `s3_length / s2_half_length`.
    pub ratio: f64,
    /// `|s3_length - s2_half_length|`.
    pub abs_error: f64,
}

/// Length of the polyline `vertices` in both embeddings.
pub fn polyline_lengths(
    model3: &EmbeddingModel,
    model2: &EmbeddingModel,
    vertices: &[GroupElement],
) -> Result<SubmersionReport> {
    if model3.kind != EmbeddingKind::S3 || model2.kind != EmbeddingKind::S2 {
        return Err(Error::Domain("need an S3 model and an S2 model".into()));
    }
    if vertices.len() < 2 {
        return Err(Error::Domain("polyline needs at least two vertices".into()));
    }
    let e3 = model3.embed_all(vertices);
    let e2 = model2.embed_all(vertices);
    let s3: f64 = e3.windows(2).map(|w| sphere_angle(&w[0], &w[1])).sum();
    let s2: f64 = 0.5 * e2.windows(2).map(|w| sphere_angle(&w[0], &w[1])).sum::<f64>();
    let n_steps = vertices.len() - 1;
    let h = s3 / n_steps as f64;
    Ok(SubmersionReport {
        n_steps,
        h,
        s3_length: s3,
        s2_half_length: s2,
        ratio: s3 / s2,
        abs_error: (s3 - s2).abs(),
    })
}

/// Horizontal-length comparison along the curve from `start`.
pub fn check_submersion(
    model3: &EmbeddingModel,
    model2: &EmbeddingModel,
    start: &GroupElement,
    schedule: &DirectionSchedule,
    n_steps: usize,
    h: f64,
) -> Result<SubmersionReport> {
    if !(h > 0.0) || n_steps == 0 || n_steps as f64 * h >= std::f64::consts::PI {
        return Err(Error::Domain(format!(
            "need h > 0, n_steps > 0 and a curve shorter than pi (h = {h}, n = {n_steps})"
        )));
    }
    let vertices = horizontal_curve(start, schedule, n_steps, h);
    let mut rep = polyline_lengths(model3, model2, &vertices)?;
    rep.h = h;
    Ok(rep)
}

/// Max of `r(x, gamma(s))` over 100 interior points of the S³ great-circle
/// arc from `x` to `x exp(zZ)`.
pub fn check_fiber_geodesic(x: &GroupElement, z: f64) -> Result<f64> {
    if !(z > 0.0 && z < std::f64::consts::PI) {
        return Err(Error::Domain(format!("z must lie in (0, pi), got {z}")));
    }
    let y = mul(x, &GroupElement::exp_z(z));
    Ok((1..=100)
        .map(|i| {
            let s = f64::from(i) / 101.0;
            pair_coords(x, &slerp(x, &y, s)).r
        })
        .fold(0.0, f64::max))
}

/// Point at fraction `s` along the great-circle arc from `a` to `b` in R⁴.
pub fn slerp(a: &GroupElement, b: &GroupElement, s: f64) -> GroupElement {
    let pa = a.components();
    let pb = b.components();
    let omega = sphere_angle(&pa, &pb);
    let (wa, wb) = if omega < 1e-12 {
        (1.0 - s, s)
    } else {
        let so = omega.sin();
        (((1.0 - s) * omega).sin() / so, (s * omega).sin() / so)
    };
    let q: Vec<f64> = pa.iter().zip(&pb).map(|(u, v)| wa * u + wb * v).collect();
    GroupElement::new(q[0], q[1], q[2], q[3]).expect("nonzero combination")
}

/// `Theta_n = 2 (1/2pi) int cos(n theta(x, y exp(sZ))) ds` by the `m`-point
/// trapezoid rule, exact for `n < m`.
pub fn theta_fiber_average(x: &GroupElement, fiber_base: &GroupElement, n: u32, m: usize) -> f64 {
    let fiber = crate::su2::Fiber::through(*fiber_base);
    let s: f64 = fiber
        .points(m)
        .map(|y| (f64::from(n) * pair_coords(x, &y).theta).cos())
        .sum();
    2.0 * s / m as f64
}

/// Exact normalized Haar measure of a round ball of radius `rho` in S³.
pub fn s3_ball_volume(rho: f64) -> f64 {
    let rho = rho.clamp(0.0, std::f64::consts::PI);
    (rho - rho.sin() * rho.cos()) / std::f64::consts::PI
}

/// Exact measure of `{r < rho}`, a tube around a fiber.
pub fn quotient_ball_volume(rho: f64) -> f64 {
    let rho = rho.clamp(0.0, std::f64::consts::FRAC_PI_2);
    rho.sin().powi(2)
}

/// Ball masses and fitted log-log slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeFit {
    pub radii: Vec<f64>,
    /// Mean empirical mass of `delta`-balls over the centers.
    pub s3_mass: Vec<f64>,
    /// Mean empirical mass of `r`-balls over the centers.
    pub quotient_mass: Vec<f64>,
    pub s3_slope: f64,
    pub quotient_slope: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Empirical ball masses around each center, averaged over centers, and
/// their log-log slopes. Averaging over several centers cuts the Monte Carlo
/// noise of the smallest balls, which dominates a single-center fit.
pub fn volume_growth_fit(
    sample: &HaarSample,
    centers: &[GroupElement],
    s3_radii: &[f64],
    quotient_radii: &[f64],
) -> Result<VolumeFit> {
    if centers.is_empty() || s3_radii.len() < 2 || s3_radii.len() != quotient_radii.len() {
        return Err(Error::Domain(
            "need at least one center and two radii of each kind, in equal numbers".into(),
        ));
    }
    if s3_radii.iter().chain(quotient_radii).any(|&r| !(r > 0.0 && r <= 0.5)) {
        return Err(Error::Domain("radii must lie in (0, 0.5]".into()));
    }
    let k = s3_radii.len();
    let (s3, quo) = centers
        .par_iter()
        .map(|c| {
            let mut a = vec![0.0; k];
            let mut b = vec![0.0; k];
            for (x, w) in sample.points.iter().zip(&sample.weights) {
                let pc = pair_coords(c, x);
                for i in 0..k {
                    if pc.delta < s3_radii[i] {
                        a[i] += w;
                    }
                    if pc.r < quotient_radii[i] {
                        b[i] += w;
                    }
                }
            }
            (a, b)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((vec![0.0; k], vec![0.0; k]), |(mut sa, mut sb), (a, b)| {
            for i in 0..k {
                sa[i] += a[i];
                sb[i] += b[i];
            }
            (sa, sb)
        });
    let m = centers.len() as f64;
    let s3: Vec<f64> = s3.into_iter().map(|v| v / m).collect();
    let quo: Vec<f64> = quo.into_iter().map(|v| v / m).collect();
    if s3[0] <= 0.0 || quo[0] <= 0.0 {
        return Err(Error::Domain("smallest ball is empty; use more samples or larger radii".into()));
    }
    Ok(VolumeFit {
        radii: s3_radii.to_vec(),
        s3_slope: log_log_slope(s3_radii, &s3),
        quotient_slope: log_log_slope(quotient_radii, &quo),
        s3_mass: s3,
        quotient_mass: quo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::su2::{haar_sample, random_element};
    use std::f64::consts::PI;

    #[test]
    fn greedy_selection_gives_unit_diagonal() {
        let s = haar_sample(200, 3).unwrap();
        for kind in [EmbeddingKind::S3, EmbeddingKind::S2] {
            let m = select_base_points(kind, &s.points).unwrap();
            for i in 0..kind.dim() {
                assert!((m.gram[(i, i)] - 1.0).abs() < 1e-15);
            }
            assert!(m.min_eigenvalue > 0.05);
        }
    }

    #[test]
    fn embedding_is_unit_and_isometric() {
        let s = haar_sample(100, 11).unwrap();
        let m = select_base_points(EmbeddingKind::S3, &s.points).unwrap();
        let mut rng = seeded_rng(5);
        let x = random_element(&mut rng);
        let y = random_element(&mut rng);
        let ex = m.embed(&x);
        assert!((dot(&ex, &ex) - 1.0).abs() < 1e-12);
        let ey = m.embed(&y);
        let c = pair_coords(&x, &y);
        assert!((dot(&ex, &ey) - c.r.cos() * c.theta.cos()).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_or_degenerate_samples() {
        let s = haar_sample(10, 1).unwrap();
        assert!(matches!(
            select_base_points(EmbeddingKind::S3, &s.points),
            Err(Error::Domain(_))
        ));
        // one fiber only: every cos 2r is 1, rank one
        let f = crate::su2::Fiber::through(GroupElement::IDENTITY);
        let pts: Vec<_> = f.points(60).collect();
        assert!(matches!(
            select_base_points(EmbeddingKind::S2, &pts),
            Err(Error::Conditioning(_))
        ));
    }

    #[test]
    fn sphere_angle_small_and_large() {
        let a = [1.0, 0.0, 0.0];
        let b = [(1e-9_f64).cos(), (1e-9_f64).sin(), 0.0];
        assert!((sphere_angle(&a, &b) - 1e-9).abs() < 1e-22);
        assert!((sphere_angle(&a, &[-1.0, 0.0, 0.0]) - PI).abs() < 1e-15);
    }

    #[test]
    fn exact_cap_volumes() {
        assert!((s3_ball_volume(PI) - 1.0).abs() < 1e-15);
        assert!((quotient_ball_volume(PI / 2.0) - 1.0).abs() < 1e-15);
        // small balls: volume ~ (2/3pi) rho^3
        let r = 1e-3;
        assert!((s3_ball_volume(r) / (2.0 / (3.0 * PI) * r * r * r) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.1, 0.2, 0.3];
        let y: Vec<f64> = x.iter().map(|v: &f64| 5.0 * v.powi(3)).collect();
        assert!((log_log_slope(&x, &y) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fiber_geodesic_from_identity() {
        assert!(check_fiber_geodesic(&GroupElement::IDENTITY, 0.5).unwrap() < 1e-12);
        assert!(check_fiber_geodesic(&GroupElement::IDENTITY, PI).is_err());
    }

    #[test]
    fn direction_schedule_is_deterministic() {
        assert_eq!(DirectionSchedule::random(4), DirectionSchedule::random(4));
        assert_eq!(DirectionSchedule::constant(0.3).at(10.0), 0.3);
    }
}

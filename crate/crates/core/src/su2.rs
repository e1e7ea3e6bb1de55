//! Group geometry of SU(2) stored as unit quaternions.
//!
//! A quaternion `q0 + q1 i + q2 j + q3 k` is identified with the SU(2) matrix
//! whose entries are `alpha = q0 + i q3` and `beta = q2 + i q1`. The left-invariant
//! fields `X, Y, Z` are right multiplication by `i, j, k`, so
//! `[X, Y] = 2Z`, `exp(zZ) = cos z + k sin z` and the fibers of the Hopf map
//! are the right cosets `x exp(sZ)`.
//!
//! For a pair `(x, y)` with `g = x^{-1} y`:
//! * `r = arccos |alpha(g)|` is the horizontal radial pseudo-distance,
//! * `theta = |arg alpha(g)|` is the vertical pseudo-distance,
//! * `delta = arccos(cos r cos theta) = arccos Re alpha(g)` is the round distance on S³.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// A point of SU(2) as a unit quaternion `[q0, q1, q2, q3]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    q: [f64; 4],
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement {
        q: [1.0, 0.0, 0.0, 0.0],
    };

    /// Normalizes the given components. Fails on a zero or non-finite vector.
    pub fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Result<Self> {
        let norm = (q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Domain(format!(
                "cannot normalize quaternion ({q0}, {q1}, {q2}, {q3})"
            )));
        }
        Ok(Self {
            q: [q0 / norm, q1 / norm, q2 / norm, q3 / norm],
        })
    }

    fn from_unnormalized(q: [f64; 4]) -> Self {
        let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        Self {
            q: q.map(|c| c / norm),
        }
    }

    pub fn components(&self) -> [f64; 4] {
        self.q
    }

    /// Upper-left matrix entry as `(re, im)`.
    pub fn alpha(&self) -> (f64, f64) {
        (self.q[0], self.q[3])
    }

    /// Lower-left matrix entry as `(re, im)`.
    pub fn beta(&self) -> (f64, f64) {
        (self.q[2], self.q[1])
    }

    pub fn inverse(&self) -> Self {
        let [a, b, c, d] = self.q;
        Self { q: [a, -b, -c, -d] }
    }

    /// `exp(t X)`
    pub fn exp_x(t: f64) -> Self {
        Self {
            q: [t.cos(), t.sin(), 0.0, 0.0],
        }
    }

    /// `exp(t Y)`
    pub fn exp_y(t: f64) -> Self {
        Self {
            q: [t.cos(), 0.0, t.sin(), 0.0],
        }
    }

    /// `exp(t Z)`, the fiber direction.
    pub fn exp_z(t: f64) -> Self {
        Self {
            q: [t.cos(), 0.0, 0.0, t.sin()],
        }
    }

    /// `exp(h (cos phi X + sin phi Y))`
    pub fn exp_horizontal(h: f64, phi: f64) -> Self {
        let s = h.sin();
        Self {
            q: [h.cos(), s * phi.cos(), s * phi.sin(), 0.0],
        }
    }

    /// Cylindrical chart `exp(r cos phi X + r sin phi Y) exp(z Z)`; its
    /// `alpha` entry is `cos r e^{iz}`.
    pub fn from_cylindrical(r: f64, phi: f64, z: f64) -> Self {
        mul(&Self::exp_horizontal(r, phi), &Self::exp_z(z))
    }

    /// Euclidean inner product in R⁴.
    pub fn dot(&self, other: &Self) -> f64 {
        self.q.iter().zip(&other.q).map(|(a, b)| a * b).sum()
    }

    pub fn norm_defect(&self) -> f64 {
        (self.q.iter().map(|c| c * c).sum::<f64>() - 1.0).abs()
    }
}

/// Quaternion product, renormalized.
pub fn mul(a: &GroupElement, b: &GroupElement) -> GroupElement {
    let [a0, a1, a2, a3] = a.q;
    let [b0, b1, b2, b3] = b.q;
    GroupElement::from_unnormalized([
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    ])
}

/// Pseudo-distances between two group elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCoords {
    /// Horizontal radial pseudo-distance, in `[0, pi/2]`.
    pub r: f64,
    /// Vertical pseudo-distance, in `[0, pi]`.
    pub theta: f64,
    /// Round great-circle distance, in `[0, pi]`.
    pub delta: f64,
}

impl PairCoords {
    /// Coordinates of a pair whose relative element has the given chart values.
    pub fn from_r_theta(r: f64, theta: f64) -> Self {
        let theta = theta.abs();
        let cos_delta = (r.cos() * theta.cos()).clamp(-1.0, 1.0);
        Self {
            r,
            theta,
            delta: cos_delta.acos(),
        }
    }
}

/// `(r, theta, delta)` of the pair `(x, y)`, computed from `g = x^{-1} y`.
///
/// Angles come from `atan2` on complementary components, which equals the
/// clamped `arccos` forms but keeps full precision near coincident points.
pub fn pair_coords(x: &GroupElement, y: &GroupElement) -> PairCoords {
    let g = mul(&x.inverse(), y);
    let [g0, g1, g2, g3] = g.q;
    let alpha_abs = g0.hypot(g3);
    let beta_abs = g1.hypot(g2);
    let r = beta_abs.atan2(alpha_abs);
    let theta = g3.atan2(g0).abs();
    let vec = (g1 * g1 + g2 * g2 + g3 * g3).sqrt();
    let delta = vec.atan2(g0);
    PairCoords { r, theta, delta }
}

/// True iff `delta`, `r` and `theta` each satisfy the triangle inequality on
/// `(x, y, z)` up to `1e-12`.
pub fn triangle_check(x: &GroupElement, y: &GroupElement, z: &GroupElement) -> bool {
    const SLACK: f64 = 1e-12;
    let xy = pair_coords(x, y);
    let yz = pair_coords(y, z);
    let xz = pair_coords(x, z);
    xz.delta <= xy.delta + yz.delta + SLACK
        && xz.r <= xy.r + yz.r + SLACK
        && xz.theta <= xy.theta + yz.theta + SLACK
}

/// Weighted point set realizing the normalized Haar measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HaarSample {
    pub points: Vec<GroupElement>,
    pub weights: Vec<f64>,
    /// Seed for random samples; `None` for deterministic quadratures.
    pub seed: Option<u64>,
}

impl HaarSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `sum_i w_i f(x_i)`, summed in index order.
    pub fn integrate<F: Fn(&GroupElement) -> f64 + Sync>(&self, f: F) -> f64 {
        use rayon::prelude::*;
        let values: Vec<f64> = self
            .points
            .par_iter()
            .zip(self.weights.par_iter())
            .map(|(p, w)| w * f(p))
            .collect();
        values.iter().sum()
    }
}

/// A uniform point on S³ drawn from four standard normals.
pub fn random_element<R: rand::Rng + ?Sized>(rng: &mut R) -> GroupElement {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        if let Ok(g) = GroupElement::new(q[0], q[1], q[2], q[3]) {
            return g;
        }
    }
}

/// Seeded generator used by every randomized routine.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` i.i.d. Haar-uniform points with equal weights.
pub fn haar_sample(n: usize, seed: u64) -> Result<HaarSample> {
    if n == 0 {
        return Err(Error::Domain("haar_sample needs n >= 1".into()));
    }
    let mut rng = seeded_rng(seed);
    let points: Vec<_> = (0..n).map(|_| random_element(&mut rng)).collect();
    Ok(HaarSample {
        points,
        weights: vec![1.0 / n as f64; n],
        seed: Some(seed),
    })
}

/// Node counts of the product Haar quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HaarGrid {
    pub n_r: usize,
    pub n_phi1: usize,
    pub n_phi2: usize,
}

impl HaarGrid {
    pub const fn cube(n: usize) -> Self {
        Self {
            n_r: n,
            n_phi1: n,
            n_phi2: n,
        }
    }
}

impl Default for HaarGrid {
    fn default() -> Self {
        Self::cube(64)
    }
}

/// Deterministic product quadrature for the Haar measure in the chart
/// `alpha = cos r e^{i phi1}`, `beta = sin r e^{i phi2}`, where the density is
/// `sin r cos r / (2 pi^2)`.
///
/// The radial rule is Gauss–Legendre in `u = sin^2 r`, which turns the density
/// into a constant; the angles use the trapezoid rule. The rule integrates
/// every polynomial in the quaternion components of degree below
/// `min(2 n_r, n_phi1, n_phi2)` exactly.
pub fn haar_quadrature(grid: HaarGrid) -> Result<HaarSample> {
    if grid.n_r < 2 || grid.n_phi1 < 2 || grid.n_phi2 < 2 {
        return Err(Error::Domain(format!(
            "Haar quadrature needs >= 2 nodes per axis, got {grid:?}"
        )));
    }
    let gl = GaussLegendre::new(grid.n_r);
    let total = grid.n_r * grid.n_phi1 * grid.n_phi2;
    let mut points = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let angle_w = 1.0 / (grid.n_phi1 * grid.n_phi2) as f64;
    for (u, wu) in gl.mapped(0.0, 1.0) {
        let cos_r = (1.0 - u).sqrt();
        let sin_r = u.sqrt();
        for i in 0..grid.n_phi1 {
            let phi1 = 2.0 * PI * i as f64 / grid.n_phi1 as f64;
            let (s1, c1) = phi1.sin_cos();
            for j in 0..grid.n_phi2 {
                let phi2 = 2.0 * PI * j as f64 / grid.n_phi2 as f64;
                let (s2, c2) = phi2.sin_cos();
                points.push(GroupElement {
                    q: [cos_r * c1, sin_r * s2, sin_r * c2, cos_r * s1],
                });
                weights.push(wu * angle_w);
            }
        }
    }
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(HaarSample {
        points,
        weights,
        seed: None,
    })
}

/// Hopf projection onto the sphere of radius 1/2 in R³:
/// `((|alpha|^2 - |beta|^2) / 2, Re(conj(alpha) beta), Im(conj(alpha) beta))`.
///
/// The angle between `hopf_project(x)` and `hopf_project(y)` seen from the
/// origin is `2 r(x, y)`; the great-circle distance on the radius-1/2 sphere is
/// therefore `r(x, y)`.
pub fn hopf_project(x: &GroupElement) -> [f64; 3] {
    let (ar, ai) = x.alpha();
    let (br, bi) = x.beta();
    let a2 = ar * ar + ai * ai;
    let b2 = br * br + bi * bi;
    // conj(alpha) * beta
    let re = ar * br + ai * bi;
    let im = ar * bi - ai * br;
    [0.5 * (a2 - b2), re, im]
}

/// One step along a horizontal curve: `x exp(step (cos dir X + sin dir Y))`.
pub fn horizontal_step(x: &GroupElement, direction: f64, step: f64) -> GroupElement {
    mul(x, &GroupElement::exp_horizontal(step, direction))
}

/// The fiber `{ base exp(sZ) : s in [-pi, pi) }` through `base`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fiber {
    pub base: GroupElement,
}

impl Fiber {
    pub fn through(base: GroupElement) -> Self {
        Self { base }
    }

    pub fn point(&self, s: f64) -> GroupElement {
        mul(&self.base, &GroupElement::exp_z(s))
    }

    /// `m` equally spaced points over one period.
    pub fn points(&self, m: usize) -> impl Iterator<Item = GroupElement> + '_ {
        (0..m).map(move |i| self.point(-PI + 2.0 * PI * i as f64 / m as f64))
    }

    /// Whether `y` lies on this fiber, i.e. `r(base, y) <= tol`.
    pub fn contains(&self, y: &GroupElement, tol: f64) -> bool {
        pair_coords(&self.base, y).r <= tol
    }

    /// Fiber parameter `s` with `y = base exp(sZ)`, when `y` is on the fiber.
    pub fn parameter_of(&self, y: &GroupElement) -> Option<f64> {
        let c = pair_coords(&self.base, y);
        if c.r > 1e-10 {
            return None;
        }
        let g = mul(&self.base.inverse(), y);
        Some(g.q[3].atan2(g.q[0]))
    }
}

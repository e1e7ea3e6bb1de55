//! Heat kernels on SU(2), S³ and S².
//!
//! * `p_t`: subelliptic kernel of `X² + Y²`, a function of `(r, theta)`;
//! * `q_t`: round kernel on S³, a function of `delta`;
//! * `q~_t`: quotient kernel on S², a function of `r`.
//!
//! All kernels are densities against the normalized Haar measure (or its
//! push-forward on S²).

mod integral;
mod q;
mod series;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::su2::{pair_coords, GroupElement, HaarGrid, PairCoords};

pub use integral::{convolution_check, convolution_sides, p_integral, p_integral_detailed, IntegralResult};
pub use q::{q_eval, q_eval_with, q_ln_of_distance, q_of_distance, QRepresentation};
pub use series::{
    eigen_residual, eigen_term, p_series, q_t_spectral, q_tilde, q_tilde_fiber_average,
    SpectralSeries, SpectralWeight, SERIES_INDEX_LIMIT,
};

/// Spectral index `(k, n)` with its sub-Laplacian and round-Laplacian eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpectralIndex {
    pub k: u32,
    pub n: i32,
}

impl SpectralIndex {
    pub fn new(k: u32, n: i32) -> Self {
        Self { k, n }
    }

    /// `-(4k(k + |n| + 1) + 2|n|)`, eigenvalue of the sub-Laplacian.
    pub fn lambda(&self) -> f64 {
        let k = f64::from(self.k);
        let n = f64::from(self.n.unsigned_abs());
        -(4.0 * k * (k + n + 1.0) + 2.0 * n)
    }

    /// `lambda - n²`, eigenvalue of the round Laplacian on S³.
    pub fn lambda_prime(&self) -> f64 {
        let n = f64::from(self.n);
        self.lambda() - n * n
    }

    /// Coefficient `2k + |n| + 1` of each term of the heat kernel series.
    pub fn term_weight(&self) -> f64 {
        f64::from(2 * self.k + self.n.unsigned_abs() + 1)
    }
}

/// Truncation and quadrature settings shared by every kernel routine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalPolicy {
    /// Relative truncation tolerance for series and quadrature tails.
    pub tol: f64,
    /// Below this time the Gaussian-side theta sum is used, above it the dual sum.
    pub t_switch: f64,
    /// Gauss–Legendre nodes in the core window of a line integral.
    pub quad_nodes: usize,
    /// Core half-width of a line integral, in multiples of `sqrt(t)`.
    pub y_cut: f64,
    /// Product grid for Haar integrals.
    pub haar_grid: HaarGrid,
}

impl Default for EvalPolicy {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            t_switch: 0.5,
            quad_nodes: 400,
            y_cut: 12.0,
            haar_grid: HaarGrid::default(),
        }
    }
}

impl EvalPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        if !(self.t_switch > 0.0 && self.t_switch.is_finite()) {
            return Err(Error::Config(format!("t_switch must be positive, got {}", self.t_switch)));
        }
        if self.quad_nodes < 16 {
            return Err(Error::Config(format!("quad_nodes must be >= 16, got {}", self.quad_nodes)));
        }
        if !(self.y_cut > 0.0 && self.y_cut.is_finite()) {
            return Err(Error::Config(format!("y_cut must be positive, got {}", self.y_cut)));
        }
        let g = self.haar_grid;
        if g.n_r < 2 || g.n_phi1 < 2 || g.n_phi2 < 2 {
            return Err(Error::Config(format!("Haar grid needs >= 2 nodes per axis, got {g:?}")));
        }
        Ok(())
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be positive and finite, got t = {t}")))
    }
}

pub(crate) fn check_radius(r: f64) -> Result<()> {
    if (0.0..=std::f64::consts::FRAC_PI_2).contains(&r) {
        Ok(())
    } else {
        Err(Error::Domain(format!("r must lie in [0, pi/2], got r = {r}")))
    }
}

/// Which kernel a point-set routine evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// Subelliptic `p_t(x, y) = p(t, r, theta)`.
    P,
    /// Round `q_t(x, y) = q(t, cos delta)`.
    Qt,
    /// Quotient `q~_t(x, y)`, a function of `r` only.
    QTilde,
}

impl KernelKind {
    /// Kernel value for a pair with the given coordinates.
    pub fn value(&self, t: f64, c: &PairCoords, policy: &EvalPolicy) -> Result<f64> {
        match self {
            KernelKind::P => p_series(t, c.r, c.theta, policy),
            KernelKind::Qt => q_of_distance(t, c.delta, policy),
            KernelKind::QTilde => q_tilde(t, c.r, policy),
        }
    }

    pub fn between(
        &self,
        t: f64,
        x: &GroupElement,
        y: &GroupElement,
        policy: &EvalPolicy,
    ) -> Result<f64> {
        self.value(t, &pair_coords(x, y), policy)
    }
}

/// `q_t(x, y)` through the theta-function form.
pub fn q_t_kernel(t: f64, x: &GroupElement, y: &GroupElement, policy: &EvalPolicy) -> Result<f64> {
    q_of_distance(t, pair_coords(x, y).delta, policy)
}

/// Row of kernel values `k_t(x, y_j)`; evaluated as a parallel map, so the
/// output order follows `ys` regardless of scheduling.
pub fn kernel_row(
    kind: KernelKind,
    t: f64,
    x: &GroupElement,
    ys: &[GroupElement],
    policy: &EvalPolicy,
) -> Result<Vec<f64>> {
    ys.par_iter()
        .map(|y| kind.between(t, x, y, policy))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_index_values() {
        let i = SpectralIndex::new(0, 1);
        assert_eq!(i.lambda(), -2.0);
        assert_eq!(i.lambda_prime(), -3.0);
        let i = SpectralIndex::new(1, 0);
        assert_eq!(i.lambda(), -8.0);
        assert_eq!(i.lambda_prime(), -8.0);
        assert_eq!(SpectralIndex::new(0, 0).lambda(), 0.0);
        let i = SpectralIndex::new(2, -3);
        assert_eq!(i.lambda(), -(4.0 * 2.0 * 6.0 + 6.0));
        assert_eq!(i.lambda_prime(), i.lambda() - 9.0);
    }

    #[test]
    fn policy_validation() {
        assert!(EvalPolicy::default().validate().is_ok());
        let bad = EvalPolicy {
            tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EvalPolicy {
            quad_nodes: 8,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}

//! Line-integral representation of `p_t` through the round kernel:
//!
//! `p(t, r, theta) = (4 pi t)^{-1/2} int e^{-(y + i theta)^2 / 4t} q(t, cos r cosh y) dy`.
//!
//! Taken literally the integrand oscillates with amplitude up to
//! `e^{theta^2/4t}` and the integral cancels catastrophically at small `t`.
//! Since `q(t, .)` is entire, the contour moves to `y = u - i theta`:
//!
//! `p = (4 pi t)^{-1/2} int e^{-u^2 / 4t} q(t, cos r cosh(u - i theta)) du`,
//!
//! which has a positive Gaussian envelope. The integrand at `-u` is the
//! complex conjugate of the one at `u`, so the imaginary part of the sum
//! measures the quadrature's own asymmetry.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::q::q_direct_complex_scaled;
use super::series::p_series;
use super::{check_radius, check_time, q_of_distance, EvalPolicy};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::su2::PairCoords;

const PANEL_NODES: usize = 16;
const MAX_REACH: f64 = 200.0;
const QUIET_PANELS: u32 = 3;

/// Outcome of [`p_integral_detailed`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralResult {
    pub value: f64,
    /// Imaginary part left over by the quadrature.
    pub imag: f64,
    /// Integrand evaluations.
    pub evaluations: usize,
    /// Half-width of the integration range actually used.
    pub reach: f64,
}

fn integrand(t: f64, cr: f64, theta: f64, u: f64) -> Complex64 {
    let x = cr * Complex64::new(u, -theta).cosh();
    let w = x.acosh();
    q_direct_complex_scaled(t, w, -u * u / (4.0 * t))
}

/// `p_t` by the contour-shifted line integral.
pub fn p_integral(t: f64, r: f64, theta: f64, policy: &EvalPolicy) -> Result<f64> {
    let res = p_integral_detailed(t, r, theta, policy)?;
    if res.imag.abs() > 1e-10 * res.value.abs().max(1.0) {
        return Err(Error::Conditioning(format!(
            "line integral left imaginary part {} (value {})",
            res.imag, res.value
        )));
    }
    Ok(res.value)
}

/// Like [`p_integral`] but also reports the imaginary residue and cost.
pub fn p_integral_detailed(t: f64, r: f64, theta: f64, policy: &EvalPolicy) -> Result<IntegralResult> {
    policy.validate()?;
    check_time(t)?;
    check_radius(r)?;
    // p is 2 pi periodic and even in theta; fold into [0, pi]
    let theta = theta.rem_euclid(2.0 * PI);
    let theta = if theta > PI { 2.0 * PI - theta } else { theta };
    let cr = r.cos();
    let rule = GaussLegendre::new(PANEL_NODES);

    let core = policy.y_cut * t.sqrt() + theta;
    let mut panels = policy.quad_nodes.div_ceil(2 * PANEL_NODES).max(1);
    if theta > 0.0 {
        let half_period = 2.0 * PI * t / theta;
        panels = panels.max((core / half_period).ceil() as usize);
    }
    let width = core / panels as f64;

    let panel_sum = |lo: f64| -> (Complex64, f64) {
        let mut s = Complex64::new(0.0, 0.0);
        let mut a = 0.0;
        for (u, wgt) in rule.mapped(lo, lo + width) {
            let fp = integrand(t, cr, theta, u);
            let fm = integrand(t, cr, theta, -u);
            s += wgt * (fp + fm);
            a += wgt * (fp.norm() + fm.norm());
        }
        (s, a)
    };

    let mut sum = Complex64::new(0.0, 0.0);
    let mut count = 0;
    for p in 0..panels {
        sum += panel_sum(width * p as f64).0;
        count += 1;
    }
    let mut quiet = 0;
    let mut lo = core;
    while quiet < QUIET_PANELS {
        if lo > MAX_REACH {
            return Err(Error::NonConvergence(format!(
                "line integral tail not negligible by |u| = {MAX_REACH} (t = {t}, r = {r})"
            )));
        }
        let (s, a) = panel_sum(lo);
        sum += s;
        count += 1;
        lo += width;
        if a <= policy.tol * sum.norm() {
            quiet += 1;
        } else {
            quiet = 0;
        }
    }
    if !(sum.re.is_finite() && sum.im.is_finite()) {
        return Err(Error::NonConvergence(format!(
            "line integral overflowed at t = {t}, r = {r}, theta = {theta}"
        )));
    }
    let norm = 1.0 / (4.0 * PI * t).sqrt();
    Ok(IntegralResult {
        value: norm * sum.re,
        imag: norm * sum.im,
        evaluations: 2 * count * PANEL_NODES,
        reach: lo,
    })
}

/// Both sides of the convolution identity
/// `q(t, cos delta) = int zeta_t(theta - phi) p(t, r, phi) dphi`,
/// with `zeta_t(s) = (4 pi t)^{-1/2} e^{-s^2/4t}` the heat kernel on the line.
pub fn convolution_sides(t: f64, r: f64, theta: f64, policy: &EvalPolicy) -> Result<(f64, f64)> {
    policy.validate()?;
    check_time(t)?;
    check_radius(r)?;
    let lhs = q_of_distance(t, PairCoords::from_r_theta(r, theta).delta, policy)?;
    let reach = policy.y_cut * t.sqrt();
    let rule = GaussLegendre::new(PANEL_NODES);
    let panels = policy.quad_nodes.div_ceil(PANEL_NODES).max(1);
    let width = 2.0 * reach / panels as f64;
    let norm = 1.0 / (4.0 * PI * t).sqrt();
    let mut rhs = 0.0;
    for p in 0..panels {
        let lo = -reach + width * p as f64;
        for (s, w) in rule.mapped(lo, lo + width) {
            rhs += w * norm * (-s * s / (4.0 * t)).exp() * p_series(t, r, theta - s, policy)?;
        }
    }
    Ok((lhs, rhs))
}

/// Relative residual of the convolution identity.
pub fn convolution_check(t: f64, r: f64, theta: f64, policy: &EvalPolicy) -> Result<f64> {
    let (lhs, rhs) = convolution_sides(t, r, theta, policy)?;
    Ok((lhs - rhs).abs() / lhs.abs())
}

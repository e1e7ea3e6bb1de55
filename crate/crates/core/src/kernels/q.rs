//! The round-sphere kernel `q(t, x)`, an entire function of `x = cos delta`.
//!
//! Two representations:
//!
//! * dual: `q(t, x) = e^t sum_{m >= 1} m U_{m-1}(x) e^{-m^2 t}` (Chebyshev `U`);
//! * direct: with `w = acosh x` (any branch),
//!   `q = pref (w / sinh w) e^{w^2/4t} [1 + 2 sum_k e^{-pi^2 k^2/t}
//!        (cos(k pi w/t) - (2 k^2 pi^2/t) sinc(k pi w/t))]`,
//!   `pref = sqrt(pi) e^t / (4 t^{3/2})`.
//!
//! The direct form is evaluated in complex arithmetic so the same routine
//! serves real `x` in `(-1, 1]`, the continuation `x > 1`, and the complex
//! arguments met on the shifted contour of the line integral for `p_t`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_time, EvalPolicy};
use crate::error::{Error, Result};
use crate::special_fn::{QuietCounter, SERIES_EPS};

/// Which series evaluates `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QRepresentation {
    /// Gaussian-side sum, fast for small `t`.
    Direct,
    /// Eigenvalue sum, fast for large `t`.
    Dual,
    /// `Direct` below `policy.t_switch`, `Dual` above.
    Auto,
}

fn ln_pref(t: f64) -> f64 {
    0.5 * PI.ln() + t - 4f64.ln() - 1.5 * t.ln()
}

/// `sin z / z` for complex `z`.
fn sinc(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        Complex64::new(1.0, 0.0) - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// `w / sinh w`.
fn w_over_sinh(w: Complex64) -> Complex64 {
    if w.norm() < 1e-4 {
        let w2 = w * w;
        Complex64::new(1.0, 0.0) - w2 / 6.0 + 7.0 * w2 * w2 / 360.0
    } else {
        w / w.sinh()
    }
}

/// Bracketed theta factor `H(t, w)`; every Gaussian weight is folded into an
/// exponent so large `|Im w|` cannot overflow an intermediate.
fn theta_factor(t: f64, w: Complex64) -> Complex64 {
    let i = Complex64::i();
    let mut h = Complex64::new(1.0, 0.0);
    let mut abs_sum = 1.0;
    let mut quiet = QuietCounter::default();
    for k in 1..100_000_u32 {
        let kf = f64::from(k);
        let c = -PI * PI * kf * kf / t;
        let z = kf * PI * w / t;
        let cos_part = 0.5 * ((c + i * z).exp() + (c - i * z).exp());
        let sinc_part = if z.norm() < 1.0 {
            c.exp() * sinc(z)
        } else {
            ((c + i * z).exp() - (c - i * z).exp()) / (2.0 * i * z)
        };
        let term = 2.0 * (cos_part - (2.0 * kf * kf * PI * PI / t) * sinc_part);
        h += term;
        abs_sum += term.norm();
        if quiet.feed(term.norm(), abs_sum, SERIES_EPS) {
            return h;
        }
    }
    h
}

/// `e^{log_scale} q(t, cosh w)` from the direct form.
pub(crate) fn q_direct_complex_scaled(t: f64, w: Complex64, log_scale: f64) -> Complex64 {
    let expo = w * w / (4.0 * t) + ln_pref(t) + log_scale;
    expo.exp() * w_over_sinh(w) * theta_factor(t, w)
}

/// Dual sum for `x` of either sign; `None` if a term overflows.
fn q_dual(t: f64, x: f64) -> Option<f64> {
    // U_{m-1}(x) by the three-term recurrence, U_0 = 1, U_{-1} = 0
    let mut u_prev = 0.0_f64;
    let mut u = 1.0_f64;
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut quiet = QuietCounter::default();
    // |U_{m-1}(x)| <= m rho^{m-1} with rho = max(1, x + sqrt(x^2 - 1))
    let ln_rho = if x > 1.0 { x.acosh() } else { 0.0 };
    for m in 1..1_000_000_u64 {
        let mf = m as f64;
        let w = (-(mf * mf - 1.0) * t).exp();
        let term = mf * u * w;
        if !term.is_finite() {
            return None;
        }
        sum += term;
        abs_sum += term.abs();
        let bound = (2.0 * mf.ln() + (mf - 1.0) * ln_rho - (mf * mf - 1.0) * t).exp();
        if m > 1 && quiet.feed(bound, abs_sum, SERIES_EPS) {
            return Some(sum);
        }
        let next = 2.0 * x * u - u_prev;
        u_prev = u;
        u = next;
    }
    None
}

/// Direct form on `[0, pi)` in terms of the distance itself.
fn q_direct_distance(t: f64, d: f64) -> f64 {
    let (val, ln_g_ok) = direct_parts(t, d);
    if ln_g_ok.1 > 0.0 {
        (ln_g_ok.0 + ln_g_ok.1.ln()).exp()
    } else {
        val
    }
}

/// Returns `(value, (ln of everything but G, G))` for the real direct form
/// `q = pref (d / sin d) e^{-d^2/4t} G(t, d)`.
fn direct_parts(t: f64, d: f64) -> (f64, (f64, f64)) {
    let ratio = if d < 1e-6 { 1.0 + d * d / 6.0 } else { d / d.sin() };
    let ln_rest = ln_pref(t) + ratio.ln() - d * d / (4.0 * t);
    let mut g = 1.0;
    let mut abs_sum = 1.0;
    let mut quiet = QuietCounter::default();
    for k in 1..100_000_u32 {
        let kf = f64::from(k);
        let c = -PI * PI * kf * kf / t;
        let y = kf * PI * d / t;
        let cosh_part = 0.5 * ((c + y).exp() + (c - y).exp());
        let shc_part = if y < 1e-3 {
            c.exp() * (1.0 + y * y / 6.0)
        } else {
            ((c + y).exp() - (c - y).exp()) / (2.0 * y)
        };
        let term = 2.0 * (cosh_part - (2.0 * kf * kf * PI * PI / t) * shc_part);
        g += term;
        abs_sum += term.abs();
        if quiet.feed(term, abs_sum, SERIES_EPS) {
            break;
        }
    }
    (ln_rest.exp() * g, (ln_rest, g))
}

fn check_distance(d: f64) -> Result<()> {
    if (0.0..PI).contains(&d) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "distance must lie in [0, pi), got {d} (q is singular at antipodes)"
        )))
    }
}

/// `q(t, cos d)` for a great-circle distance `d in [0, pi)`.
pub fn q_of_distance(t: f64, d: f64, policy: &EvalPolicy) -> Result<f64> {
    check_time(t)?;
    check_distance(d)?;
    if t < policy.t_switch {
        return Ok(q_direct_distance(t, d));
    }
    q_dual(t, d.cos()).ok_or_else(|| {
        Error::NonConvergence(format!("dual series for q overflowed at t = {t}, d = {d}"))
    })
}

/// `ln q(t, cos d)`, computed without forming `e^{-d^2/4t}`; stays finite
/// where `q` itself underflows.
pub fn q_ln_of_distance(t: f64, d: f64) -> Result<f64> {
    check_time(t)?;
    check_distance(d)?;
    let (val, (ln_rest, g)) = direct_parts(t, d);
    if g > 0.0 {
        Ok(ln_rest + g.ln())
    } else if val > 0.0 {
        Ok(val.ln())
    } else {
        Err(Error::Conditioning(format!(
            "theta factor lost all precision at t = {t}, d = {d}"
        )))
    }
}

/// `q(t, x)` for `x > -1`, choosing the representation from `policy`.
pub fn q_eval(t: f64, x: f64, policy: &EvalPolicy) -> Result<f64> {
    q_eval_with(t, x, QRepresentation::Auto, policy)
}

/// `q(t, x)` with an explicit representation.
pub fn q_eval_with(t: f64, x: f64, repr: QRepresentation, policy: &EvalPolicy) -> Result<f64> {
    check_time(t)?;
    if !(x > -1.0) || !x.is_finite() {
        return Err(Error::Domain(format!("q(t, x) needs x > -1, got x = {x}")));
    }
    let repr = match repr {
        QRepresentation::Auto if t < policy.t_switch => QRepresentation::Direct,
        QRepresentation::Auto => QRepresentation::Dual,
        other => other,
    };
    match repr {
        QRepresentation::Direct if x <= 1.0 => Ok(q_direct_distance(t, x.acos())),
        QRepresentation::Direct => {
            let v = q_direct_complex_scaled(t, Complex64::new(x.acosh(), 0.0), 0.0).re;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonConvergence(format!("q overflows at t = {t}, x = {x}")))
            }
        }
        _ => match q_dual(t, x) {
            Some(v) => Ok(v),
            None if x > 1.0 => q_eval_with(t, x, QRepresentation::Direct, policy),
            None => Err(Error::NonConvergence(format!(
                "dual series for q overflowed at t = {t}, x = {x}"
            ))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pol() -> EvalPolicy {
        EvalPolicy::default()
    }

    #[test]
    fn representations_agree_on_the_sphere() {
        for &t in &[0.05, 0.2, 0.5, 1.0, 3.0] {
            for i in 0..30 {
                let d = 0.1 * f64::from(i);
                let x = d.cos();
                let a = q_eval_with(t, x, QRepresentation::Direct, &pol()).unwrap();
                let b = q_eval_with(t, x, QRepresentation::Dual, &pol()).unwrap();
                assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "t={t} d={d}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn continuation_beyond_one() {
        for &t in &[0.3, 1.0] {
            for &x in &[1.5, 3.0, 10.0] {
                let a = q_eval_with(t, x, QRepresentation::Direct, &pol()).unwrap();
                let b = q_eval_with(t, x, QRepresentation::Dual, &pol()).unwrap();
                assert!((a - b).abs() <= 1e-9 * b.abs(), "t={t} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn complex_form_matches_real() {
        let t = 0.2;
        let d = 1.3_f64;
        let w = Complex64::new(0.0, d);
        let a = q_direct_complex_scaled(t, w, 0.0);
        let b = q_of_distance(t, d, &pol()).unwrap();
        assert!((a.re - b).abs() < 1e-12 * b && a.im.abs() < 1e-12 * b);
    }

    #[test]
    fn log_form_stays_finite_past_underflow() {
        let t = 1e-3;
        let l = q_ln_of_distance(t, 2.4).unwrap();
        assert!(l.is_finite() && l < -1000.0);
        let d = 0.5;
        let direct = q_of_distance(t, d, &pol()).unwrap();
        assert!((q_ln_of_distance(t, d).unwrap() - direct.ln()).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(q_eval(1.0, -1.0, &pol()).is_err());
        assert!(q_eval(-1.0, 0.0, &pol()).is_err());
        assert!(q_of_distance(1.0, PI, &pol()).is_err());
    }
}

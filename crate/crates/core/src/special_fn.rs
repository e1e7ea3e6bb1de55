//! Jacobi polynomials `P_k^{(0,n)}` and the theta-type sums behind the
//! round-sphere kernel.
//!
//! Polynomials are evaluated with the three-term recurrence in the degree,
//! which stays stable for large `k`. The theta sum
//! `S(t, d) = sum_{k in Z} (d + 2k pi) exp(-(d + 2k pi)^2 / 4t)` has two
//! representations related by Poisson summation:
//!
//! * the direct (Gaussian-side) series, which needs only a handful of terms
//!   when `t` is small;
//! * the dual series `(4 t^{3/2} / sqrt(pi)) sum_{m >= 1} m sin(m d) exp(-m^2 t)`,
//!   which converges fast when `t` is large.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::precision::Real;

/// Slack allowed on `|x| <= 1` before a Jacobi argument is rejected.
pub const JACOBI_DOMAIN_SLACK: f64 = 1e-12;

/// Relative size below which a series term counts as negligible.
pub(crate) const SERIES_EPS: f64 = 1e-16;

/// Consecutive negligible terms required before a series is cut.
pub(crate) const SERIES_QUIET_TERMS: u32 = 3;

/// Degree `k` and second parameter `n` (beta = n, alpha = 0) of a Jacobi polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JacobiIndex {
    pub k: u32,
    pub n: u32,
}

impl JacobiIndex {
    pub fn new(k: u32, n: u32) -> Self {
        Self { k, n }
    }
}

/// Successive values `P_0^{(0,n)}(x), P_1^{(0,n)}(x), ...` for fixed `n` and `x`.
#[derive(Debug, Clone)]
pub struct JacobiSequence {
    beta: f64,
    x: f64,
    k: u32,
    prev: f64,
    cur: f64,
}

impl JacobiSequence {
    /// `x` is used as given; callers validate the domain.
    pub fn new(n: u32, x: f64) -> Self {
        Self {
            beta: f64::from(n),
            x,
            k: 0,
            prev: 0.0,
            cur: 1.0,
        }
    }

    /// Degree of the value that the next call to `next` returns.
    pub fn degree(&self) -> u32 {
        self.k
    }
}

impl Iterator for JacobiSequence {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let out = self.cur;
        let next = jacobi_next(self.k, self.beta, self.x, self.cur, self.prev);
        self.prev = self.cur;
        self.cur = next;
        self.k += 1;
        Some(out)
    }
}

/// One step of the recurrence: `P_{k+1}` from `P_k = cur` and `P_{k-1} = prev`.
pub(crate) fn jacobi_next<T: Real>(k: u32, b: f64, x: T, cur: T, prev: T) -> T {
    if k == 0 {
        return T::from(1.0) + T::from(0.5 * (b + 2.0)) * (x - T::from(1.0));
    }
    let k = f64::from(k);
    let s = 2.0 * k + b;
    // all coefficients are integers well inside the exact f64 range
    let lead = (s + 1.0) * (s + 2.0) * s;
    let shift = (s + 1.0) * b * b;
    let back = 2.0 * k * (k + b) * (s + 2.0);
    let denom = 2.0 * (k + 1.0) * (k + b + 1.0) * s;
    ((T::from(lead) * x - T::from(shift)) * cur - T::from(back) * prev) / denom
}

/// `P_k^{(0,n)}(x)` by the three-term recurrence.
pub fn jacobi_eval(idx: JacobiIndex, x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 + JACOBI_DOMAIN_SLACK {
        return Err(Error::Domain(format!(
            "Jacobi argument x = {x} outside [-1, 1]"
        )));
    }
    let x = x.clamp(-1.0, 1.0);
    Ok(JacobiSequence::new(idx.n, x)
        .nth(idx.k as usize)
        .expect("sequence is infinite"))
}

/// `ln C(k + n, k)`, summed over the shorter factor list.
pub(crate) fn ln_binomial(k: u32, n: u32) -> f64 {
    let (small, big) = if k < n { (k, n) } else { (n, k) };
    (1..=small)
        .map(|j| (f64::from(big) + f64::from(j)).ln() - f64::from(j).ln())
        .sum()
}

/// Log of [`jacobi_sup_bound`].
pub fn ln_jacobi_sup_bound(idx: JacobiIndex) -> f64 {
    ln_binomial(idx.k, idx.n)
}

/// Upper bound for `max_{|x| <= 1} |P_k^{(0,n)}(x)|`.
///
/// With `alpha = 0 <= beta = n` the maximum is attained at `x = -1` and equals
/// `C(k + n, k)`, which grows like `k^n`. Used only to decide truncation.
pub fn jacobi_sup_bound(idx: JacobiIndex) -> f64 {
    ln_jacobi_sup_bound(idx).exp()
}

/// Tracks the "three quiet terms in a row" cut-off rule.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct QuietCounter {
    run: u32,
}

impl QuietCounter {
    /// Feeds one term's magnitude against the current scale; returns true once
    /// enough consecutive terms were negligible.
    pub(crate) fn feed(&mut self, term: f64, scale: f64, rel: f64) -> bool {
        if term.abs() <= rel * scale.abs() {
            self.run += 1;
        } else {
            self.run = 0;
        }
        self.run >= SERIES_QUIET_TERMS
    }
}

/// Direct Gaussian-side theta sum `sum_k (d + 2k pi) exp(-(d + 2k pi)^2 / 4t)`.
///
/// Expects `t > 0` and `0 <= d < pi`.
pub fn theta_sum_direct(t: f64, d: f64) -> f64 {
    debug_assert!(t > 0.0);
    let term = |k: i64| {
        let a = d + 2.0 * PI * k as f64;
        a * (-a * a / (4.0 * t)).exp()
    };
    let mut sum = term(0);
    let mut abs_sum = sum.abs();
    let mut quiet = QuietCounter::default();
    for k in 1..100_000_i64 {
        let plus = term(k);
        let minus = term(-k);
        sum += plus + minus;
        abs_sum += plus.abs() + minus.abs();
        if quiet.feed(plus.abs().max(minus.abs()), abs_sum, SERIES_EPS) {
            break;
        }
    }
    sum
}

/// Dual (Fourier-side) form of the same theta sum,
/// `(4 t^{3/2} / sqrt(pi)) sum_{m >= 1} m sin(m d) exp(-m^2 t)`.
pub fn theta_sum_dual(t: f64, d: f64) -> f64 {
    debug_assert!(t > 0.0);
    let mut sum = 0.0;
    let mut bound_sum = 0.0;
    let mut quiet = QuietCounter::default();
    for m in 1..1_000_000_u64 {
        let mf = m as f64;
        let weight = mf * (-mf * mf * t).exp();
        sum += weight * (mf * d).sin();
        bound_sum += weight;
        if quiet.feed(weight, bound_sum, SERIES_EPS) {
            break;
        }
    }
    4.0 * t.powf(1.5) / PI.sqrt() * sum
}

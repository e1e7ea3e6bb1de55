//! Scalar abstraction so cancellation-prone sums can be rerun in
//! double-double arithmetic without duplicating their logic.
//!
//! Only addition, multiplication and division by an `f64` are taken from
//! `twofloat`; its `exp` and `cos` are far from double-double accurate and its
//! `TwoFloat / TwoFloat` skips the fused multiply-add the algorithm relies on,
//! so those are either reimplemented here or kept out of the trait.

use std::f64::consts::PI;
use std::ops::{Add, Div, Mul, Neg, Sub};

use twofloat::{
    consts::{LN_2, TAU},
    TwoFloat,
};

pub(crate) trait Real:
    Copy
    + From<f64>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<f64, Output = Self>
    + Neg<Output = Self>
{
    /// `exp(a * b)` with the product formed without rounding where possible.
    fn exp_of_product(a: f64, b: f64) -> Self;
    fn cos(self) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f64 {
    fn exp_of_product(a: f64, b: f64) -> Self {
        (a * b).exp()
    }

    fn cos(self) -> Self {
        f64::cos(self)
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl Real for TwoFloat {
    fn exp_of_product(a: f64, b: f64) -> Self {
        dd_exp(TwoFloat::new_mul(a, b))
    }

    fn cos(self) -> Self {
        dd_cos(self)
    }

    fn to_f64(self) -> f64 {
        self.hi() + self.lo()
    }
}

/// Double-double exponential: reduce by `ln 2` and by `2^10`, Taylor-expand,
/// square back up. The library's own `exp` is only accurate to ~1e-11.
pub(crate) fn dd_exp(y: TwoFloat) -> TwoFloat {
    if y.hi() < -745.0 {
        return TwoFloat::from(0.0);
    }
    if y.hi() > 709.0 {
        return TwoFloat::from(f64::INFINITY);
    }
    let k = (y.hi() / std::f64::consts::LN_2).round();
    let r = (y - LN_2 * k) * (1.0 / 1024.0);
    // |r| <= 3.4e-4, so nine Taylor terms reach 1e-37
    let mut term = TwoFloat::from(1.0);
    let mut sum = TwoFloat::from(1.0);
    for j in 1..=9 {
        term = term * r / f64::from(j);
        sum += term;
    }
    for _ in 0..10 {
        sum = sum * sum;
    }
    // split the power of two so neither factor over/underflows on its own
    let k = k as i32;
    let half = k / 2;
    sum * 2f64.powi(half) * 2f64.powi(k - half)
}

/// Double-double cosine by a plain Taylor series after folding into
/// `[-pi, pi]`.
pub(crate) fn dd_cos(x: TwoFloat) -> TwoFloat {
    let turns = (x.hi() / (2.0 * PI)).round();
    let folded = x - TAU * turns;
    let x2 = folded * folded;
    let mut term = TwoFloat::from(1.0);
    let mut sum = TwoFloat::from(1.0);
    for j in 1..=30 {
        term = -term * x2 / f64::from((2 * j - 1) * (2 * j));
        sum += term;
        if term.hi().abs() < 1e-34 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dd_cos_identities() {
        for i in 0..400 {
            let x = TwoFloat::from(-7.0 + 0.035 * f64::from(i));
            let c = dd_cos(x);
            let d = c * c * 2.0 - 1.0 - dd_cos(x * 2.0);
            assert!(d.hi().abs() < 1e-29, "{x:?}");
            assert!((c.to_f64() - x.hi().cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn dd_exp_is_multiplicative() {
        for i in 1..200 {
            let y = TwoFloat::from(-0.37 * f64::from(i));
            let a = dd_exp(y) * dd_exp(-y) - 1.0;
            assert!(a.hi().abs() < 1e-28, "{y:?}: {a:?}");
            let h = dd_exp(y * 0.5);
            let b = (h * h - dd_exp(y)) / dd_exp(y);
            assert!(b.hi().abs() < 1e-28);
        }
    }

    #[test]
    fn dd_exp_matches_f64() {
        for &x in &[-700.0_f64, -30.5, -1.0, 0.0, 0.25, 3.0, 50.0] {
            let a = dd_exp(TwoFloat::from(x)).to_f64();
            assert!((a - x.exp()).abs() <= 2.0 * f64::EPSILON * x.exp(), "{x}");
        }
    }
}

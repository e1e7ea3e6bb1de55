//! Exact-rational Rodrigues oracle for `P_k^{(0,n)}`, shared by the
//! special-function tests and the acceptance run.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Integer coefficients (ascending powers) and common denominator of
/// `P_k^{(0,n)}` from
/// `(-1)^k / (2^k k! (1+x)^n) d^k/dx^k [(1+x)^n (1-x^2)^k]`.
pub struct Exact {
    pub coeffs: Vec<BigInt>,
    pub denom: BigInt,
}

impl Exact {
    pub fn coeff(&self, j: usize) -> BigRational {
        BigRational::new(self.coeffs[j].clone(), self.denom.clone())
    }

    /// Exact value at the dyadic rational `x`, rounded once to f64.
    pub fn eval(&self, x: f64) -> f64 {
        let x = BigRational::from_float(x).unwrap();
        let (a, b) = (x.numer(), x.denom());
        // sum c_j a^j b^(d-j) over denom * b^d
        let mut acc = BigInt::zero();
        let mut b_pow = BigInt::one();
        for c in self.coeffs.iter().rev() {
            acc = acc * a + c * &b_pow;
            b_pow *= b;
        }
        let b_d = b_pow / b;
        BigRational::new(acc, &self.denom * b_d).to_f64().unwrap()
    }
}

pub fn rodrigues(k: usize, n: usize) -> Exact {
    // (1+x)^(n+k) (1-x)^k
    let mut poly = vec![BigInt::one()];
    let mul = |p: &[BigInt], a0: i64, a1: i64| -> Vec<BigInt> {
        let mut out = vec![BigInt::zero(); p.len() + 1];
        for (i, c) in p.iter().enumerate() {
            out[i] += c * a0;
            out[i + 1] += c * a1;
        }
        out
    };
    for _ in 0..n + k {
        poly = mul(&poly, 1, 1);
    }
    for _ in 0..k {
        poly = mul(&poly, 1, -1);
    }
    // k-th derivative
    let mut d: Vec<BigInt> = (k..poly.len())
        .map(|j| {
            let falling: BigInt = ((j - k + 1)..=j).map(BigInt::from).product();
            &poly[j] * falling
        })
        .collect();
    // exact division by (1 + x), n times, from the top coefficient down
    for _ in 0..n {
        let deg = d.len() - 1;
        let mut q = vec![BigInt::zero(); deg];
        let mut carry = BigInt::zero();
        for j in (1..=deg).rev() {
            let c = &d[j] - &carry;
            q[j - 1] = c.clone();
            carry = c;
        }
        assert_eq!(d[0], carry, "(1 + x) must divide exactly");
        d = q;
    }
    let k_fact: BigInt = (1..=k).map(BigInt::from).product();
    let mut denom = k_fact * (BigInt::one() << k);
    if k % 2 == 1 {
        denom = -denom;
    }
    Exact { coeffs: d, denom }
}

pub fn chebyshev_nodes(m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| ((2 * j + 1) as f64 * PI / (2 * m) as f64).cos())
        .collect()
}

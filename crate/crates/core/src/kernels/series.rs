//! Spectral series over the `(k, n)` lattice.
//!
//! Both `p_t` and the spectral form of `q_t` are sums of the same eigenterms
//! with different time weights, so they share one summation routine. The sum
//! runs column by column: outer loop over `n`, inner loop over `k`. Each term
//! is dominated by `(2k + n + 1) e^{lambda t} cos^n r C(k + n, k)`, and the
//! ratio of consecutive bounds along a column is decreasing in `k`; once it
//! drops below 1/2 the remaining tail is at most twice the next bound.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use super::{check_radius, check_time, EvalPolicy, SpectralIndex};
use crate::error::{Error, Result};
use crate::precision::Real;
use crate::special_fn::{jacobi_eval, jacobi_next, JacobiIndex};

/// Largest `k` or `n` visited before a series is declared divergent.
pub const SERIES_INDEX_LIMIT: u32 = 10_000;

/// Quiet columns required before the outer loop stops.
const QUIET_COLUMNS: u32 = 3;

/// Rounding in the sum is roughly `EPS * sum |terms|`; when that exceeds this
/// fraction of the result, the sum is redone in double-double arithmetic.
const ESCALATE_REL: f64 = 1e-11;

/// Entries below this bound are never needed and are left out of tables.
const TABLE_FLOOR: f64 = 1e-300;
const TABLE_MAX_ENTRIES: usize = 4_000_000;

/// Time weights of the eigenterms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralWeight {
    /// `e^{lambda_{k,n} t}`: the subelliptic kernel `p_t`.
    Sub,
    /// `e^{lambda'_{k,n} t}`: the round kernel `q_t`.
    Round,
}

impl SpectralWeight {
    fn exponent(self, k: u32, n: u32) -> f64 {
        let idx = SpectralIndex::new(k, n as i32);
        match self {
            SpectralWeight::Sub => idx.lambda(),
            SpectralWeight::Round => idx.lambda_prime(),
        }
    }
}

/// Per-term data that depends only on `(k, n)` and `t`.
#[derive(Debug, Clone, Copy)]
struct Entry {
    /// `(2k + n + 1) e^{lambda t}`
    weight: f64,
    /// `weight * C(k + n, k)`, the term bound without `cos^n r`
    bound: f64,
    /// Jacobi recurrence `P_{k+1} = (a x - b) P_k - c P_{k-1}`.
    rec: [f64; 3],
}

fn ln_binom_step(k: u32, n: u32) -> f64 {
    (f64::from(k + n + 1) / f64::from(k + 1)).ln()
}

fn entry(t: f64, w: SpectralWeight, k: u32, n: u32, ln_binom: f64) -> Entry {
    let a = f64::from(2 * k + n + 1);
    let ln_w = a.ln() + w.exponent(k, n) * t;
    let rec = if k == 0 {
        let c1 = 0.5 * (f64::from(n) + 2.0);
        [c1, c1 - 1.0, 0.0]
    } else {
        let (kf, b) = (f64::from(k), f64::from(n));
        let s = 2.0 * kf + b;
        let denom = 2.0 * (kf + 1.0) * (kf + b + 1.0) * s;
        [
            (s + 1.0) * (s + 2.0) * s / denom,
            (s + 1.0) * b * b / denom,
            2.0 * kf * (kf + b) * (s + 2.0) / denom,
        ]
    };
    Entry {
        weight: ln_w.exp(),
        bound: (ln_w + ln_binom).exp(),
        rec,
    }
}

/// Evaluator for one spectral series at a fixed time, optionally backed by a
/// table of per-term coefficients so repeated evaluations skip the `exp`s.
#[derive(Debug, Clone)]
pub struct SpectralSeries {
    t: f64,
    weight: SpectralWeight,
    tol: f64,
    table: Vec<Vec<Entry>>,
}

struct SumPass {
    total: f64,
    /// Sum of absolute values of the terms, a proxy for rounding error.
    abs_sum: f64,
    /// Largest tail bound accepted during truncation.
    loosest_cut: f64,
}

#[derive(Clone, Copy)]
enum Cutoff {
    /// Tail bound relative to the running sum.
    Relative(f64),
    /// Fixed tail bound.
    Absolute(f64),
}

impl Cutoff {
    fn at(self, running: f64) -> f64 {
        match self {
            Cutoff::Relative(tol) => tol * running.abs(),
            Cutoff::Absolute(a) => a,
        }
    }
}

impl SpectralSeries {
    pub fn new(t: f64, weight: SpectralWeight, policy: &EvalPolicy) -> Result<Self> {
        check_time(t)?;
        Ok(Self {
            t,
            weight,
            tol: policy.tol,
            table: Vec::new(),
        })
    }

    /// Same series with every coefficient that can matter precomputed.
    pub fn tabulated(t: f64, weight: SpectralWeight, policy: &EvalPolicy) -> Result<Self> {
        let mut s = Self::new(t, weight, policy)?;
        let mut entries = 0;
        for n in 0..=SERIES_INDEX_LIMIT {
            let mut col = Vec::new();
            let mut ln_binom = 0.0;
            for k in 0..=SERIES_INDEX_LIMIT {
                let e = entry(t, weight, k, n, ln_binom);
                if e.bound < TABLE_FLOOR && k > 0 {
                    break;
                }
                col.push(e);
                ln_binom += ln_binom_step(k, n);
            }
            entries += col.len();
            let dead = col[0].bound < TABLE_FLOOR;
            s.table.push(col);
            if dead || entries > TABLE_MAX_ENTRIES {
                break;
            }
        }
        Ok(s)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Kernel value at `(r, theta)`.
    pub fn eval(&self, r: f64, theta: f64) -> Result<f64> {
        check_radius(r)?;
        self.sum(r, theta, None)
    }

    /// Only the `n = 0` column: the fiber average of the kernel.
    pub fn eval_fiber_average(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        self.sum(r, 0.0, Some(0))
    }

    fn sum(&self, r: f64, theta: f64, max_n: Option<u32>) -> Result<f64> {
        let tol = self.tol;
        let mut pass = self.sum_in::<f64>(r, theta, Cutoff::Relative(tol), max_n, true)?;
        // Truncation was judged against partial sums; if the final sum is much
        // smaller than those, redo the sum with an absolute target.
        let target = Cutoff::Absolute(tol * pass.total.abs().max(f64::MIN_POSITIVE));
        if pass.loosest_cut > 2.0 * tol * pass.total.abs() {
            pass = self.sum_in::<f64>(r, theta, target, max_n, true)?;
        }
        if 8.0 * f64::EPSILON * pass.abs_sum <= ESCALATE_REL * pass.total.abs() {
            return Ok(pass.total);
        }
        Ok(self.sum_in::<TwoFloat>(r, theta, target, max_n, false)?.total)
    }

    fn entry(&self, k: u32, n: u32, ln_binom: f64, use_table: bool) -> Entry {
        if use_table {
            if let Some(e) = self.table.get(n as usize).and_then(|c| c.get(k as usize)) {
                return *e;
            }
        }
        entry(self.t, self.weight, k, n, ln_binom)
    }

    /// One pass of the double loop in arithmetic `T`. With `fast` the cached
    /// (rounded) weights and recurrence coefficients are used; otherwise both
    /// are formed in `T` from exact integer data.
    fn sum_in<T: Real>(&self, r: f64, theta: f64, cutoff: Cutoff, max_n: Option<u32>, fast: bool) -> Result<SumPass> {
        let t = self.t;
        let x = T::from(2.0 * r).cos();
        let cr = T::from(r).cos();
        let cr_f = r.cos();
        let cos_theta = T::from(theta).cos();
        let two = T::from(2.0);
        // cos(n theta) and cos^n r, advanced with n
        let (mut cos_prev, mut cos_n) = (cos_theta, T::from(1.0));
        let mut cr_pow = T::from(1.0);
        let mut cr_pow_f = 1.0;

        let mut total = T::from(0.0);
        let mut abs_sum = 0.0;
        let mut loosest_cut = 0.0_f64;
        let mut quiet_cols = 0;
        let n_end = max_n.unwrap_or(SERIES_INDEX_LIMIT);
        for n in 0..=n_end {
            if n > 0 {
                let next = two * cos_theta * cos_n - cos_prev;
                cos_prev = cos_n;
                cos_n = next;
                cr_pow = cr_pow * cr;
                cr_pow_f *= cr_f;
            }
            let mult = if n == 0 { 1.0 } else { 2.0 };
            let angular = T::from(mult) * cos_n * cr_pow;
            let bound_scale = mult * cr_pow_f;
            let b = f64::from(n);
            let (mut p_prev, mut p_cur) = (T::from(0.0), T::from(1.0));
            let mut col = T::from(0.0);
            let mut col_bound = 0.0;
            // ln C(k + n, k), advanced incrementally
            let mut ln_binom = 0.0;
            let mut here = self.entry(0, n, ln_binom, fast);
            let mut k = 0;
            loop {
                let w = if fast {
                    T::from(here.weight)
                } else {
                    T::from(f64::from(2 * k + n + 1)) * T::exp_of_product(self.weight.exponent(k, n), t)
                };
                let term = w * angular * p_cur;
                col = col + term;
                abs_sum += term.to_f64().abs();
                let b_here = here.bound * bound_scale;
                col_bound += b_here;
                let ln_binom_next = ln_binom + ln_binom_step(k, n);
                let next = self.entry(k + 1, n, ln_binom_next, fast);
                let b_next = next.bound * bound_scale;
                let cut = cutoff.at((total + col).to_f64()).max(f64::MIN_POSITIVE);
                if b_next <= 0.5 * b_here && 2.0 * b_next <= cut {
                    col_bound += 2.0 * b_next;
                    loosest_cut = loosest_cut.max(cut);
                    break;
                }
                let p_next = if fast {
                    let [ra, rb, rc] = here.rec;
                    (T::from(ra) * x - T::from(rb)) * p_cur - T::from(rc) * p_prev
                } else {
                    jacobi_next(k, b, x, p_cur, p_prev)
                };
                p_prev = p_cur;
                p_cur = p_next;
                here = next;
                k += 1;
                ln_binom = ln_binom_next;
                if k > SERIES_INDEX_LIMIT {
                    return Err(Error::NonConvergence(format!(
                        "spectral series column n = {n} did not converge by k = {SERIES_INDEX_LIMIT} (t = {t})"
                    )));
                }
            }
            total = total + col;
            let cut = cutoff.at(total.to_f64());
            if col_bound <= cut {
                loosest_cut = loosest_cut.max(cut);
                quiet_cols += 1;
                if quiet_cols >= QUIET_COLUMNS {
                    break;
                }
            } else {
                quiet_cols = 0;
            }
            if n == SERIES_INDEX_LIMIT {
                return Err(Error::NonConvergence(format!(
                    "spectral series did not converge by n = {SERIES_INDEX_LIMIT} (t = {t}, r = {r})"
                )));
            }
        }
        Ok(SumPass {
            total: total.to_f64(),
            abs_sum,
            loosest_cut,
        })
    }
}

/// Subelliptic heat kernel `p(t, r, theta)` by its eigenfunction expansion.
pub fn p_series(t: f64, r: f64, theta: f64, policy: &EvalPolicy) -> Result<f64> {
    SpectralSeries::new(t, SpectralWeight::Sub, policy)?.eval(r, theta)
}

/// Round kernel `q_t` by the same expansion with weights `e^{lambda' t}`.
pub fn q_t_spectral(t: f64, r: f64, theta: f64, policy: &EvalPolicy) -> Result<f64> {
    SpectralSeries::new(t, SpectralWeight::Round, policy)?.eval(r, theta)
}

/// Quotient kernel `q~(t, r) = sum_k (2k + 1) e^{-4k(k+1)t} P_k(cos 2r)`.
pub fn q_tilde(t: f64, r: f64, policy: &EvalPolicy) -> Result<f64> {
    SpectralSeries::new(t, SpectralWeight::Sub, policy)?.eval_fiber_average(r)
}

/// `q~` as the fiber average of `p_t` over `m` equally spaced vertical
/// angles. The trapezoid rule kills every `cos(n theta)` with `m` not dividing
/// `n`, so the result converges geometrically in `m`.
pub fn q_tilde_fiber_average(t: f64, r: f64, m: usize, policy: &EvalPolicy) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("fiber average needs at least one node".into()));
    }
    let series = SpectralSeries::tabulated(t, SpectralWeight::Sub, policy)?;
    let mut s = 0.0;
    for j in 0..m {
        let theta = 2.0 * PI * j as f64 / m as f64;
        s += series.eval(r, theta)?;
    }
    Ok(s / m as f64)
}

/// Eigenterm `p_{k,n}(r, theta)`.
pub fn eigen_term(idx: SpectralIndex, r: f64, theta: f64) -> Result<f64> {
    let n = idx.n.unsigned_abs();
    let pk = jacobi_eval(JacobiIndex::new(idx.k, n), (2.0 * r).cos())?;
    if n == 0 {
        return Ok(f64::from(2 * idx.k + 1) * pk);
    }
    let a = idx.term_weight();
    Ok(2.0 * a * (f64::from(n) * theta).cos() * r.cos().powi(n as i32) * pk)
}

/// `|Delta p_{k,n} - lambda p_{k,n}|` at `(r, theta)` with
/// `Delta = d_r^2 + 2 cot(2r) d_r + tan^2(r) d_theta^2` by central differences.
pub fn eigen_residual(idx: SpectralIndex, r: f64, theta: f64, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("step must be positive, got h = {h}")));
    }
    if r < 4.0 * h || r > PI / 2.0 - 4.0 * h {
        return Err(Error::Domain(format!(
            "r = {r} too close to the chart boundary for step h = {h}"
        )));
    }
    let f = |rr: f64, th: f64| eigen_term(idx, rr, th);
    let f0 = f(r, theta)?;
    let fr_p = f(r + h, theta)?;
    let fr_m = f(r - h, theta)?;
    let ft_p = f(r, theta + h)?;
    let ft_m = f(r, theta - h)?;
    let d_r = (fr_p - fr_m) / (2.0 * h);
    let d_rr = (fr_p - 2.0 * f0 + fr_m) / (h * h);
    let d_tt = (ft_p - 2.0 * f0 + ft_m) / (h * h);
    let tan = r.tan();
    let lap = d_rr + 2.0 * d_r / (2.0 * r).tan() + tan * tan * d_tt;
    Ok((lap - idx.lambda() * f0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pol() -> EvalPolicy {
        EvalPolicy::default()
    }

    #[test]
    fn q_tilde_at_pole_is_plain_sum() {
        let t = 0.7;
        let direct: f64 = (0..50)
            .map(|k| f64::from(2 * k + 1) * (-4.0 * f64::from(k * (k + 1)) * t).exp())
            .sum();
        assert!((q_tilde(t, 0.0, &pol()).unwrap() - direct).abs() < 1e-14 * direct);
    }

    #[test]
    fn large_time_tends_to_one() {
        let v = p_series(20.0, 0.4, 1.0, &pol()).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn leading_terms_at_moderate_time() {
        // t = 2: a small block of eigenterms already reaches rounding level
        let (t, r, th) = (2.0_f64, 0.3_f64, 0.8_f64);
        let mut expect = 0.0;
        for k in 0..12 {
            for n in -24..=24_i32 {
                let idx = SpectralIndex::new(k, n);
                let pk = jacobi_eval(JacobiIndex::new(k, n.unsigned_abs()), (2.0 * r).cos()).unwrap();
                expect += idx.term_weight()
                    * (idx.lambda() * t).exp()
                    * (f64::from(n) * th).cos()
                    * r.cos().powi(n.abs())
                    * pk;
            }
        }
        let v = p_series(t, r, th, &pol()).unwrap();
        assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(p_series(0.0, 0.1, 0.0, &pol()), Err(Error::Domain(_))));
        assert!(matches!(p_series(1.0, 2.0, 0.0, &pol()), Err(Error::Domain(_))));
        assert!(matches!(
            eigen_residual(SpectralIndex::new(1, 1), 1e-4, 0.0, 1e-4),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn eigen_residual_constant_and_first_mode() {
        let z = eigen_residual(SpectralIndex::new(0, 0), 0.5, 0.3, 1e-4).unwrap();
        assert_eq!(z, 0.0);
        let e = eigen_residual(SpectralIndex::new(0, 1), 0.5, 0.3, 1e-4).unwrap();
        assert!(e < 1e-6, "{e}");
    }

    #[test]
    fn table_and_direct_agree() {
        let direct = SpectralSeries::new(0.2, SpectralWeight::Sub, &pol()).unwrap();
        let table = SpectralSeries::tabulated(0.2, SpectralWeight::Sub, &pol()).unwrap();
        for &(r, th) in &[(0.0, 0.0), (0.4, 1.0), (1.2, 3.0), (1.5, 2.0)] {
            let a = direct.eval(r, th).unwrap();
            let b = table.eval(r, th).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs(), "{r} {th}: {a} {b}");
        }
    }

    #[test]
    fn fiber_average_matches_quotient_kernel() {
        let (t, r) = (0.4, 0.6);
        let a = q_tilde_fiber_average(t, r, 64, &pol()).unwrap();
        let b = q_tilde(t, r, &pol()).unwrap();
        assert!((a - b).abs() < 1e-12 * b);
    }
}

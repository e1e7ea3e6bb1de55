//! C ABI for `hopf-heat`.
//!
//! Every fallible function returns an [`HhStatus`] and writes its result
//! through an out-pointer. On failure, [`hh_last_error`] gives a message for
//! the calling thread. Objects ([`HhPolicy`], [`HhEmbedding`]) are opaque and
//! must be released with their `_free` function. A null policy pointer means
//! the default policy. Panics never cross the boundary; they surface as
//! `HH_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hopf_heat::kernels::{
    eigen_term, p_integral, p_series, q_eval, q_of_distance, q_tilde, EvalPolicy, SpectralIndex,
};
use hopf_heat::rigidity::{select_base_points, EmbeddingKind, EmbeddingModel};
use hopf_heat::su2::{haar_sample, pair_coords, GroupElement, HaarGrid};
use hopf_heat::verify::{run_suite, SuiteConfig, SuiteName};
use hopf_heat::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HhStatus {
    Ok = 0,
    Domain = 1,
    NonConvergence = 2,
    Conditioning = 3,
    Config = 4,
    Io = 5,
    NullPointer = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HhEmbeddingKind {
    /// Into the unit sphere of R^4.
    S3 = 0,
    /// Into the unit sphere of R^3, constant on fibers.
    S2 = 1,
}

/// Numerical policy (tolerance, representation switch, quadrature sizes).
pub struct HhPolicy {
    inner: EvalPolicy,
}

/// A fitted embedding model.
pub struct HhEmbedding {
    inner: EmbeddingModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HhStatus {
    match e {
        Error::Domain(_) => HhStatus::Domain,
        Error::NonConvergence(_) => HhStatus::NonConvergence,
        Error::Conditioning(_) => HhStatus::Conditioning,
        Error::Config(_) => HhStatus::Config,
        Error::Io(_) => HhStatus::Io,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), HhStatus>) -> HhStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HhStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            HhStatus::Panic
        }
    }
}

fn fail(e: Error) -> HhStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> HhStatus {
    set_error(format!("null pointer: {what}"));
    HhStatus::NullPointer
}

unsafe fn policy_or_default(p: *const HhPolicy) -> EvalPolicy {
    if p.is_null() {
        EvalPolicy::default()
    } else {
        (*p).inner
    }
}

unsafe fn write_out(out: *mut f64, v: hopf_heat::Result<f64>) -> Result<(), HhStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = v.map_err(fail)?;
    Ok(())
}

unsafe fn read_element(q: *const f64) -> Result<GroupElement, HhStatus> {
    if q.is_null() {
        return Err(null("quaternion"));
    }
    let s = std::slice::from_raw_parts(q, 4);
    GroupElement::new(s[0], s[1], s[2], s[3]).map_err(fail)
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next `hh_*` call on the same thread.
#[no_mangle]
pub extern "C" fn hh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// New policy with default settings.
#[no_mangle]
pub extern "C" fn hh_policy_new() -> *mut HhPolicy {
    Box::into_raw(Box::new(HhPolicy {
        inner: EvalPolicy::default(),
    }))
}

/// # Safety
/// `p` must come from [`hh_policy_new`] and not have been freed; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn hh_policy_free(p: *mut HhPolicy) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

unsafe fn update_policy(p: *mut HhPolicy, f: impl FnOnce(&mut EvalPolicy)) -> HhStatus {
    guard(|| {
        if p.is_null() {
            return Err(null("policy"));
        }
        let mut next = (*p).inner;
        f(&mut next);
        next.validate().map_err(fail)?;
        (*p).inner = next;
        Ok(())
    })
}

/// # Safety
/// `p` must be a live policy.
#[no_mangle]
pub unsafe extern "C" fn hh_policy_set_tol(p: *mut HhPolicy, tol: f64) -> HhStatus {
    update_policy(p, |q| q.tol = tol)
}

/// # Safety
/// `p` must be a live policy.
#[no_mangle]
pub unsafe extern "C" fn hh_policy_set_t_switch(p: *mut HhPolicy, t_switch: f64) -> HhStatus {
    update_policy(p, |q| q.t_switch = t_switch)
}

/// # Safety
/// `p` must be a live policy.
#[no_mangle]
pub unsafe extern "C" fn hh_policy_set_quad_nodes(p: *mut HhPolicy, nodes: usize) -> HhStatus {
    update_policy(p, |q| q.quad_nodes = nodes)
}

/// # Safety
/// `p` must be a live policy.
#[no_mangle]
pub unsafe extern "C" fn hh_policy_set_y_cut(p: *mut HhPolicy, y_cut: f64) -> HhStatus {
    update_policy(p, |q| q.y_cut = y_cut)
}

/// Nodes per axis of the Haar product quadrature.
///
/// # Safety
/// `p` must be a live policy.
#[no_mangle]
pub unsafe extern "C" fn hh_policy_set_haar_grid(p: *mut HhPolicy, n: usize) -> HhStatus {
    update_policy(p, |q| q.haar_grid = HaarGrid::cube(n))
}

/// Subelliptic kernel by its eigenfunction series.
///
/// # Safety
/// `policy` is null or live; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hh_p_series(
    policy: *const HhPolicy,
    t: f64,
    r: f64,
    theta: f64,
    out: *mut f64,
) -> HhStatus {
    guard(|| write_out(out, p_series(t, r, theta, &policy_or_default(policy))))
}

/// Subelliptic kernel by the line integral over the round kernel.
///
/// # Safety
/// `policy` is null or live; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hh_p_integral(
    policy: *const HhPolicy,
    t: f64,
    r: f64,
    theta: f64,
    out: *mut f64,
) -> HhStatus {
    guard(|| write_out(out, p_integral(t, r, theta, &policy_or_default(policy))))
}

/// `q(t, x)` for `x > -1`.
///
/// # Safety
/// `policy` is null or live; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hh_q_eval(policy: *const HhPolicy, t: f64, x: f64, out: *mut f64) -> HhStatus {
    guard(|| write_out(out, q_eval(t, x, &policy_or_default(policy))))
}

/// Round kernel on S³ at distance `delta`.
///
/// # Safety
/// `policy` is null or live; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hh_q_t(policy: *const HhPolicy, t: f64, delta: f64, out: *mut f64) -> HhStatus {
    guard(|| write_out(out, q_of_distance(t, delta, &policy_or_default(policy))))
}

/// Quotient kernel on S².
///
/// # Safety
/// `policy` is null or live; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hh_q_tilde(policy: *const HhPolicy, t: f64, r: f64, out: *mut f64) -> HhStatus {
    guard(|| write_out(out, q_tilde(t, r, &policy_or_default(policy))))
}

/// Eigenterm `p_{k,n}(r, theta)`.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hh_eigen_term(k: u32, n: i32, r: f64, theta: f64, out: *mut f64) -> HhStatus {
    guard(|| write_out(out, eigen_term(SpectralIndex::new(k, n), r, theta)))
}

/// `(r, theta, delta)` of a pair of quaternions `(q0, q1, q2, q3)`, each
/// normalized first.
///
/// # Safety
/// `x` and `y` point to 4 doubles; `out` to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hh_pair_coords(x: *const f64, y: *const f64, out: *mut f64) -> HhStatus {
    guard(|| {
        let (a, b) = (read_element(x)?, read_element(y)?);
        if out.is_null() {
            return Err(null("out"));
        }
        let c = pair_coords(&a, &b);
        std::slice::from_raw_parts_mut(out, 3).copy_from_slice(&[c.r, c.theta, c.delta]);
        Ok(())
    })
}

/// Fit an embedding on `n` Haar samples drawn with `seed`.
///
/// # Safety
/// `out` is writable; on success `*out` must later go to [`hh_embedding_free`].
#[no_mangle]
pub unsafe extern "C" fn hh_embedding_new(
    kind: HhEmbeddingKind,
    n: usize,
    seed: u64,
    out: *mut *mut HhEmbedding,
) -> HhStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let kind = match kind {
            HhEmbeddingKind::S3 => EmbeddingKind::S3,
            HhEmbeddingKind::S2 => EmbeddingKind::S2,
        };
        let sample = haar_sample(n, seed).map_err(fail)?;
        let model = select_base_points(kind, &sample.points).map_err(fail)?;
        *out = Box::into_raw(Box::new(HhEmbedding { inner: model }));
        Ok(())
    })
}

/// # Safety
/// `e` must come from [`hh_embedding_new`]; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn hh_embedding_free(e: *mut HhEmbedding) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Dimension of the target space (4 or 3), or 0 for null.
///
/// # Safety
/// `e` is null or live.
#[no_mangle]
pub unsafe extern "C" fn hh_embedding_dim(e: *const HhEmbedding) -> usize {
    if e.is_null() {
        0
    } else {
        (*e).inner.kind.dim()
    }
}

/// Smallest eigenvalue of the model's Gram matrix.
///
/// # Safety
/// `e` is live; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hh_embedding_min_eigenvalue(e: *const HhEmbedding, out: *mut f64) -> HhStatus {
    guard(|| {
        if e.is_null() {
            return Err(null("embedding"));
        }
        write_out(out, Ok((*e).inner.min_eigenvalue))
    })
}

/// Sample indices of the base points; `len` must be at least the dimension.
///
/// # Safety
/// `e` is live; `out` has room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn hh_embedding_base_ids(e: *const HhEmbedding, out: *mut usize, len: usize) -> HhStatus {
    guard(|| {
        if e.is_null() || out.is_null() {
            return Err(null("embedding or out"));
        }
        let ids = &(*e).inner.base_ids;
        if len < ids.len() {
            return Err(fail(Error::Domain(format!("need room for {} ids, got {len}", ids.len()))));
        }
        std::slice::from_raw_parts_mut(out, ids.len()).copy_from_slice(ids);
        Ok(())
    })
}

/// Image of the quaternion `q` (4 doubles, normalized first; zero or
/// non-finite input is a domain error); writes `dim` doubles.
///
/// # Safety
/// `e` is live; `q` points to 4 doubles; `out` has room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn hh_embedding_embed(
    e: *const HhEmbedding,
    q: *const f64,
    out: *mut f64,
    len: usize,
) -> HhStatus {
    guard(|| {
        if e.is_null() || out.is_null() {
            return Err(null("embedding or out"));
        }
        let x = read_element(q)?;
        let model = &(*e).inner;
        if len < model.kind.dim() {
            return Err(fail(Error::Domain(format!(
                "output needs {} values, got {len}",
                model.kind.dim()
            ))));
        }
        let v = model.embed(&x);
        std::slice::from_raw_parts_mut(out, v.len()).copy_from_slice(&v);
        Ok(())
    })
}

/// Run a verification suite. Writes the JSON report to `*report` (release
/// with [`hh_string_free`]) and whether every check passed to `*passed`.
///
/// # Safety
/// `suite` is a NUL-terminated string; `policy` is null or live; `report`
/// and `passed` are writable.
#[no_mangle]
pub unsafe extern "C" fn hh_verify(
    suite: *const c_char,
    seed: u64,
    policy: *const HhPolicy,
    report: *mut *mut c_char,
    passed: *mut bool,
) -> HhStatus {
    guard(|| {
        if suite.is_null() || report.is_null() || passed.is_null() {
            return Err(null("suite, report or passed"));
        }
        *report = ptr::null_mut();
        let name = CStr::from_ptr(suite)
            .to_str()
            .map_err(|_| fail(Error::Config("suite name is not UTF-8".into())))?;
        let mut cfg = SuiteConfig::new(name.parse::<SuiteName>().map_err(fail)?, seed);
        cfg.policy = policy_or_default(policy);
        let rep = run_suite(&cfg).map_err(fail)?;
        let json = rep.to_json().map_err(fail)?;
        *passed = rep.passed();
        *report = CString::new(json)
            .map_err(|e| fail(Error::Io(e.to_string())))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn hh_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

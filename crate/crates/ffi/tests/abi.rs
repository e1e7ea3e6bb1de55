use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use hopf_heat_ffi::*;

fn last_error() -> String {
    let p = hh_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn kernel_values_and_errors() {
    let mut v = 0.0;
    let mut w = 0.0;
    unsafe {
        assert_eq!(hh_p_series(ptr::null(), 0.3, 0.4, 1.2, &mut v), HhStatus::Ok);
        assert_eq!(hh_p_integral(ptr::null(), 0.3, 0.4, 1.2, &mut w), HhStatus::Ok);
        assert!((v - w).abs() <= 1e-8 * v);
        assert!(hh_last_error().is_null());

        assert_eq!(hh_q_eval(ptr::null(), 1.0, -1.0, &mut v), HhStatus::Domain);
        assert!(last_error().contains("x > -1"));
        assert_eq!(hh_q_t(ptr::null(), 0.5, 0.0, &mut v), HhStatus::Ok);
        assert_eq!(hh_q_tilde(ptr::null(), 1.0, 0.0, &mut w), HhStatus::Ok);
        assert!(v > 0.0 && w > 1.0);
        assert_eq!(hh_eigen_term(0, 1, 0.0, 0.0, &mut v), HhStatus::Ok);
        assert_eq!(v, 4.0);
        assert_eq!(hh_p_series(ptr::null(), 1.0, 0.0, 0.0, ptr::null_mut()), HhStatus::NullPointer);
    }
}

#[test]
fn policy_round_trip() {
    let p = hh_policy_new();
    let mut a = 0.0;
    let mut b = 0.0;
    unsafe {
        assert_eq!(hh_policy_set_tol(p, 0.0), HhStatus::Config);
        assert_eq!(hh_policy_set_tol(p, 1e-10), HhStatus::Ok);
        assert_eq!(hh_policy_set_quad_nodes(p, 800), HhStatus::Ok);
        assert_eq!(hh_policy_set_haar_grid(p, 1), HhStatus::Config);
        assert_eq!(hh_policy_set_t_switch(p, 0.4), HhStatus::Ok);
        assert_eq!(hh_policy_set_y_cut(p, 14.0), HhStatus::Ok);
        assert_eq!(hh_p_integral(p, 0.2, 0.3, 0.5, &mut a), HhStatus::Ok);
        assert_eq!(hh_p_series(ptr::null(), 0.2, 0.3, 0.5, &mut b), HhStatus::Ok);
        assert!((a - b).abs() < 1e-9 * b);
        assert_eq!(hh_policy_set_tol(ptr::null_mut(), 1e-10), HhStatus::NullPointer);
        hh_policy_free(p);
        hh_policy_free(ptr::null_mut());
    }
}

#[test]
fn embeddings() {
    let mut e = ptr::null_mut();
    unsafe {
        assert_eq!(hh_embedding_new(HhEmbeddingKind::S2, 10, 1, &mut e), HhStatus::Domain);
        assert!(e.is_null());
        assert_eq!(hh_embedding_new(HhEmbeddingKind::S2, 100, 1, &mut e), HhStatus::Ok);
        assert_eq!(hh_embedding_dim(e), 3);
        let mut eig = 0.0;
        assert_eq!(hh_embedding_min_eigenvalue(e, &mut eig), HhStatus::Ok);
        assert!(eig > 1e-6);
        let mut ids = [0usize; 3];
        assert_eq!(hh_embedding_base_ids(e, ids.as_mut_ptr(), 2), HhStatus::Domain);
        assert_eq!(hh_embedding_base_ids(e, ids.as_mut_ptr(), 3), HhStatus::Ok);
        assert_eq!(ids[0], 0);

        let x = [0.6, 0.0, 0.0, 0.8];
        let y = [1.0, 0.0, 0.0, 0.0];
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        assert_eq!(hh_embedding_embed(e, x.as_ptr(), a.as_mut_ptr(), 3), HhStatus::Ok);
        assert_eq!(hh_embedding_embed(e, y.as_ptr(), b.as_mut_ptr(), 3), HhStatus::Ok);
        // same fiber, same image
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-12);
        }
        let bad = [0.0; 4];
        assert_eq!(hh_embedding_embed(e, bad.as_ptr(), a.as_mut_ptr(), 3), HhStatus::Domain);

        let mut c = [0.0; 3];
        assert_eq!(hh_pair_coords(x.as_ptr(), y.as_ptr(), c.as_mut_ptr()), HhStatus::Ok);
        assert!(c[0].abs() < 1e-15 && (c[2] - c[1]).abs() < 1e-15);
        hh_embedding_free(e);
    }
}

#[test]
fn verify_suite_report() {
    let name = CString::new("submersion").unwrap();
    let mut report = ptr::null_mut();
    let mut passed = false;
    unsafe {
        assert_eq!(hh_verify(name.as_ptr(), 5, ptr::null(), &mut report, &mut passed), HhStatus::Ok);
        assert!(passed);
        let text = CStr::from_ptr(report).to_str().unwrap().to_owned();
        hh_string_free(report);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["schema"], "hopf-heat/report/v1");

        let bogus = CString::new("bogus").unwrap();
        assert_eq!(hh_verify(bogus.as_ptr(), 5, ptr::null(), &mut report, &mut passed), HhStatus::Config);
        assert!(report.is_null());
    }
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok()
}

#[test]
fn header_is_valid_c() {
    if !have_cc() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let header = crate_dir().join("include/hopf_heat.h");
    let out = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Wextra", "-std=c99", "-x", "c"])
        .arg(&header)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

/// The static library next to this test binary, if cargo built it.
fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("libhopf_heat_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn c_program_links_and_runs() {
    let Some(lib) = static_lib().filter(|_| have_cc()) else {
        eprintln!("static library or C compiler unavailable; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let include = crate_dir().join("include");
    let src = crate_dir().join("tests/c/smoke.c");
    let out = Command::new("cc")
        .args(["-std=c99", "-O1", "-I"])
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(Path::new(&exe)).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
}

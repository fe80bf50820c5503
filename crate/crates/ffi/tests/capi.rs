use std::ffi::{c_void, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use stodet_ffi::*;

fn config(num_samples: u64, seed: u64, num_streams: usize) -> StodetConfig {
    StodetConfig {
        num_samples,
        seed,
        num_streams,
        q_sigma: 1.0,
    }
}

fn empty_estimate() -> StodetEstimate {
    StodetEstimate {
        log_mean: f64::NAN,
        mean: f64::NAN,
        std_error: f64::NAN,
        log_std_error: f64::NAN,
        n_samples: 0,
        target: StodetTarget::InverseAbsDet,
        heavy_tail: false,
        low_count: false,
    }
}

fn last_error() -> String {
    let p = stodet_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

struct Matrix(*mut StodetMatrix);

impl Drop for Matrix {
    fn drop(&mut self) {
        unsafe { stodet_matrix_free(self.0) }
    }
}

fn matrix(build: impl FnOnce(*mut *mut StodetMatrix) -> StodetStatus) -> Matrix {
    let mut m = ptr::null_mut();
    assert_eq!(build(&mut m), StodetStatus::Ok);
    assert!(!m.is_null());
    Matrix(m)
}

#[test]
fn scaled_identity_estimates() {
    let m = matrix(|out| unsafe { stodet_matrix_scaled_identity(5, 2.0, out) });
    assert_eq!(unsafe { stodet_matrix_dim(m.0) }, 5);
    let cfg = config(100, 3, 1);
    let mut est = empty_estimate();

    let st = unsafe { stodet_estimate(m.0, StodetEstimator::SphereInvDet, &cfg, &mut est) };
    assert_eq!(st, StodetStatus::Ok);
    assert!((est.mean - 0.03125).abs() < 1e-12 && est.std_error < 1e-12);
    assert_eq!(est.target, StodetTarget::InverseAbsDet);
    assert_eq!(est.n_samples, 100);

    let st = unsafe { stodet_estimate(m.0, StodetEstimator::InverseSolveDet, &cfg, &mut est) };
    assert_eq!(st, StodetStatus::Ok);
    assert!((est.mean - 32.0).abs() < 1e-12);
    assert_eq!(est.target, StodetTarget::AbsDet);

    let mut ld = 0.0;
    assert_eq!(unsafe { stodet_matrix_log_abs_det(m.0, &mut ld) }, StodetStatus::Ok);
    assert!((ld - 32f64.ln()).abs() < 1e-14);
}

#[test]
fn matrix_round_trip_and_text() {
    let entries = [1.0, 2.0, 3.0, 5.0];
    let m = matrix(|out| unsafe { stodet_matrix_new(2, entries.as_ptr(), out) });
    let mut back = [0.0; 4];
    assert_eq!(unsafe { stodet_matrix_entries(m.0, back.as_mut_ptr(), 4) }, StodetStatus::Ok);
    assert_eq!(back, entries);
    assert_eq!(
        unsafe { stodet_matrix_entries(m.0, back.as_mut_ptr(), 3) },
        StodetStatus::InvalidArgument
    );

    let text = CString::new("2\n1 2\n3 5\n").unwrap();
    let t = matrix(|out| unsafe { stodet_matrix_from_text(text.as_ptr(), out) });
    let mut a = 0.0;
    let mut b = 0.0;
    unsafe {
        stodet_matrix_log_abs_det(m.0, &mut a);
        stodet_matrix_log_abs_det(t.0, &mut b);
    }
    assert_eq!(a, b);
    assert!((a - 1f64.ln()).abs() < 1e-15);

    let bad = CString::new("2\n1 2\n").unwrap();
    let mut out = ptr::null_mut();
    let st = unsafe { stodet_matrix_from_text(bad.as_ptr(), &mut out) };
    assert_eq!(st, StodetStatus::InvalidArgument);
    assert!(out.is_null());
    assert!(last_error().contains("line"));
}

#[test]
fn error_statuses() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { stodet_matrix_new(2, ptr::null(), &mut out) }, StodetStatus::NullPointer);
    assert_eq!(
        unsafe { stodet_matrix_gaussian_iid(3, 1, ptr::null_mut()) },
        StodetStatus::NullPointer
    );
    assert_eq!(unsafe { stodet_matrix_orthogonal(0, 1, &mut out) }, StodetStatus::InvalidArgument);
    assert_eq!(
        unsafe { stodet_matrix_ill_conditioned(3, 0.5, 1, &mut out) },
        StodetStatus::InvalidArgument
    );
    let nan = [f64::NAN];
    assert_eq!(unsafe { stodet_matrix_new(1, nan.as_ptr(), &mut out) }, StodetStatus::InvalidArgument);

    let singular = [1.0, 2.0, 2.0, 4.0];
    let m = matrix(|out| unsafe { stodet_matrix_new(2, singular.as_ptr(), out) });
    let mut est = empty_estimate();
    let st = unsafe {
        stodet_estimate(m.0, StodetEstimator::InverseSolveDet, &config(10, 1, 1), &mut est)
    };
    assert_eq!(st, StodetStatus::Singular);
    assert!(last_error().contains("singular"));

    let id = matrix(|out| unsafe { stodet_matrix_scaled_identity(2, 1.0, out) });
    let st = unsafe { stodet_estimate(id.0, StodetEstimator::SphereInvDet, &config(10, 1, 3), &mut est) };
    assert_eq!(st, StodetStatus::InvalidArgument);
    let st = unsafe { stodet_estimate(id.0, StodetEstimator::SphereInvDet, ptr::null(), &mut est) };
    assert_eq!(st, StodetStatus::NullPointer);
    assert_eq!(unsafe { stodet_matrix_dim(ptr::null()) }, 0);
    unsafe { stodet_matrix_free(ptr::null_mut()) };
}

#[test]
fn convergence_trace() {
    let m = matrix(|out| unsafe { stodet_matrix_gaussian_iid(10, 4, out) });
    let mut est = empty_estimate();
    let mut trace = ptr::null_mut();
    let cfg = config(10_000, 5, 4);
    let st = unsafe {
        stodet_convergence(m.0, StodetEstimator::InverseSolveDet, &cfg, 1000, &mut est, &mut trace)
    };
    assert_eq!(st, StodetStatus::Ok);
    assert_eq!(unsafe { stodet_trace_len(trace) }, 10);
    let (mut idx, mut lm) = (0u64, 0.0);
    assert_eq!(unsafe { stodet_trace_get(trace, 9, &mut idx, &mut lm) }, StodetStatus::Ok);
    assert_eq!(idx, 10_000);
    assert_eq!(lm, est.log_mean);
    assert_eq!(
        unsafe { stodet_trace_get(trace, 10, &mut idx, &mut lm) },
        StodetStatus::InvalidArgument
    );
    unsafe { stodet_trace_free(trace) };

    let mut trace = ptr::null_mut();
    let st = unsafe {
        stodet_convergence(m.0, StodetEstimator::InverseSolveDet, &cfg, 0, &mut est, &mut trace)
    };
    assert_eq!(st, StodetStatus::InvalidArgument);
}

unsafe extern "C" fn apply_dense(ctx: *mut c_void, x: *const f64, out: *mut f64, n: usize) {
    let a = unsafe { &*(ctx as *const Vec<f64>) };
    let x = unsafe { std::slice::from_raw_parts(x, n) };
    let out = unsafe { std::slice::from_raw_parts_mut(out, n) };
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..n).map(|j| a[i * n + j] * x[j]).sum();
    }
}

#[test]
fn callback_operator_matches_dense_path() {
    let m = matrix(|out| unsafe { stodet_matrix_gaussian_iid(4, 8, out) });
    let mut entries = vec![0.0; 16];
    unsafe { stodet_matrix_entries(m.0, entries.as_mut_ptr(), 16) };
    let ctx = &mut entries as *mut Vec<f64> as *mut c_void;

    let cfg = config(4000, 9, 4);
    let mut via_cb = empty_estimate();
    let mut dense = empty_estimate();
    let st = unsafe {
        stodet_estimate_operator(
            4,
            Some(apply_dense),
            ctx,
            false,
            true,
            StodetEstimator::SphereInvDet,
            &cfg,
            &mut via_cb,
        )
    };
    assert_eq!(st, StodetStatus::Ok);
    unsafe { stodet_estimate(m.0, StodetEstimator::SphereInvDet, &cfg, &mut dense) };
    assert_eq!(via_cb, dense);

    // Multiple streams need a thread-safe callback.
    let st = unsafe {
        stodet_estimate_operator(
            4,
            Some(apply_dense),
            ctx,
            false,
            false,
            StodetEstimator::SphereInvDet,
            &cfg,
            &mut via_cb,
        )
    };
    assert_eq!(st, StodetStatus::InvalidArgument);

    let st = unsafe {
        stodet_estimate_operator(
            4,
            None,
            ctx,
            false,
            true,
            StodetEstimator::SphereInvDet,
            &cfg,
            &mut via_cb,
        )
    };
    assert_eq!(st, StodetStatus::NullPointer);

    let st = unsafe {
        stodet_estimate_operator(
            4,
            Some(apply_dense),
            ctx,
            true,
            true,
            StodetEstimator::InverseSolveDet,
            &cfg,
            &mut via_cb,
        )
    };
    assert_eq!(st, StodetStatus::InvalidArgument);
}

#[test]
fn header_is_current_and_declares_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/stodet.h"))
        .unwrap();
    for name in [
        "stodet_matrix_new",
        "stodet_matrix_free",
        "stodet_estimate",
        "stodet_estimate_operator",
        "stodet_convergence",
        "stodet_trace_get",
        "stodet_last_error_message",
        "typedef struct StodetMatrix StodetMatrix;",
        "STODET_STATUS_SINGULAR = 3",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles `tests/c/smoke.c` against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler ({cc})");
        return;
    }
    // target/<profile>/deps/capi-<hash> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libstodet_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());

    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile_dir();
    let bin = dir.join("smoke");
    let status = Command::new(&cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(
        out.status.success(),
        "smoke failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok"));
    let _ = std::fs::remove_dir_all(&dir);
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("stodet-ffi-smoke-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

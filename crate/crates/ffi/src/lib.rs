//! C ABI over the `stodet` estimators.
//!
//! Matrices and traces are opaque heap handles owned by the caller and
//! released with their `*_free` function. Every fallible function returns a
//! [`StodetStatus`]; on failure a message is available from
//! [`stodet_last_error_message`] on the same thread. Panics never cross the
//! boundary, they surface as [`StodetStatus::Panic`].
//!
//! The header `include/stodet.h` is generated by `build.rs`.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use stodet::ensembles::{generate, EnsembleSpec};
use stodet::estimators::{
    det_via_inverse_solves, inv_det_gaussian_ratio, inv_det_importance, inv_det_sphere,
    EstimateResult, EstimatorConfig, IsotropicGaussianPair, LinearOperator, OperatorKind, Target,
};
use stodet::linalg::{lu_factorize, parse_matrix, DenseMatrix};
use stodet::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StodetStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    Singular = 3,
    Numerical = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StodetEstimator {
    /// `‖A s‖⁻ⁿ`, estimates `|det A|⁻¹`.
    SphereInvDet = 0,
    /// `‖A⁻¹ s‖⁻ⁿ`, estimates `|det A|`.
    InverseSolveDet = 1,
    /// `N(Ax)/N(x)`, estimates `|det A|⁻¹`.
    GaussianRatioInvDet = 2,
    /// `p(Ax)/q(x)` with `p = N(0, I)`, `q = N(0, q_sigma² I)`.
    ImportanceInvDet = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StodetTarget {
    InverseAbsDet = 0,
    AbsDet = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StodetConfig {
    pub num_samples: u64,
    pub seed: u64,
    /// Must divide `num_samples`.
    pub num_streams: usize,
    /// Proposal standard deviation for `STODET_ESTIMATOR_IMPORTANCE_INV_DET`;
    /// ignored otherwise.
    pub q_sigma: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StodetEstimate {
    pub log_mean: f64,
    /// `exp(log_mean)`; may be infinite when the estimate overflows.
    pub mean: f64,
    pub std_error: f64,
    pub log_std_error: f64,
    pub n_samples: u64,
    pub target: StodetTarget,
    pub heavy_tail: bool,
    pub low_count: bool,
}

/// Writes `out = M x` for vectors of length `n`.
pub type StodetApplyFn = Option<unsafe extern "C" fn(ctx: *mut c_void, x: *const f64, out: *mut f64, n: usize)>;

/// Opaque dense matrix.
pub struct StodetMatrix {
    inner: DenseMatrix,
}

/// Opaque convergence trace.
pub struct StodetTrace {
    points: Vec<(u64, f64)>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> StodetStatus {
    match e {
        Error::SingularMatrix { .. } | Error::SingularDirection { .. } => StodetStatus::Singular,
        Error::UnsupportedSample { .. } | Error::NonFiniteWeight(_) | Error::EmptyAccumulator => {
            StodetStatus::Numerical
        }
        Error::DimensionMismatch { .. }
        | Error::InvalidMatrix(_)
        | Error::InvalidConfig(_)
        | Error::InvalidSpec(_)
        | Error::Parse { .. } => StodetStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (StodetStatus, String)>) -> StodetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StodetStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside stodet");
            StodetStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (StodetStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (StodetStatus, String) {
    (StodetStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (StodetStatus, String) {
    (StodetStatus::InvalidArgument, msg.into())
}

fn put_matrix(out: *mut *mut StodetMatrix, m: DenseMatrix) {
    // SAFETY: callers check `out` for null before building the matrix.
    unsafe { *out = Box::into_raw(Box::new(StodetMatrix { inner: m })) };
}

fn new_matrix_with(
    out: *mut *mut StodetMatrix,
    build: impl FnOnce() -> Result<DenseMatrix, (StodetStatus, String)>,
) -> StodetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: checked non-null above.
        unsafe { *out = ptr::null_mut() };
        put_matrix(out, build()?);
        Ok(())
    })
}

fn to_config(config: &StodetConfig) -> EstimatorConfig {
    EstimatorConfig::new(config.num_samples, config.seed).with_streams(config.num_streams)
}

fn to_estimate(r: &EstimateResult) -> StodetEstimate {
    StodetEstimate {
        log_mean: r.log_mean,
        mean: r.mean,
        std_error: r.std_error,
        log_std_error: r.log_std_error(),
        n_samples: r.n_samples,
        target: match r.target {
            Target::InverseAbsDet => StodetTarget::InverseAbsDet,
            Target::AbsDet => StodetTarget::AbsDet,
        },
        heavy_tail: r.heavy_tail,
        low_count: r.low_count,
    }
}

fn run_estimator(
    m: &DenseMatrix,
    estimator: StodetEstimator,
    config: &StodetConfig,
    trace_stride: u64,
) -> Result<EstimateResult, Error> {
    let cfg = to_config(config).with_trace_stride(trace_stride);
    match estimator {
        StodetEstimator::SphereInvDet => inv_det_sphere(m, &cfg),
        StodetEstimator::InverseSolveDet => det_via_inverse_solves(m, &cfg),
        StodetEstimator::GaussianRatioInvDet => inv_det_gaussian_ratio(m, &cfg),
        StodetEstimator::ImportanceInvDet => {
            inv_det_importance(m, &IsotropicGaussianPair::new(1.0, config.q_sigma)?, &cfg)
        }
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn stodet_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn stodet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `n * n` row-major entries into a new matrix.
///
/// # Safety
/// `entries` must point to `n * n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stodet_matrix_new(
    n: usize,
    entries: *const f64,
    out: *mut *mut StodetMatrix,
) -> StodetStatus {
    new_matrix_with(out, || {
        if entries.is_null() {
            return Err(null("entries"));
        }
        let len = n.checked_mul(n).ok_or_else(|| invalid("n * n overflows"))?;
        // SAFETY: caller guarantees `entries` holds `n * n` doubles.
        let data = unsafe { std::slice::from_raw_parts(entries, len) }.to_vec();
        DenseMatrix::new(n, data).map_err(core_err)
    })
}

/// Parses the text matrix format (dimension line, then rows).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stodet_matrix_from_text(
    text: *const c_char,
    out: *mut *mut StodetMatrix,
) -> StodetStatus {
    new_matrix_with(out, || {
        if text.is_null() {
            return Err(null("text"));
        }
        // SAFETY: caller guarantees a NUL-terminated string.
        let s = unsafe { CStr::from_ptr(text) }
            .to_str()
            .map_err(|_| invalid("text is not UTF-8"))?;
        parse_matrix(s).map_err(core_err)
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stodet_matrix_gaussian_iid(
    n: usize,
    seed: u64,
    out: *mut *mut StodetMatrix,
) -> StodetStatus {
    new_matrix_with(out, || generate(&EnsembleSpec::gaussian_iid(n, seed)).map_err(core_err))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stodet_matrix_orthogonal(
    n: usize,
    seed: u64,
    out: *mut *mut StodetMatrix,
) -> StodetStatus {
    new_matrix_with(out, || generate(&EnsembleSpec::orthogonal(n, seed)).map_err(core_err))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stodet_matrix_scaled_identity(
    n: usize,
    scale: f64,
    out: *mut *mut StodetMatrix,
) -> StodetStatus {
    new_matrix_with(out, || generate(&EnsembleSpec::scaled_identity(n, scale)).map_err(core_err))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stodet_matrix_ill_conditioned(
    n: usize,
    cond: f64,
    seed: u64,
    out: *mut *mut StodetMatrix,
) -> StodetStatus {
    new_matrix_with(out, || {
        generate(&EnsembleSpec::ill_conditioned(n, cond, seed)).map_err(core_err)
    })
}

/// Releases a matrix. Null is ignored.
///
/// # Safety
/// `m` must come from a `stodet_matrix_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn stodet_matrix_free(m: *mut StodetMatrix) {
    if !m.is_null() {
        // SAFETY: caller passes a pointer obtained from Box::into_raw.
        drop(unsafe { Box::from_raw(m) });
    }
}

/// Dimension `n`, or 0 for null.
///
/// # Safety
/// `m` must be null or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn stodet_matrix_dim(m: *const StodetMatrix) -> usize {
    // SAFETY: caller passes null or a live handle.
    unsafe { m.as_ref() }.map_or(0, |m| m.inner.dim())
}

/// Copies the row-major entries into `out`, which must hold `len >= n * n`
/// doubles.
///
/// # Safety
/// `m` must be a live handle and `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn stodet_matrix_entries(
    m: *const StodetMatrix,
    out: *mut f64,
    len: usize,
) -> StodetStatus {
    guard(|| {
        // SAFETY: caller passes null or a live handle.
        let m = unsafe { m.as_ref() }.ok_or_else(|| null("matrix"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let src = m.inner.as_slice();
        if len < src.len() {
            return Err(invalid(format!("buffer holds {len} doubles, need {}", src.len())));
        }
        // SAFETY: `out` is writable for `len >= src.len()` doubles.
        unsafe { ptr::copy_nonoverlapping(src.as_ptr(), out, src.len()) };
        Ok(())
    })
}

/// Exact `log |det A|` from an LU factorization.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn stodet_matrix_log_abs_det(
    m: *const StodetMatrix,
    out: *mut f64,
) -> StodetStatus {
    guard(|| {
        // SAFETY: caller passes null or a live handle.
        let m = unsafe { m.as_ref() }.ok_or_else(|| null("matrix"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = lu_factorize(&m.inner).map_err(core_err)?.log_abs_det();
        // SAFETY: checked non-null.
        unsafe { *out = v };
        Ok(())
    })
}

/// Runs one estimator against a dense matrix.
///
/// # Safety
/// `m` must be a live handle; `config` readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn stodet_estimate(
    m: *const StodetMatrix,
    estimator: StodetEstimator,
    config: *const StodetConfig,
    out: *mut StodetEstimate,
) -> StodetStatus {
    guard(|| {
        // SAFETY: caller passes null or valid pointers.
        let m = unsafe { m.as_ref() }.ok_or_else(|| null("matrix"))?;
        let config = unsafe { config.as_ref() }.ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = run_estimator(&m.inner, estimator, config, 0).map_err(core_err)?;
        // SAFETY: checked non-null.
        unsafe { *out = to_estimate(&r) };
        Ok(())
    })
}

/// Runs an estimator and records the running log-estimate every
/// `trace_stride` samples (and at the last sample).
///
/// # Safety
/// `m` must be a live handle; `config` readable; `out` and `trace` writable.
#[no_mangle]
pub unsafe extern "C" fn stodet_convergence(
    m: *const StodetMatrix,
    estimator: StodetEstimator,
    config: *const StodetConfig,
    trace_stride: u64,
    out: *mut StodetEstimate,
    trace: *mut *mut StodetTrace,
) -> StodetStatus {
    guard(|| {
        // SAFETY: caller passes null or valid pointers.
        let m = unsafe { m.as_ref() }.ok_or_else(|| null("matrix"))?;
        let config = unsafe { config.as_ref() }.ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if trace.is_null() {
            return Err(null("trace"));
        }
        if trace_stride == 0 {
            return Err(invalid("trace_stride must be at least 1"));
        }
        // SAFETY: checked non-null.
        unsafe { *trace = ptr::null_mut() };
        let r = run_estimator(&m.inner, estimator, config, trace_stride).map_err(core_err)?;
        let points = r
            .trace
            .iter()
            .flatten()
            .map(|p| (p.sample_index, p.running_log_mean))
            .collect();
        // SAFETY: checked non-null.
        unsafe {
            *out = to_estimate(&r);
            *trace = Box::into_raw(Box::new(StodetTrace { points }));
        }
        Ok(())
    })
}

/// Number of trace points, or 0 for null.
///
/// # Safety
/// `t` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn stodet_trace_len(t: *const StodetTrace) -> usize {
    // SAFETY: caller passes null or a live handle.
    unsafe { t.as_ref() }.map_or(0, |t| t.points.len())
}

/// Reads trace point `i`.
///
/// # Safety
/// `t` must be a live trace handle; `sample_index` and `running_log_mean`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn stodet_trace_get(
    t: *const StodetTrace,
    i: usize,
    sample_index: *mut u64,
    running_log_mean: *mut f64,
) -> StodetStatus {
    guard(|| {
        // SAFETY: caller passes null or a live handle.
        let t = unsafe { t.as_ref() }.ok_or_else(|| null("trace"))?;
        if sample_index.is_null() || running_log_mean.is_null() {
            return Err(null("output pointer"));
        }
        let (idx, lm) = *t
            .points
            .get(i)
            .ok_or_else(|| invalid(format!("index {i} out of range ({})", t.points.len())))?;
        // SAFETY: checked non-null.
        unsafe {
            *sample_index = idx;
            *running_log_mean = lm;
        }
        Ok(())
    })
}

/// # Safety
/// `t` must come from [`stodet_convergence`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn stodet_trace_free(t: *mut StodetTrace) {
    if !t.is_null() {
        // SAFETY: caller passes a pointer obtained from Box::into_raw.
        drop(unsafe { Box::from_raw(t) });
    }
}

struct CallbackOperator {
    n: usize,
    apply: unsafe extern "C" fn(*mut c_void, *const f64, *mut f64, usize),
    ctx: *mut c_void,
    kind: OperatorKind,
}

// SAFETY: with more than one stream the caller has declared the callback
// thread safe; with one stream the estimator calls it from a single thread.
unsafe impl Sync for CallbackOperator {}

impl LinearOperator for CallbackOperator {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        // SAFETY: both slices have length `n`, as the callback contract states.
        unsafe { (self.apply)(self.ctx, x.as_ptr(), out.as_mut_ptr(), self.n) }
    }

    fn kind(&self) -> OperatorKind {
        self.kind
    }
}

/// Matrix-free estimation through a caller-supplied `apply` callback.
///
/// Supported estimators are `SPHERE_INV_DET`, `GAUSSIAN_RATIO_INV_DET` and
/// `IMPORTANCE_INV_DET`. When `is_inverse` is true the callback applies
/// `A⁻¹`, so the estimates target `|det A|` instead. `num_streams > 1`
/// requires `thread_safe`: the callback is then invoked concurrently.
///
/// # Safety
/// `apply` must write `n` doubles to `out` and must be safe to call with
/// `ctx` for the duration of this function; `config` readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn stodet_estimate_operator(
    n: usize,
    apply: StodetApplyFn,
    ctx: *mut c_void,
    is_inverse: bool,
    thread_safe: bool,
    estimator: StodetEstimator,
    config: *const StodetConfig,
    out: *mut StodetEstimate,
) -> StodetStatus {
    guard(|| {
        let apply = apply.ok_or_else(|| null("apply"))?;
        // SAFETY: caller passes null or a valid pointer.
        let config = unsafe { config.as_ref() }.ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        if config.num_streams > 1 && !thread_safe {
            return Err(invalid("num_streams > 1 requires a thread-safe callback"));
        }
        let op = CallbackOperator {
            n,
            apply,
            ctx,
            kind: if is_inverse {
                OperatorKind::Inverse
            } else {
                OperatorKind::Forward
            },
        };
        let cfg = to_config(config);
        let r = match estimator {
            StodetEstimator::SphereInvDet => inv_det_sphere(&op, &cfg),
            StodetEstimator::GaussianRatioInvDet => inv_det_gaussian_ratio(&op, &cfg),
            StodetEstimator::ImportanceInvDet => IsotropicGaussianPair::new(1.0, config.q_sigma)
                .and_then(|pair| inv_det_importance(&op, &pair, &cfg)),
            StodetEstimator::InverseSolveDet => {
                return Err(invalid(
                    "INVERSE_SOLVE_DET needs a dense matrix; pass an inverse callback with SPHERE_INV_DET",
                ))
            }
        }
        .map_err(core_err)?;
        // SAFETY: checked non-null.
        unsafe { *out = to_estimate(&r) };
        Ok(())
    })
}

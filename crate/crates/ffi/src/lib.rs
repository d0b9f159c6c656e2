//! C interface to `ballot-core`.
//!
//! Every fallible function returns a [`BallotStatus`]; on failure a message is
//! available from [`ballot_last_error`] on the same thread. Datasets and run
//! traces are opaque handles owned by the caller and released with their
//! `_free` function. Matrices are passed row-major as `double` buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ballot_core::datagen::{make_centers, sample_ball_model, BallModelSpec, CenterKind, NoiseLaw};
use ballot_core::init::kmeanspp;
use ballot_core::io::load_dataset;
use ballot_core::model::centroid_update;
use ballot_core::rng::rng_from_seed;
use ballot_core::transport::SinkhornParams;
use ballot_core::{run, Centroids, ClusterAssignment, Dataset, Error, RunConfig, RunTrace, Variant};
use ndarray::Array2;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BallotStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Unbalanced = 4,
    NonFinite = 5,
    Infeasible = 6,
    NonConvergence = 7,
    Parse = 8,
    Io = 9,
    Panic = 10,
}

/// Clustering algorithm.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BallotAlgo {
    /// Exact optimal-transport assignment.
    Exact = 0,
    /// Entropic transport followed by rounding.
    Entropic = 1,
    /// Unconstrained nearest-centroid assignment.
    Lloyd = 2,
    /// Balanced assignment by matching points to replicated centroids.
    Matching = 3,
}

/// Run parameters; obtain defaults from [`ballot_options_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct BallotOptions {
    pub term_eps: f64,
    pub max_iters: usize,
    /// Entropic regularization, used by `BALLOT_ALGO_ENTROPIC`.
    pub lambda: f64,
    /// Sinkhorn marginal tolerance, used by `BALLOT_ALGO_ENTROPIC`.
    pub marginal_tol: f64,
    pub max_sweeps: usize,
}

/// Opaque dataset handle.
pub struct BallotDataset(Dataset);

/// Opaque handle to the result of a clustering run.
pub struct BallotTrace(RunTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> BallotStatus {
    match err {
        Error::Dimension(_) => BallotStatus::Dimension,
        Error::NonFinite(_) => BallotStatus::NonFinite,
        Error::Unbalanced { .. } => BallotStatus::Unbalanced,
        Error::Infeasible { .. } => BallotStatus::Infeasible,
        Error::InvalidArgument(_) => BallotStatus::InvalidArgument,
        Error::SinkhornNonConvergence { .. } | Error::KernelRange { .. } => BallotStatus::NonConvergence,
        Error::Parse { .. } | Error::Json(_) => BallotStatus::Parse,
        Error::Io(_) => BallotStatus::Io,
    }
}

struct Fail(BallotStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(BallotStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> BallotStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            BallotStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            BallotStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, needed: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < needed {
        return Err(Fail(BallotStatus::Dimension, format!("{what} holds {len} values, {needed} needed")));
    }
    Ok(slice::from_raw_parts_mut(p, needed))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn write_centroids(mu: &Centroids, out: &mut [f64]) {
    for (dst, src) in out.iter_mut().zip(mu.view().iter()) {
        *dst = *src;
    }
}

/// Message describing the most recent failure on this thread, or null if the
/// last call succeeded. The pointer stays valid until the next call into this
/// library on the same thread.
#[no_mangle]
pub extern "C" fn ballot_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Default run parameters.
#[no_mangle]
pub extern "C" fn ballot_options_default() -> BallotOptions {
    let cfg = RunConfig::default();
    let sk = SinkhornParams::default();
    BallotOptions {
        term_eps: cfg.term_eps,
        max_iters: cfg.max_iters,
        lambda: sk.lambda,
        marginal_tol: sk.marginal_tol,
        max_sweeps: sk.max_sweeps,
    }
}

/// Build a dataset from `n * d` row-major coordinates. `labels` is either
/// null or `n` planted cluster indices in `0..k`.
///
/// # Safety
/// `points` must address `n * d` doubles and `labels`, when non-null, `n`
/// values. `out` must be a valid place to store the new handle.
#[no_mangle]
pub unsafe extern "C" fn ballot_dataset_new(
    points: *const f64,
    n: usize,
    d: usize,
    k: usize,
    labels: *const u32,
    out: *mut *mut BallotDataset,
) -> BallotStatus {
    guard(|| {
        if points.is_null() {
            return Err(null("points"));
        }
        let len = n.checked_mul(d).ok_or_else(|| Fail(BallotStatus::Dimension, "n * d overflows".into()))?;
        let coords = slice::from_raw_parts(points, len).to_vec();
        let pts = Array2::from_shape_vec((n, d), coords).map_err(|e| Fail(BallotStatus::Dimension, e.to_string()))?;
        let planted = if labels.is_null() {
            None
        } else {
            let labels = slice::from_raw_parts(labels, n).iter().map(|&l| l as usize).collect();
            Some(ClusterAssignment::new(labels, k)?)
        };
        store(out, BallotDataset(Dataset::new(pts, k, planted)?))
    })
}

/// Load a dataset CSV file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid place to store
/// the new handle.
#[no_mangle]
pub unsafe extern "C" fn ballot_dataset_load(path: *const c_char, out: *mut *mut BallotDataset) -> BallotStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(BallotStatus::InvalidArgument, "path is not UTF-8".into()))?;
        store(out, BallotDataset(load_dataset(path)?))
    })
}

/// Sample `n` points from `k` balls of unit radius around planted centers.
/// Centers lie on a segment for `k = 2` and an equilateral triangle for
/// `k = 3`, in both cases at pairwise distance `delta`; for larger `k` they
/// are Gaussian with standard deviation `delta`.
///
/// # Safety
/// `out` must be a valid place to store the new handle.
#[no_mangle]
pub unsafe extern "C" fn ballot_dataset_sample_ball(
    n: usize,
    d: usize,
    k: usize,
    delta: f64,
    seed: u64,
    out: *mut *mut BallotDataset,
) -> BallotStatus {
    guard(|| {
        let kind = match k {
            2 => CenterKind::Segment { delta },
            3 => CenterKind::Equilateral { delta },
            _ => CenterKind::Gaussian { scale: delta },
        };
        let (centers, _) = make_centers(kind, k, d, &mut rng_from_seed(seed))?;
        let data = sample_ball_model(&BallModelSpec { n, centers, noise: NoiseLaw::UniformBall, seed })?;
        store(out, BallotDataset(data))
    })
}

/// Release a dataset. Null is ignored.
///
/// # Safety
/// `data` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ballot_dataset_free(data: *mut BallotDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Number of points, or 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn ballot_dataset_n(data: *const BallotDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n())
}

/// Dimension, or 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn ballot_dataset_d(data: *const BallotDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.d())
}

/// Cluster count, or 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn ballot_dataset_k(data: *const BallotDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.k())
}

/// Write `k * d` k-means++ seeds into `centroids`.
///
/// # Safety
/// `data` must be a live dataset handle and `centroids` must address `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn ballot_kmeanspp(
    data: *const BallotDataset,
    seed: u64,
    centroids: *mut f64,
    len: usize,
) -> BallotStatus {
    guard(|| {
        let data = &borrow(data, "dataset")?.0;
        let out = out_slice(centroids, len, data.k() * data.d(), "centroids")?;
        write_centroids(&kmeanspp(data, data.k(), &mut rng_from_seed(seed))?, out);
        Ok(())
    })
}

/// Write the `k * d` means of the planted clusters into `centroids`.
///
/// # Safety
/// `data` must be a live dataset handle and `centroids` must address `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn ballot_planted_centroids(
    data: *const BallotDataset,
    centroids: *mut f64,
    len: usize,
) -> BallotStatus {
    guard(|| {
        let data = &borrow(data, "dataset")?.0;
        let planted = data
            .planted()
            .ok_or_else(|| Fail(BallotStatus::InvalidArgument, "dataset has no planted labels".into()))?;
        let out = out_slice(centroids, len, data.k() * data.d(), "centroids")?;
        write_centroids(&centroid_update(data, &planted.to_coupling())?, out);
        Ok(())
    })
}

/// Cluster `data` starting from the `k * d` row-major centroids `init`.
/// `options` may be null for defaults.
///
/// # Safety
/// `data` must be a live dataset handle, `init` must address `k * d`
/// doubles, `options` must be null or valid, and `out` must be a valid place
/// to store the new handle.
#[no_mangle]
pub unsafe extern "C" fn ballot_run(
    data: *const BallotDataset,
    init: *const f64,
    algo: BallotAlgo,
    options: *const BallotOptions,
    out: *mut *mut BallotTrace,
) -> BallotStatus {
    guard(|| {
        let data = &borrow(data, "dataset")?.0;
        if init.is_null() {
            return Err(null("init"));
        }
        let (k, d) = (data.k(), data.d());
        let mu = Array2::from_shape_vec((k, d), slice::from_raw_parts(init, k * d).to_vec())
            .map_err(|e| Fail(BallotStatus::Dimension, e.to_string()))?;
        let opts = options.as_ref().copied().unwrap_or_else(|| ballot_options_default());
        let cfg = RunConfig {
            term_eps: opts.term_eps,
            max_iters: opts.max_iters,
            variant: match algo {
                BallotAlgo::Exact => Variant::Exact,
                BallotAlgo::Entropic => Variant::Entropic,
                BallotAlgo::Lloyd => Variant::Lloyd,
                BallotAlgo::Matching => Variant::Matching,
            },
            sinkhorn: SinkhornParams {
                lambda: opts.lambda,
                marginal_tol: opts.marginal_tol,
                max_sweeps: opts.max_sweeps,
            },
        };
        store(out, BallotTrace(run(data, &Centroids::new(mu)?, &cfg)?))
    })
}

/// Release a trace. Null is ignored.
///
/// # Safety
/// `trace` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ballot_trace_free(trace: *mut BallotTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Iterations performed, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn ballot_trace_iterations(trace: *const BallotTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.iters())
}

/// Whether the run stopped because the centroids stopped moving.
///
/// # Safety
/// `trace` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn ballot_trace_converged(trace: *const BallotTrace) -> bool {
    trace
        .as_ref()
        .is_some_and(|t| t.0.termination == ballot_core::ballot::Termination::Converged)
}

/// Objective after the last iteration, or NaN for a null handle.
///
/// # Safety
/// `trace` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn ballot_trace_objective(trace: *const BallotTrace) -> f64 {
    trace
        .as_ref()
        .and_then(|t| t.0.iterations.last())
        .map_or(f64::NAN, |r| r.objective)
}

/// Write the `n` cluster labels, each in `0..k`.
///
/// # Safety
/// `trace` must be a live trace handle and `labels` must address `len`
/// values.
#[no_mangle]
pub unsafe extern "C" fn ballot_trace_labels(trace: *const BallotTrace, labels: *mut u32, len: usize) -> BallotStatus {
    guard(|| {
        let trace = &borrow(trace, "trace")?.0;
        let src = trace.assignment.labels();
        if labels.is_null() {
            return Err(null("labels"));
        }
        if len < src.len() {
            return Err(Fail(BallotStatus::Dimension, format!("labels holds {len} values, {} needed", src.len())));
        }
        for (dst, &l) in slice::from_raw_parts_mut(labels, src.len()).iter_mut().zip(src) {
            *dst = l as u32;
        }
        Ok(())
    })
}

/// Write the final `k * d` centroids.
///
/// # Safety
/// `trace` must be a live trace handle and `centroids` must address `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn ballot_trace_centroids(
    trace: *const BallotTrace,
    centroids: *mut f64,
    len: usize,
) -> BallotStatus {
    guard(|| {
        let trace = &borrow(trace, "trace")?.0;
        let mu = &trace.centroids;
        write_centroids(mu, out_slice(centroids, len, mu.k() * mu.d(), "centroids")?);
        Ok(())
    })
}

/// Serialize the trace as JSON into a new string released with
/// [`ballot_string_free`].
///
/// # Safety
/// `trace` must be a live trace handle and `out` a valid place to store the
/// string pointer.
#[no_mangle]
pub unsafe extern "C" fn ballot_trace_to_json(trace: *const BallotTrace, out: *mut *mut c_char) -> BallotStatus {
    guard(|| {
        let trace = &borrow(trace, "trace")?.0;
        if out.is_null() {
            return Err(null("output string"));
        }
        let text = CString::new(trace.to_json().to_string()).expect("JSON has no nul bytes");
        *out = text.into_raw();
        Ok(())
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ballot_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_core_error_maps_to_a_failure_status() {
        let errs = [
            Error::Dimension(String::new()),
            Error::NonFinite("x"),
            Error::Unbalanced { n: 3, k: 2 },
            Error::Infeasible { violation: 1.0, tol: 0.0 },
            Error::InvalidArgument(String::new()),
            Error::KernelRange { lambda: 1.0 },
            Error::Parse { line: 1, msg: String::new() },
            Error::Io(std::io::Error::other("x")),
        ];
        for e in &errs {
            assert_ne!(status_of(e), BallotStatus::Ok);
        }
    }

    #[test]
    fn panics_become_status_codes() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, BallotStatus::Panic);
        let msg = unsafe { CStr::from_ptr(ballot_last_error()) }.to_str().unwrap();
        assert!(msg.contains("boom"));
        assert_eq!(guard(|| Ok(())), BallotStatus::Ok);
        assert!(ballot_last_error().is_null());
    }

    #[test]
    fn undersized_buffers_are_rejected() {
        let mut buf = [0.0; 3];
        let res = unsafe { out_slice(buf.as_mut_ptr(), 3, 4, "centroids") };
        assert!(matches!(res, Err(Fail(BallotStatus::Dimension, _))));
    }
}

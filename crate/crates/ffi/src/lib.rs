//! C ABI over the `lrp` library.
//!
//! Every fallible function returns an [`LrpStatus`]; on failure the message
//! is available from [`lrp_last_error_message`] on the same thread. Handles
//! are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lrp::model::{edge_probability, KernelSpec, ModelParams, NormFamily, NormSpec, Point, MAX_DIM, ORIGIN};
use lrp::observables::estimate_size_moments;
use lrp::rg_ode::{moment_family, solve_riccati_exact, Profile};
use lrp::sampler::{sample_clusters, ClusterOptions, EdgeSampler};
use lrp::Error;

/// Result of every fallible call. The numeric values of `CONFIG`,
/// `DEPENDENCY` and `NUMERIC` match the exit codes of the `lrp` binary.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrpStatus {
    Ok = 0,
    Io = 1,
    Config = 2,
    Dependency = 3,
    Numeric = 4,
    NullPointer = 5,
    InvalidArgument = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrpNorm {
    ScaledSup = 0,
    ScaledEuclidean = 1,
}

/// Kernel, norm and `β` of one model.
pub struct LrpModel {
    params: ModelParams,
}

/// Neighbour sampler of a model at a fixed cut-off `r`.
pub struct LrpSampler {
    sampler: EdgeSampler,
    opts: ClusterOptions,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: LrpStatus, msg: impl Into<String>) -> LrpStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> LrpStatus {
    let status = match e.exit_code() {
        2 => LrpStatus::Config,
        3 => LrpStatus::Dependency,
        4 => LrpStatus::Numeric,
        _ => LrpStatus::Io,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> LrpStatus) -> LrpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(LrpStatus::Panic, "panic inside lrp"),
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lrp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lrp_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    V.as_ptr()
}

/// Creates a pure-power model `J(x) = ‖x‖^{-d-α}` in dimension `d`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn lrp_model_new(d: u32, alpha: f64, norm: LrpNorm, beta: f64, seed: u64, out: *mut *mut LrpModel) -> LrpStatus {
    guard(|| {
        if out.is_null() {
            return fail(LrpStatus::NullPointer, "out is null");
        }
        let family = match norm {
            LrpNorm::ScaledSup => NormFamily::ScaledSup,
            LrpNorm::ScaledEuclidean => NormFamily::ScaledEuclidean,
        };
        let built = NormSpec::new(family, d as usize)
            .and_then(|n| ModelParams::new(KernelSpec::pure_power(d as usize, alpha), n, beta, seed));
        match built {
            Ok(params) => {
                *out = Box::into_raw(Box::new(LrpModel { params }));
                LrpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `model` must be null or a handle from [`lrp_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lrp_model_free(model: *mut LrpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn read_point(p: *const i64, d: usize) -> Point {
    let mut x = ORIGIN;
    x[..d].copy_from_slice(std::slice::from_raw_parts(p, d));
    x
}

/// Probability `1 - e^{-β J_r(x, y)}` that `x` and `y` are joined at cut-off `r`.
///
/// # Safety
/// `x` and `y` must point to `d` integers; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lrp_edge_probability(model: *const LrpModel, x: *const i64, y: *const i64, r: f64, out: *mut f64) -> LrpStatus {
    guard(|| {
        if model.is_null() || x.is_null() || y.is_null() || out.is_null() {
            return fail(LrpStatus::NullPointer, "null argument");
        }
        let params = &(*model).params;
        let d = params.d().min(MAX_DIM);
        match edge_probability(params, &read_point(x, d), &read_point(y, d), r) {
            Ok(p) => {
                *out = p;
                LrpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Builds the neighbour sampler of `model` at cut-off `r`; explorations stop
/// after `max_size` vertices.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lrp_sampler_new(model: *const LrpModel, r: f64, max_size: u64, out: *mut *mut LrpSampler) -> LrpStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            return fail(LrpStatus::NullPointer, "null argument");
        }
        if !(r >= 1.0 && r.is_finite()) || max_size == 0 {
            return fail(LrpStatus::InvalidArgument, format!("need r >= 1 and max_size > 0, got r = {r}, max_size = {max_size}"));
        }
        let sampler = EdgeSampler::new(&(*model).params, r);
        let opts = ClusterOptions::new(max_size, 1);
        *out = Box::into_raw(Box::new(LrpSampler { sampler, opts }));
        LrpStatus::Ok
    })
}

/// # Safety
/// `sampler` must be null or a handle from [`lrp_sampler_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lrp_sampler_free(sampler: *mut LrpSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}

/// Samples `n` origin clusters from streams `(seed, grid, 0..n)` and writes
/// their sizes; `truncated` may be null, otherwise it receives one flag per
/// sample. The output does not depend on `workers` (0 = all cores).
///
/// # Safety
/// `sizes` must hold `n` values and `truncated`, when non-null, `n` bytes.
#[no_mangle]
pub unsafe extern "C" fn lrp_sample_sizes(
    sampler: *const LrpSampler,
    seed: u64,
    grid: u32,
    n: u64,
    workers: u32,
    sizes: *mut u64,
    truncated: *mut u8,
) -> LrpStatus {
    guard(|| {
        if sampler.is_null() || sizes.is_null() {
            return fail(LrpStatus::NullPointer, "null argument");
        }
        let s = &*sampler;
        let recs = sample_clusters(&s.sampler, &s.opts, seed, grid, n, workers as usize);
        let out = std::slice::from_raw_parts_mut(sizes, n as usize);
        for (o, r) in out.iter_mut().zip(&recs) {
            *o = r.sample.size;
        }
        if !truncated.is_null() {
            let t = std::slice::from_raw_parts_mut(truncated, n as usize);
            for (o, r) in t.iter_mut().zip(&recs) {
                *o = r.sample.truncated as u8;
            }
        }
        LrpStatus::Ok
    })
}

/// Batch-means estimate of `E|K|` from `n` samples, truncated ones excluded.
///
/// # Safety
/// `sampler` must be a live handle; `mean` and `stderr` writable.
#[no_mangle]
pub unsafe extern "C" fn lrp_mean_size(
    sampler: *const LrpSampler,
    seed: u64,
    grid: u32,
    n: u64,
    workers: u32,
    mean: *mut f64,
    stderr: *mut f64,
) -> LrpStatus {
    guard(|| {
        if sampler.is_null() || mean.is_null() || stderr.is_null() {
            return fail(LrpStatus::NullPointer, "null argument");
        }
        let s = &*sampler;
        let sizes: Vec<f64> = sample_clusters(&s.sampler, &s.opts, seed, grid, n, workers as usize)
            .iter()
            .filter(|r| !r.sample.truncated)
            .map(|r| r.sample.size as f64)
            .collect();
        match estimate_size_moments(&sizes, 2) {
            Ok(rep) => {
                *mean = rep.moment_est[1].mean;
                *stderr = rep.moment_est[1].stderr;
                LrpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// `(2p - 3)!! A^{p-1} (α/β) r^{(2p-1)α}`.
#[no_mangle]
pub extern "C" fn lrp_moment_family(alpha: f64, beta: f64, a: f64, p: u32, r: f64) -> f64 {
    moment_family(alpha, beta, a, p as usize, r)
}

/// Closed-form solution of `f' = a (1 - h) r^{-α-1} f²` with `h(r) = c r^b`
/// that grows like `(α/a) r^α`; the tail integral of `h` is taken by
/// quadrature up to `horizon` and analytically beyond it.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lrp_riccati_exact(a: f64, alpha: f64, c: f64, b: f64, r: f64, horizon: f64, out: *mut f64) -> LrpStatus {
    guard(|| {
        if out.is_null() {
            return fail(LrpStatus::NullPointer, "out is null");
        }
        match solve_riccati_exact(a, alpha, &Profile::Power { c, b }, r, horizon) {
            Ok(v) => {
                *out = v;
                LrpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of degree-3 trees with `n + 1` labelled leaves, `(2n - 3)!!`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lrp_tree_count(n: u32, out: *mut u64) -> LrpStatus {
    guard(|| {
        if out.is_null() {
            return fail(LrpStatus::NullPointer, "out is null");
        }
        match lrp::diagrams::enumerate_trees(n as usize) {
            Ok(t) => {
                *out = t.len() as u64;
                LrpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

//! C ABI for `convseq`.
//!
//! Objects are opaque handles created by `*_new`/`*_load`/`*_init_*` functions
//! and released with the matching `*_free`. Every fallible call returns a
//! [`ConvseqStatus`]; on failure a message is available from
//! [`convseq_last_error`] on the same thread. Panics never cross the boundary.
//!
//! Buffers are caller-owned. Functions that fill a buffer take its length and
//! fail with `CONVSEQ_STATUS_BUFFER_TOO_SMALL` when it cannot hold the result.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use convseq::engine::{self, FitConfig};
use convseq::stats::null::{calibrate_null, NullFamily};
use convseq::stats::peaks::extract_detections;
use convseq::{Error, FilterBank, FitResult, SpikeFormat, SpikeMatrix};

/// Binary spike raster.
pub struct ConvseqSpikes(SpikeMatrix);

/// Bank of `K` filters of shape `N x M`.
pub struct ConvseqBank(FilterBank);

/// Trained bank, response traces and loss history.
pub struct ConvseqFit(FitResult);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvseqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    OutOfRange = 4,
    Parse = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Training settings. Obtain defaults from [`convseq_fit_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ConvseqFitConfig {
    pub n_steps: usize,
    pub lrate: f64,
    pub beta_tv: f64,
    /// NaN selects 0 for one filter and 10 otherwise.
    pub beta_xcor: f64,
    /// Maximum cross-correlation lag; 0 selects the filter width.
    pub j: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ConvseqNullCalibration {
    pub mu0: f64,
    pub sigma0: f64,
    pub alpha: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(ConvseqStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } | Error::Json(_) => ConvseqStatus::Parse,
            Error::Io(_) => ConvseqStatus::Io,
            Error::DimensionMismatch(_) => ConvseqStatus::DimensionMismatch,
            Error::OutOfRange(_) => ConvseqStatus::OutOfRange,
            _ => ConvseqStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: ConvseqStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ConvseqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ConvseqStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            ConvseqStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    match p.as_ref() {
        Some(r) => Ok(r),
        None => fail(ConvseqStatus::NullPointer, format!("{what} is null")),
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    match p.as_mut() {
        Some(r) => Ok(r),
        None => fail(ConvseqStatus::NullPointer, format!("{what} is null")),
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(ConvseqStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, need: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len < need {
        return fail(
            ConvseqStatus::BufferTooSmall,
            format!("{what} holds {len} values, need {need}"),
        );
    }
    if need == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return fail(ConvseqStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn to_path(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return fail(ConvseqStatus::NullPointer, "path is null");
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => fail(ConvseqStatus::InvalidArgument, "path is not UTF-8"),
    }
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into the library from this thread.
#[no_mangle]
pub extern "C" fn convseq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn convseq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Raster from `nnz` (neuron, bin) pairs. Duplicates are merged.
///
/// # Safety
/// `neurons` and `bins` must point to `nnz` values each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn convseq_spikes_new(
    n_neurons: usize,
    n_bins: usize,
    neurons: *const usize,
    bins: *const usize,
    nnz: usize,
    out_spikes: *mut *mut ConvseqSpikes,
) -> ConvseqStatus {
    guard(|| {
        let o = out(out_spikes, "out_spikes")?;
        let ns = slice(neurons, nnz, "neurons")?;
        let ts = slice(bins, nnz, "bins")?;
        let x = SpikeMatrix::new(n_neurons, n_bins, ns.iter().copied().zip(ts.iter().copied()))?;
        *o = boxed(ConvseqSpikes(x));
        Ok(())
    })
}

/// Load a raster; `.csv` files are dense, anything else is COO text.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn convseq_spikes_load(path: *const c_char, out_spikes: *mut *mut ConvseqSpikes) -> ConvseqStatus {
    guard(|| {
        let o = out(out_spikes, "out_spikes")?;
        let p = to_path(path)?;
        let x = SpikeMatrix::load(&p, SpikeFormat::from_path(&p))?;
        *o = boxed(ConvseqSpikes(x));
        Ok(())
    })
}

/// # Safety
/// `spikes` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn convseq_spikes_save(spikes: *const ConvseqSpikes, path: *const c_char) -> ConvseqStatus {
    guard(|| {
        let x = get(spikes, "spikes")?;
        let p = to_path(path)?;
        x.0.save(&p, SpikeFormat::from_path(&p))?;
        Ok(())
    })
}

/// # Safety
/// `spikes` must be a live handle; output pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn convseq_spikes_dims(
    spikes: *const ConvseqSpikes,
    n_neurons: *mut usize,
    n_bins: *mut usize,
    nnz: *mut usize,
) -> ConvseqStatus {
    guard(|| {
        let x = &get(spikes, "spikes")?.0;
        if let Some(v) = n_neurons.as_mut() {
            *v = x.n_neurons();
        }
        if let Some(v) = n_bins.as_mut() {
            *v = x.n_bins();
        }
        if let Some(v) = nnz.as_mut() {
            *v = x.nnz();
        }
        Ok(())
    })
}

/// # Safety
/// `spikes` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn convseq_spikes_free(spikes: *mut ConvseqSpikes) {
    if !spikes.is_null() {
        drop(Box::from_raw(spikes));
    }
}

/// Direct filters with softmax rows, raw weights drawn from N(0, 0.01^2).
///
/// # Safety
/// `out_bank` must be writable.
#[no_mangle]
pub unsafe extern "C" fn convseq_bank_init_direct(
    n_neurons: usize,
    width: usize,
    n_filters: usize,
    seed: u64,
    out_bank: *mut *mut ConvseqBank,
) -> ConvseqStatus {
    guard(|| {
        let o = out(out_bank, "out_bank")?;
        *o = boxed(ConvseqBank(FilterBank::init_direct(n_neurons, width, n_filters, seed)?));
        Ok(())
    })
}

/// Gaussian filters with one learnable mean per row.
///
/// # Safety
/// `out_bank` must be writable.
#[no_mangle]
pub unsafe extern "C" fn convseq_bank_init_gaussian(
    n_neurons: usize,
    width: usize,
    n_filters: usize,
    sigma: f64,
    normalized: bool,
    seed: u64,
    out_bank: *mut *mut ConvseqBank,
) -> ConvseqStatus {
    guard(|| {
        let o = out(out_bank, "out_bank")?;
        let b = FilterBank::init_gaussian(n_neurons, width, n_filters, sigma, seed)?.with_normalization(normalized);
        *o = boxed(ConvseqBank(b));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out_bank` must be writable.
#[no_mangle]
pub unsafe extern "C" fn convseq_bank_load(path: *const c_char, out_bank: *mut *mut ConvseqBank) -> ConvseqStatus {
    guard(|| {
        let o = out(out_bank, "out_bank")?;
        *o = boxed(ConvseqBank(FilterBank::load(&to_path(path)?)?));
        Ok(())
    })
}

/// # Safety
/// `bank` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn convseq_bank_save(bank: *const ConvseqBank, path: *const c_char) -> ConvseqStatus {
    guard(|| {
        get(bank, "bank")?.0.save(&to_path(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `bank` must be a live handle; output pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn convseq_bank_dims(
    bank: *const ConvseqBank,
    n_neurons: *mut usize,
    width: *mut usize,
    n_filters: *mut usize,
) -> ConvseqStatus {
    guard(|| {
        let b = &get(bank, "bank")?.0;
        if let Some(v) = n_neurons.as_mut() {
            *v = b.n_neurons();
        }
        if let Some(v) = width.as_mut() {
            *v = b.width();
        }
        if let Some(v) = n_filters.as_mut() {
            *v = b.n_filters();
        }
        Ok(())
    })
}

/// Write filter `k` as an `N x M` row-major matrix into `out` (length `len`).
///
/// # Safety
/// `bank` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn convseq_bank_materialize(
    bank: *const ConvseqBank,
    k: usize,
    out_values: *mut f64,
    len: usize,
) -> ConvseqStatus {
    guard(|| {
        let b = &get(bank, "bank")?.0;
        if k >= b.n_filters() {
            return fail(ConvseqStatus::OutOfRange, format!("filter {k} of {}", b.n_filters()));
        }
        let kernel = b.materialize(k);
        let dst = slice_mut(out_values, len, kernel.as_slice().len(), "out_values")?;
        dst.copy_from_slice(kernel.as_slice());
        Ok(())
    })
}

/// Neuron order by latency in filter `k`. `order[i]` is the neuron placed at
/// row `i`; `latencies[n]` is the latency of neuron `n`. Either may be NULL.
///
/// # Safety
/// `bank` must be a live handle; non-NULL buffers must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn convseq_bank_sort(
    bank: *const ConvseqBank,
    k: usize,
    order: *mut usize,
    latencies: *mut f64,
    len: usize,
) -> ConvseqStatus {
    guard(|| {
        let b = &get(bank, "bank")?.0;
        if k >= b.n_filters() {
            return fail(ConvseqStatus::OutOfRange, format!("filter {k} of {}", b.n_filters()));
        }
        let s = b.sort_filter(k);
        let n = b.n_neurons();
        if !order.is_null() {
            slice_mut(order, len, n, "order")?.copy_from_slice(s.order.as_slice());
        }
        if !latencies.is_null() {
            slice_mut(latencies, len, n, "latencies")?.copy_from_slice(&s.latencies);
        }
        Ok(())
    })
}

/// # Safety
/// `bank` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn convseq_bank_free(bank: *mut ConvseqBank) {
    if !bank.is_null() {
        drop(Box::from_raw(bank));
    }
}

#[no_mangle]
pub extern "C" fn convseq_fit_config_default() -> ConvseqFitConfig {
    let d = FitConfig::default();
    ConvseqFitConfig {
        n_steps: d.n_steps,
        lrate: d.lrate,
        beta_tv: d.beta_tv,
        beta_xcor: f64::NAN,
        j: 0,
        seed: d.seed,
    }
}

/// Train a copy of `bank` on `spikes`. `config` may be NULL for defaults.
///
/// # Safety
/// Handles must be live; `out_fit` must be writable.
#[no_mangle]
pub unsafe extern "C" fn convseq_fit(
    spikes: *const ConvseqSpikes,
    bank: *const ConvseqBank,
    config: *const ConvseqFitConfig,
    out_fit: *mut *mut ConvseqFit,
) -> ConvseqStatus {
    guard(|| {
        let o = out(out_fit, "out_fit")?;
        let x = &get(spikes, "spikes")?.0;
        let b = get(bank, "bank")?.0.clone();
        let c = config.as_ref().copied().unwrap_or_else(|| convseq_fit_config_default());
        let cfg = FitConfig {
            n_steps: c.n_steps,
            lrate: c.lrate,
            beta_tv: c.beta_tv,
            beta_xcor: (!c.beta_xcor.is_nan()).then_some(c.beta_xcor),
            j: (c.j > 0).then_some(c.j),
            early_stop: None,
            seed: c.seed,
        };
        *o = boxed(ConvseqFit(engine::fit(x, b, &cfg)?));
        Ok(())
    })
}

/// # Safety
/// `fit` must be a live handle; output pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn convseq_fit_summary(
    fit: *const ConvseqFit,
    steps_run: *mut usize,
    n_filters: *mut usize,
    n_bins: *mut usize,
    final_loss: *mut f64,
) -> ConvseqStatus {
    guard(|| {
        let f = &get(fit, "fit")?.0;
        if let Some(v) = steps_run.as_mut() {
            *v = f.steps_run;
        }
        if let Some(v) = n_filters.as_mut() {
            *v = f.traces.len();
        }
        if let Some(v) = n_bins.as_mut() {
            *v = f.traces.first().map_or(0, |t| t.values.len());
        }
        if let Some(v) = final_loss.as_mut() {
            *v = f.loss_history.last().map_or(f64::NAN, |l| l.total);
        }
        Ok(())
    })
}

/// Copy the response trace of filter `k` (length `T`).
///
/// # Safety
/// `fit` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn convseq_fit_trace(
    fit: *const ConvseqFit,
    k: usize,
    out_values: *mut f64,
    len: usize,
) -> ConvseqStatus {
    guard(|| {
        let f = &get(fit, "fit")?.0;
        let Some(t) = f.traces.get(k) else {
            return fail(ConvseqStatus::OutOfRange, format!("filter {k} of {}", f.traces.len()));
        };
        slice_mut(out_values, len, t.values.len(), "out_values")?.copy_from_slice(&t.values);
        Ok(())
    })
}

/// New handle holding a copy of the trained bank.
///
/// # Safety
/// `fit` must be a live handle; `out_bank` must be writable.
#[no_mangle]
pub unsafe extern "C" fn convseq_fit_bank(fit: *const ConvseqFit, out_bank: *mut *mut ConvseqBank) -> ConvseqStatus {
    guard(|| {
        let o = out(out_bank, "out_bank")?;
        *o = boxed(ConvseqBank(get(fit, "fit")?.0.bank.clone()));
        Ok(())
    })
}

/// # Safety
/// `fit` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn convseq_fit_free(fit: *mut ConvseqFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Threshold from `n_null` random filters drawn from the same family as
/// `family_of` (width, variant, sigma and normalization).
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn convseq_calibrate_null(
    spikes: *const ConvseqSpikes,
    family_of: *const ConvseqBank,
    n_null: usize,
    z: f64,
    seed: u64,
    out_calibration: *mut ConvseqNullCalibration,
) -> ConvseqStatus {
    guard(|| {
        let o = out(out_calibration, "out_calibration")?;
        let x = &get(spikes, "spikes")?.0;
        let b = &get(family_of, "family_of")?.0;
        let c = calibrate_null(x, b.width(), NullFamily::of(b), n_null, z, seed)?;
        *o = ConvseqNullCalibration {
            mu0: c.mu0,
            sigma0: c.sigma0,
            alpha: c.alpha,
        };
        Ok(())
    })
}

/// Peaks of `trace` at or above `alpha`, suppressed within `window` bins.
/// Writes up to `capacity` bins and stores the total count in `n_found`.
///
/// # Safety
/// `trace` must hold `len` doubles and `bins` `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn convseq_extract_detections(
    trace: *const f64,
    len: usize,
    alpha: f64,
    window: usize,
    bins: *mut usize,
    capacity: usize,
    n_found: *mut usize,
) -> ConvseqStatus {
    guard(|| {
        let count = out(n_found, "n_found")?;
        let t = slice(trace, len, "trace")?;
        let dets = extract_detections(t, alpha, window);
        *count = dets.len();
        let n = dets.len().min(capacity);
        if n > 0 {
            let dst = slice_mut(bins, capacity, n, "bins")?;
            for (d, det) in dst.iter_mut().zip(&dets) {
                *d = det.bin;
            }
        }
        Ok(())
    })
}

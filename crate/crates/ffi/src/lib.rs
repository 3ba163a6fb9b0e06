//! C ABI over `bapc-core`.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`BapcStatus`]; on failure [`bapc_last_error`] describes the cause.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bapc_core::attribution::integrated_gradients;
use bapc_core::correction::{ArNetOptions, CorrectionSpec};
use bapc_core::engine::{bapc, BapcConfig as CoreConfig, BapcResult as CoreResult};
use bapc_core::models::{ar2_to_sin, sin_to_ar2, Ar2Params, Family, FitConfig, SinusoidParams};
use bapc_core::series::{TimeSeries, WindowConfig};
use bapc_core::synthetic::{generate, SyntheticKind, SyntheticSpec};
use bapc_core::BapcError;

/// Outcome of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BapcStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad configuration, series or index range.
    InvalidArgument = 2,
    /// Parameters outside a conversion's domain, or degenerate input.
    Domain = 3,
    InsufficientData = 4,
    FitFailed = 5,
    /// Closed form unavailable at this index.
    Precision = 6,
    Numerical = 7,
    /// Output buffer shorter than the value count.
    BufferTooSmall = 8,
    Panic = 9,
}

impl From<&BapcError> for BapcStatus {
    fn from(e: &BapcError) -> Self {
        match e {
            BapcError::Domain(_) | BapcError::Degenerate(_) => BapcStatus::Domain,
            BapcError::InsufficientData(_) | BapcError::MissingLags { .. } => BapcStatus::InsufficientData,
            BapcError::Fit(_) => BapcStatus::FitFailed,
            BapcError::Precision { .. } => BapcStatus::Precision,
            BapcError::Numerical(_) => BapcStatus::Numerical,
            _ => BapcStatus::InvalidArgument,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: BapcStatus, msg: impl Into<String>) -> BapcStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), BapcStatus>) -> BapcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            BapcStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => fail(BapcStatus::Panic, "internal panic"),
    }
}

fn core<T>(r: bapc_core::Result<T>) -> Result<T, BapcStatus> {
    r.map_err(|e| fail(BapcStatus::from(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), BapcStatus> {
    if p.is_null() {
        Err(fail(BapcStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Copies `values` into `out[..cap]`; `written`, if given, receives the
/// full count even when the buffer is too small.
unsafe fn copy_out(values: &[f64], out: *mut f64, cap: usize, written: *mut usize) -> Result<(), BapcStatus> {
    if !written.is_null() {
        *written = values.len();
    }
    if cap < values.len() {
        return Err(fail(
            BapcStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", values.len()),
        ));
    }
    if !values.is_empty() {
        non_null(out, "output buffer")?;
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    }
    Ok(())
}

/// Message for the most recent failure on this thread, empty after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn bapc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bapc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// A time series with consecutive integer indices.
pub struct BapcSeries(TimeSeries);

/// Copies `len` values into a new series whose first index is `start_index`.
///
/// # Safety
/// `values` must point to `len` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bapc_series_new(
    values: *const f64,
    len: usize,
    start_index: i64,
    out: *mut *mut BapcSeries,
) -> BapcStatus {
    guard(|| {
        non_null(out, "out")?;
        non_null(values, "values")?;
        let v = std::slice::from_raw_parts(values, len).to_vec();
        let s = core(TimeSeries::with_start(v, start_index))?;
        *out = Box::into_raw(Box::new(BapcSeries(s)));
        Ok(())
    })
}

/// # Safety
/// `series` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn bapc_series_free(series: *mut BapcSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Number of samples, 0 for a null handle.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bapc_series_len(series: *const BapcSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.len())
}

/// Index of the first sample, 0 for a null handle.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bapc_series_start_index(series: *const BapcSeries) -> i64 {
    series.as_ref().map_or(0, |s| s.0.start_index())
}

/// # Safety
/// `series` must be live and `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn bapc_series_values(
    series: *const BapcSeries,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> BapcStatus {
    guard(|| {
        non_null(series, "series")?;
        copy_out((*series).0.values(), out, cap, written)
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BapcSyntheticKind {
    Step = 0,
    Ramp = 1,
    Sinacp = 2,
    Sinfcp = 3,
}

/// Parameters of a synthetic series.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BapcSyntheticParams {
    pub kind: BapcSyntheticKind,
    pub u0: f64,
    pub v0: f64,
    pub force: f64,
    pub t_star: f64,
    pub omega: f64,
    pub nu: f64,
    pub n: usize,
    pub change_index: i64,
    /// Nonzero samples on the unshifted grid.
    pub raw_grid: u8,
}

impl From<&SyntheticSpec> for BapcSyntheticParams {
    fn from(s: &SyntheticSpec) -> Self {
        BapcSyntheticParams {
            kind: match s.kind {
                SyntheticKind::Step => BapcSyntheticKind::Step,
                SyntheticKind::Ramp => BapcSyntheticKind::Ramp,
                SyntheticKind::Sinacp => BapcSyntheticKind::Sinacp,
                SyntheticKind::Sinfcp => BapcSyntheticKind::Sinfcp,
            },
            u0: s.u0,
            v0: s.v0,
            force: s.force,
            t_star: s.t_star,
            omega: s.omega,
            nu: s.nu,
            n: s.n,
            change_index: s.change_index,
            raw_grid: s.raw_grid as u8,
        }
    }
}

impl BapcSyntheticParams {
    fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            kind: core_kind(self.kind),
            u0: self.u0,
            v0: self.v0,
            force: self.force,
            t_star: self.t_star,
            omega: self.omega,
            nu: self.nu,
            n: self.n,
            change_index: self.change_index,
            raw_grid: self.raw_grid != 0,
        }
    }
}

fn core_kind(k: BapcSyntheticKind) -> SyntheticKind {
    match k {
        BapcSyntheticKind::Step => SyntheticKind::Step,
        BapcSyntheticKind::Ramp => SyntheticKind::Ramp,
        BapcSyntheticKind::Sinacp => SyntheticKind::Sinacp,
        BapcSyntheticKind::Sinfcp => SyntheticKind::Sinfcp,
    }
}

/// Fills `out` with the default parameters of `kind`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bapc_synthetic_defaults(kind: BapcSyntheticKind, out: *mut BapcSyntheticParams) -> BapcStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = BapcSyntheticParams::from(&SyntheticSpec::defaults(core_kind(kind)));
        Ok(())
    })
}

/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bapc_synthetic_generate(
    params: *const BapcSyntheticParams,
    out: *mut *mut BapcSeries,
) -> BapcStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        let s = core(generate(&(*params).spec()))?;
        *out = Box::into_raw(Box::new(BapcSeries(s)));
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BapcFamily {
    Constant = 0,
    Linear = 1,
    PolySeasonal = 2,
    Sinusoid = 3,
    DampedSinusoid = 4,
    Ar2 = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BapcCorrection {
    NearestNeighbor = 0,
    ArNet = 1,
}

/// Settings for one BAPC run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BapcRunConfig {
    pub family: BapcFamily,
    /// Period of the seasonal families.
    pub period: f64,
    pub correction: BapcCorrection,
    /// Network order, single hidden layer width, epochs and step size.
    pub arnet_order: usize,
    pub arnet_hidden: usize,
    pub arnet_epochs: usize,
    pub arnet_learning_rate: f64,
    /// Training window size; 0 uses the whole series.
    pub n: usize,
    /// Correction window size.
    pub r: usize,
    /// Nonzero enables outlier rejection in AR(2) fits.
    pub robust: u8,
    pub seed: u64,
}

impl BapcRunConfig {
    fn core(&self, n: usize) -> bapc_core::Result<CoreConfig> {
        let family = match self.family {
            BapcFamily::Constant => Family::Constant,
            BapcFamily::Linear => Family::Linear,
            BapcFamily::PolySeasonal => Family::PolySeasonal { period: self.period },
            BapcFamily::Sinusoid => Family::Sinusoid { period: self.period },
            BapcFamily::DampedSinusoid => Family::DampedSinusoid,
            BapcFamily::Ar2 => Family::Ar2,
        };
        if family.period().is_some_and(|p| !(p > 0.0 && p.is_finite())) {
            return Err(BapcError::Config("period must be positive".into()));
        }
        let correction = match self.correction {
            BapcCorrection::NearestNeighbor => CorrectionSpec::nn1(),
            BapcCorrection::ArNet => CorrectionSpec::arnet(ArNetOptions {
                order: self.arnet_order,
                hidden: vec![self.arnet_hidden],
                epochs: self.arnet_epochs,
                learning_rate: self.arnet_learning_rate,
                seed: self.seed,
            }),
        };
        let fit = FitConfig { robust: self.robust != 0, seed: self.seed, ..FitConfig::default() };
        fit.validate()?;
        Ok(CoreConfig { family, correction, window: WindowConfig::new(n, self.r)?, fit })
    }
}

/// Fills `out` with defaults: constant base, 1-NN correction, whole series,
/// r = 0, robust AR(2), seed 0.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bapc_run_config_default(out: *mut BapcRunConfig) -> BapcStatus {
    guard(|| {
        non_null(out, "out")?;
        let net = ArNetOptions::default();
        *out = BapcRunConfig {
            family: BapcFamily::Constant,
            period: bapc_core::models::DEFAULT_PERIOD,
            correction: BapcCorrection::NearestNeighbor,
            arnet_order: net.order,
            arnet_hidden: net.hidden[0],
            arnet_epochs: net.epochs,
            arnet_learning_rate: net.learning_rate,
            n: 0,
            r: 0,
            robust: 1,
            seed: 0,
        };
        Ok(())
    })
}

/// Fitted base models and correction of one run.
pub struct BapcResult {
    inner: CoreResult,
    names: Vec<CString>,
}

/// Runs BAPC on the last `config.n` samples of `series`.
///
/// # Safety
/// `series` and `config` must be live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bapc_run(
    series: *const BapcSeries,
    config: *const BapcRunConfig,
    out: *mut *mut BapcResult,
) -> BapcStatus {
    guard(|| {
        non_null(series, "series")?;
        non_null(config, "config")?;
        non_null(out, "out")?;
        let s = &(*series).0;
        let n = if (*config).n == 0 { s.len() } else { (*config).n };
        let cfg = core((*config).core(n))?;
        if n > s.len() {
            return Err(fail(
                BapcStatus::InvalidArgument,
                format!("training window n={n} exceeds series length {}", s.len()),
            ));
        }
        let window = core(s.slice(s.end_index() - n as i64 + 1, s.end_index()))?;
        let inner = core(bapc(&window, &cfg))?;
        let names = inner
            .family()
            .param_names()
            .iter()
            .map(|n| CString::new(*n).unwrap_or_default())
            .collect();
        *out = Box::into_raw(Box::new(BapcResult { inner, names }));
        Ok(())
    })
}

/// # Safety
/// `result` must come from [`bapc_run`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn bapc_result_free(result: *mut BapcResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of base-model parameters, 0 for a null handle.
///
/// # Safety
/// `result` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn bapc_result_n_params(result: *const BapcResult) -> usize {
    result.as_ref().map_or(0, |r| r.names.len())
}

/// Name of parameter `k`, or null when out of range. Owned by `result`.
///
/// # Safety
/// `result` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn bapc_result_param_name(result: *const BapcResult, k: usize) -> *const c_char {
    result
        .as_ref()
        .and_then(|r| r.names.get(k))
        .map_or(ptr::null(), |n| n.as_ptr())
}

unsafe fn result_values(
    result: *const BapcResult,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
    pick: impl FnOnce(&CoreResult) -> &[f64],
) -> BapcStatus {
    guard(|| {
        non_null(result, "result")?;
        copy_out(pick(&(*result).inner), out, cap, written)
    })
}

/// Parameters fitted on the observed window.
///
/// # Safety
/// `result` must be live and `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn bapc_result_theta0(
    result: *const BapcResult,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> BapcStatus {
    result_values(result, out, cap, written, |r| r.theta0.params())
}

/// Parameters fitted on the corrected window.
///
/// # Safety
/// `result` must be live and `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn bapc_result_theta_r(
    result: *const BapcResult,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> BapcStatus {
    result_values(result, out, cap, written, |r| r.theta_r.params())
}

/// `theta0 - theta_r`.
///
/// # Safety
/// `result` must be live and `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn bapc_result_delta_theta(
    result: *const BapcResult,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> BapcStatus {
    result_values(result, out, cap, written, |r| &r.delta_theta)
}

/// Predicted residuals on the correction window.
///
/// # Safety
/// `result` must be live and `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn bapc_result_correction(
    result: *const BapcResult,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> BapcStatus {
    result_values(result, out, cap, written, |r| &r.correction)
}

/// Surrogate correction `f_theta0(t) - f_theta_r(t)`.
///
/// # Safety
/// `result` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bapc_result_surrogate(result: *const BapcResult, t: f64, out: *mut f64) -> BapcStatus {
    guard(|| {
        non_null(result, "result")?;
        non_null(out, "out")?;
        *out = core((*result).inner.surrogate(t))?;
        Ok(())
    })
}

/// Integrated-gradients attribution of the surrogate at `t`, one value per
/// parameter. `completeness_residual`, if given, receives
/// `sum(values) - surrogate`.
///
/// # Safety
/// `result` must be live and `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn bapc_result_ig(
    result: *const BapcResult,
    t: f64,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
    completeness_residual: *mut f64,
) -> BapcStatus {
    guard(|| {
        non_null(result, "result")?;
        let r = &(*result).inner;
        let a = core(integrated_gradients(&r.theta0, &r.theta_r, t))?;
        copy_out(&a.values, out, cap, written)?;
        if !completeness_residual.is_null() {
            *completeness_residual = a.completeness_residual;
        }
        Ok(())
    })
}

/// `y_t = phi1 y_{t-1} + phi2 y_{t-2}` started from `(y1, y2)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BapcAr2 {
    pub y1: f64,
    pub y2: f64,
    pub phi1: f64,
    pub phi2: f64,
}

/// `alpha exp(-beta t) cos(omega t + phi)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BapcSinusoid {
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    pub phi: f64,
}

/// The AR(2) process whose value at `t` equals the sinusoid at `t - 1`.
///
/// # Safety
/// `input` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bapc_sin_to_ar2(input: *const BapcSinusoid, out: *mut BapcAr2) -> BapcStatus {
    guard(|| {
        non_null(input, "input")?;
        non_null(out, "out")?;
        let s = *input;
        let p = core(sin_to_ar2(&SinusoidParams { alpha: s.alpha, beta: s.beta, omega: s.omega, phi: s.phi }))?;
        *out = BapcAr2 { y1: p.y1, y2: p.y2, phi1: p.phi1, phi2: p.phi2 };
        Ok(())
    })
}

/// Inverse of [`bapc_sin_to_ar2`] for oscillating processes.
///
/// # Safety
/// `input` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bapc_ar2_to_sin(input: *const BapcAr2, out: *mut BapcSinusoid) -> BapcStatus {
    guard(|| {
        non_null(input, "input")?;
        non_null(out, "out")?;
        let a = *input;
        let s = core(ar2_to_sin(&Ar2Params { y1: a.y1, y2: a.y2, phi1: a.phi1, phi2: a.phi2 }))?;
        *out = BapcSinusoid { alpha: s.alpha, beta: s.beta, omega: s.omega, phi: s.phi };
        Ok(())
    })
}

//! C ABI for `pcscale`.
//!
//! Every fallible function returns a [`PcsStatus`]; on failure a message is
//! stored per thread and can be read with [`pcs_last_error_message`]. Outputs
//! go through caller-provided pointers and are written only on success.
//! Handles (`PcsModelConfig`, `PcsFitResult`) are opaque and must be released
//! with their `*_free` function. Strings returned by the library are released
//! with [`pcs_string_free`]. Panics never cross the boundary; they surface as
//! `PCS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::{c_char, c_int, size_t};
use pcscale::analysis;
use pcscale::fit::{self, FitConfig, FitResult};
use pcscale::flops::{self, Algorithm, ModelConfig, StepSpec};
use pcscale::io::{ArtifactLabels, FitArtifact};
use pcscale::phases::{self, LossSeries, PhaseLabel, PhaseThresholds};
use pcscale::scaling::{ConstraintMode, SigmoidParams};
use pcscale::series::RunSeries;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcsStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// An argument is outside its documented range.
    InvalidArgument = 2,
    /// The computation could not be carried out on this input.
    Domain = 3,
    /// A fit failed or the data were insufficient.
    Fit = 4,
    /// A caller buffer was too small; the needed size was reported.
    BufferTooSmall = 5,
    /// Internal panic; the message holds the payload.
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcsAlgorithm {
    Sft = 0,
    Grpo = 1,
    Dapo = 2,
    Hybrid = 3,
    Upt = 4,
}

impl From<PcsAlgorithm> for Algorithm {
    fn from(a: PcsAlgorithm) -> Self {
        match a {
            PcsAlgorithm::Sft => Algorithm::Sft,
            PcsAlgorithm::Grpo => Algorithm::Grpo,
            PcsAlgorithm::Dapo => Algorithm::Dapo,
            PcsAlgorithm::Hybrid => Algorithm::Hybrid,
            PcsAlgorithm::Upt => Algorithm::Upt,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcsConstraintMode {
    /// Ceiling at or above the starting performance.
    Headroom = 0,
    Unconstrained = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcsPhaseLabel {
    Adaptive = 0,
    Stable = 1,
    MildOverfit = 2,
    SevereOverfit = 3,
    Indeterminate = 4,
}

impl From<PhaseLabel> for PcsPhaseLabel {
    fn from(l: PhaseLabel) -> Self {
        match l {
            PhaseLabel::Adaptive => PcsPhaseLabel::Adaptive,
            PhaseLabel::Stable => PcsPhaseLabel::Stable,
            PhaseLabel::MildOverfit => PcsPhaseLabel::MildOverfit,
            PhaseLabel::SevereOverfit => PcsPhaseLabel::SevereOverfit,
            PhaseLabel::Indeterminate => PcsPhaseLabel::Indeterminate,
        }
    }
}

/// One training step. Fields that do not apply to `algorithm` are ignored.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PcsStepSpec {
    pub algorithm: PcsAlgorithm,
    /// Batch size; the generation batch for DAPO.
    pub batch: u64,
    /// DAPO training batch.
    pub update_batch: u64,
    /// DAPO sampling rounds.
    pub sampling_rounds: u64,
    pub group_size: u64,
    pub expert_per_prompt: u64,
    pub on_policy_kept: u64,
    pub off_policy_kept: u64,
    pub avg_seq_len: u64,
    pub avg_on_len: u64,
    pub avg_off_len: u64,
}

impl From<PcsStepSpec> for StepSpec {
    fn from(s: PcsStepSpec) -> Self {
        StepSpec {
            algorithm: s.algorithm.into(),
            batch: s.batch,
            update_batch: s.update_batch,
            sampling_rounds: s.sampling_rounds,
            group_size: s.group_size,
            expert_per_prompt: s.expert_per_prompt,
            on_policy_kept: s.on_policy_kept,
            off_policy_kept: s.off_policy_kept,
            avg_seq_len: s.avg_seq_len,
            avg_on_len: s.avg_on_len,
            avg_off_len: s.avg_off_len,
        }
    }
}

/// Sigmoid curve parameters; compute is in exaFLOPs.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcsSigmoidParams {
    pub p_start: f64,
    pub ceiling: f64,
    pub c_mid: f64,
    pub steepness: f64,
}

impl From<PcsSigmoidParams> for SigmoidParams {
    fn from(p: PcsSigmoidParams) -> Self {
        SigmoidParams::new(p.p_start, p.ceiling, p.c_mid, p.steepness)
    }
}

impl From<SigmoidParams> for PcsSigmoidParams {
    fn from(p: SigmoidParams) -> Self {
        PcsSigmoidParams {
            p_start: p.p_start,
            ceiling: p.ceiling,
            c_mid: p.c_mid,
            steepness: p.steepness,
        }
    }
}

/// Fit settings. Start from [`pcs_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PcsFitOptions {
    pub train_fraction: f64,
    pub z_threshold: f64,
    /// Nonzero enables least trimmed squares after outlier removal.
    pub use_lts: c_int,
    pub lts_alpha: f64,
    pub max_outlier_rounds: u32,
    pub nls_max_iters: u32,
    pub nls_tolerance: f64,
    pub multistart_count: u32,
    pub seed: u64,
    pub mode: PcsConstraintMode,
    /// Nonzero holds `p_start` at `pin_p_start_value`.
    pub pin_p_start: c_int,
    pub pin_p_start_value: f64,
}

impl From<&FitConfig> for PcsFitOptions {
    fn from(c: &FitConfig) -> Self {
        PcsFitOptions {
            train_fraction: c.train_fraction,
            z_threshold: c.z_threshold,
            use_lts: c.use_lts as c_int,
            lts_alpha: c.lts_alpha,
            max_outlier_rounds: c.max_outlier_rounds as u32,
            nls_max_iters: c.nls_max_iters as u32,
            nls_tolerance: c.nls_tolerance,
            multistart_count: c.multistart_count as u32,
            seed: c.seed,
            mode: match c.mode {
                ConstraintMode::Headroom => PcsConstraintMode::Headroom,
                ConstraintMode::Unconstrained => PcsConstraintMode::Unconstrained,
            },
            pin_p_start: c.pin_p_start.is_some() as c_int,
            pin_p_start_value: c.pin_p_start.unwrap_or(0.0),
        }
    }
}

impl From<&PcsFitOptions> for FitConfig {
    fn from(o: &PcsFitOptions) -> Self {
        FitConfig {
            train_fraction: o.train_fraction,
            z_threshold: o.z_threshold,
            use_lts: o.use_lts != 0,
            lts_alpha: o.lts_alpha,
            max_outlier_rounds: o.max_outlier_rounds as usize,
            nls_max_iters: o.nls_max_iters as usize,
            nls_tolerance: o.nls_tolerance,
            multistart_count: o.multistart_count as usize,
            seed: o.seed,
            mode: match o.mode {
                PcsConstraintMode::Headroom => ConstraintMode::Headroom,
                PcsConstraintMode::Unconstrained => ConstraintMode::Unconstrained,
            },
            pin_p_start: (o.pin_p_start != 0).then_some(o.pin_p_start_value),
        }
    }
}

/// Opaque model architecture.
pub struct PcsModelConfig(ModelConfig);

/// Opaque fit result.
pub struct PcsFitResult {
    result: FitResult,
    config: FitConfig,
}

// ---------------------------------------------------------------------------
// error plumbing

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

type Failure = (PcsStatus, String);

fn fail<T>(status: PcsStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err((status, msg.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PcsStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PcsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            PcsStatus::Panic
        }
    }
}

fn domain<E: std::fmt::Display>(e: E) -> Failure {
    (PcsStatus::Domain, e.to_string())
}

fn fit_err<E: std::fmt::Display>(e: E) -> Failure {
    (PcsStatus::Fit, e.to_string())
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| (PcsStatus::NullPointer, format!("{name} is null")))
}

unsafe fn in_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| (PcsStatus::NullPointer, format!("{name} is null")))
}

unsafe fn slice<'a>(p: *const f64, n: size_t, name: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(PcsStatus::NullPointer, format!("{name} is null"));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("nul bytes removed")
        .into_raw()
}

/// Message for the last failed call on this thread, or null after a
/// successful call. Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn pcs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn pcs_status_name(status: PcsStatus) -> *const c_char {
    let s: &'static CStr = match status {
        PcsStatus::Ok => c"ok",
        PcsStatus::NullPointer => c"null pointer",
        PcsStatus::InvalidArgument => c"invalid argument",
        PcsStatus::Domain => c"domain error",
        PcsStatus::Fit => c"fit error",
        PcsStatus::BufferTooSmall => c"buffer too small",
        PcsStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pcs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, static.
#[no_mangle]
pub extern "C" fn pcs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// FLOPs

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pcs_model_config_new(
    num_layers: u64,
    hidden_size: u64,
    ffn_intermediate: u64,
    vocab_size: u64,
    kv_total_dim: u64,
    out: *mut *mut PcsModelConfig,
) -> PcsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let cfg = ModelConfig::new(num_layers, hidden_size, ffn_intermediate, vocab_size, kv_total_dim)
            .map_err(|e| (PcsStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(PcsModelConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from [`pcs_model_config_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn pcs_model_config_free(cfg: *mut PcsModelConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Forward FLOPs per token at average sequence length `seq_len`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pcs_forward_flops_per_token(
    cfg: *const PcsModelConfig,
    seq_len: u64,
    out: *mut f64,
) -> PcsStatus {
    guard(|| {
        let cfg = &in_ref(cfg, "cfg")?.0;
        let out = out_ref(out, "out")?;
        *out = flops::forward_flops_per_token(cfg, seq_len).map_err(domain)?.value();
        Ok(())
    })
}

/// FLOPs of one training step, as a double.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pcs_step_flops(
    cfg: *const PcsModelConfig,
    spec: *const PcsStepSpec,
    out: *mut f64,
) -> PcsStatus {
    guard(|| {
        let cfg = &in_ref(cfg, "cfg")?.0;
        let spec: StepSpec = (*in_ref(spec, "spec")?).into();
        let out = out_ref(out, "out")?;
        *out = spec.flops(cfg).map_err(domain)?.value();
        Ok(())
    })
}

/// Exact FLOPs of one training step as a 128-bit integer split into high
/// and low 64-bit halves.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pcs_step_flops_exact(
    cfg: *const PcsModelConfig,
    spec: *const PcsStepSpec,
    out_hi: *mut u64,
    out_lo: *mut u64,
) -> PcsStatus {
    guard(|| {
        let cfg = &in_ref(cfg, "cfg")?.0;
        let spec: StepSpec = (*in_ref(spec, "spec")?).into();
        let hi = out_ref(out_hi, "out_hi")?;
        let lo = out_ref(out_lo, "out_lo")?;
        let v = spec.flops_exact(cfg).map_err(domain)?;
        *hi = (v >> 64) as u64;
        *lo = v as u64;
        Ok(())
    })
}

/// Cumulative exaFLOPs after each of `n` steps, written to `out[0..n]`.
///
/// # Safety
/// `steps` and `out` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn pcs_cumulative_exaflops(
    cfg: *const PcsModelConfig,
    steps: *const PcsStepSpec,
    n: size_t,
    out: *mut f64,
) -> PcsStatus {
    guard(|| {
        let cfg = &in_ref(cfg, "cfg")?.0;
        if n == 0 {
            return fail(PcsStatus::InvalidArgument, "no steps");
        }
        if steps.is_null() || out.is_null() {
            return fail(PcsStatus::NullPointer, "steps or out is null");
        }
        let specs: Vec<StepSpec> = std::slice::from_raw_parts(steps, n).iter().map(|&s| s.into()).collect();
        let totals = flops::accumulate_run_flops(cfg, &specs).map_err(domain)?;
        let out = std::slice::from_raw_parts_mut(out, n);
        for (o, t) in out.iter_mut().zip(totals) {
            *o = t.exaflops();
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// curve

/// Curve value at compute `x` (exaFLOPs, `>= 0`).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pcs_sigmoid_eval(params: PcsSigmoidParams, x: f64, out: *mut f64) -> PcsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = pcscale::scaling::eval_sigmoid(&params.into(), x).map_err(domain)?;
        Ok(())
    })
}

/// Curve value and its gradient with respect to
/// `(p_start, ceiling, c_mid, steepness)`; `grad` receives 4 values.
///
/// # Safety
/// `value` must be valid and `grad` must hold 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn pcs_sigmoid_gradient(
    params: PcsSigmoidParams,
    x: f64,
    value: *mut f64,
    grad: *mut f64,
) -> PcsStatus {
    guard(|| {
        let p: SigmoidParams = params.into();
        pcscale::scaling::eval_sigmoid(&p, x).map_err(domain)?;
        let value = out_ref(value, "value")?;
        if grad.is_null() {
            return fail(PcsStatus::NullPointer, "grad is null");
        }
        let (v, g) = p.value_and_gradient(x);
        *value = v;
        std::slice::from_raw_parts_mut(grad, 4).copy_from_slice(&g);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// fitting

#[no_mangle]
pub extern "C" fn pcs_fit_options_default() -> PcsFitOptions {
    (&FitConfig::default()).into()
}

/// Robust fit of the curve to `(xs[i], ys[i])`, `xs` ascending in exaFLOPs.
///
/// # Safety
/// `xs` and `ys` must hold `n` doubles; `options` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn pcs_fit(
    xs: *const f64,
    ys: *const f64,
    n: size_t,
    options: *const PcsFitOptions,
    out: *mut *mut PcsFitResult,
) -> PcsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let xs = slice(xs, n, "xs")?;
        let ys = slice(ys, n, "ys")?;
        let config = match options.as_ref() {
            Some(o) => FitConfig::from(o),
            None => FitConfig::default(),
        };
        config
            .validate()
            .map_err(|e| (PcsStatus::InvalidArgument, e.to_string()))?;
        let series = RunSeries::from_xy("ffi", xs, ys).map_err(domain)?;
        let result = fit::robust_fit_pipeline(&series, &config).map_err(fit_err)?;
        *out = Box::into_raw(Box::new(PcsFitResult { result, config }));
        Ok(())
    })
}

/// # Safety
/// `r` must come from [`pcs_fit`] or be null.
#[no_mangle]
pub unsafe extern "C" fn pcs_fit_result_free(r: *mut PcsFitResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pcs_fit_result_params(r: *const PcsFitResult, out: *mut PcsSigmoidParams) -> PcsStatus {
    guard(|| {
        let r = in_ref(r, "result")?;
        *out_ref(out, "out")? = r.result.params.into();
        Ok(())
    })
}

/// Training R² over the final inliers. `has_value` is set to 0 when it is
/// undefined (constant targets), in which case `out` is left untouched.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pcs_fit_result_r2_train(
    r: *const PcsFitResult,
    has_value: *mut c_int,
    out: *mut f64,
) -> PcsStatus {
    optional_metric(r, has_value, out, |r| r.r2_train)
}

/// Validation RMSE; `has_value` is 0 when the validation split is empty.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pcs_fit_result_rmse_val(
    r: *const PcsFitResult,
    has_value: *mut c_int,
    out: *mut f64,
) -> PcsStatus {
    optional_metric(r, has_value, out, |r| r.rmse_val)
}

unsafe fn optional_metric(
    r: *const PcsFitResult,
    has_value: *mut c_int,
    out: *mut f64,
    get: impl FnOnce(&FitResult) -> Option<f64>,
) -> PcsStatus {
    guard(|| {
        let r = in_ref(r, "result")?;
        let has = out_ref(has_value, "has_value")?;
        let out = out_ref(out, "out")?;
        match get(&r.result) {
            Some(v) => {
                *has = 1;
                *out = v;
            }
            None => *has = 0,
        }
        Ok(())
    })
}

/// Nonzero when the optimizer reported convergence.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pcs_fit_result_converged(r: *const PcsFitResult, out: *mut c_int) -> PcsStatus {
    guard(|| {
        let r = in_ref(r, "result")?;
        *out_ref(out, "out")? = r.result.converged as c_int;
        Ok(())
    })
}

/// Training-split indices of removed points. Call with `buf = NULL` to get
/// the count in `len`; otherwise `len` is the capacity on input and the
/// count on output.
///
/// # Safety
/// `buf` must hold `*len` elements when not null.
#[no_mangle]
pub unsafe extern "C" fn pcs_fit_result_removed(
    r: *const PcsFitResult,
    buf: *mut size_t,
    len: *mut size_t,
) -> PcsStatus {
    guard(|| {
        let r = in_ref(r, "result")?;
        let len = out_ref(len, "len")?;
        let removed: Vec<usize> = r.result.removed_outliers.iter().map(|o| o.index).collect();
        let capacity = *len;
        *len = removed.len();
        if buf.is_null() {
            return Ok(());
        }
        if capacity < removed.len() {
            return fail(
                PcsStatus::BufferTooSmall,
                format!("need {} slots, got {capacity}", removed.len()),
            );
        }
        std::slice::from_raw_parts_mut(buf, removed.len()).copy_from_slice(&removed);
        Ok(())
    })
}

/// Fit artifact JSON, as written by `pcscale fit`. Release with
/// [`pcs_string_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pcs_fit_result_to_json(r: *const PcsFitResult, out: *mut *mut c_char) -> PcsStatus {
    guard(|| {
        let r = in_ref(r, "result")?;
        let out = out_ref(out, "out")?;
        let labels = ArtifactLabels::default();
        let art = FitArtifact::new("ffi", labels, r.config.clone(), r.result.clone());
        *out = into_c_string(art.to_json());
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// phases and statistics

/// Label each point of a validation-loss curve. `out` receives `n` labels.
///
/// # Safety
/// `xs`, `losses` and `out` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn pcs_classify_phases(
    xs: *const f64,
    losses: *const f64,
    n: size_t,
    delta: f64,
    delta2: f64,
    out: *mut PcsPhaseLabel,
) -> PcsStatus {
    guard(|| {
        let thr = PhaseThresholds::new(delta, delta2).map_err(|e| (PcsStatus::InvalidArgument, e.to_string()))?;
        let xs = slice(xs, n, "xs")?;
        let losses = slice(losses, n, "losses")?;
        if out.is_null() && n > 0 {
            return fail(PcsStatus::NullPointer, "out is null");
        }
        let series = LossSeries::from_xy(xs, losses).map_err(domain)?;
        let labels = phases::classify_phases(&series, &thr).map_err(domain)?;
        let out = std::slice::from_raw_parts_mut(out, labels.len());
        for (o, l) in out.iter_mut().zip(labels) {
            *o = l.into();
        }
        Ok(())
    })
}

/// Pearson correlation of `n` pairs.
///
/// # Safety
/// `xs` and `ys` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pcs_pearson(xs: *const f64, ys: *const f64, n: size_t, out: *mut f64) -> PcsStatus {
    guard(|| {
        let xs = slice(xs, n, "xs")?;
        let ys = slice(ys, n, "ys")?;
        let out = out_ref(out, "out")?;
        *out = analysis::pearson(xs, ys).map_err(domain)?;
        Ok(())
    })
}

/// Median absolute deviation (unscaled).
///
/// # Safety
/// `values` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pcs_mad(values: *const f64, n: size_t, out: *mut f64) -> PcsStatus {
    guard(|| {
        let values = slice(values, n, "values")?;
        let out = out_ref(out, "out")?;
        *out = fit::mad(values).map_err(domain)?;
        Ok(())
    })
}

/// `successes / attempts`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pcs_win_rate(successes: u64, attempts: u64, out: *mut f64) -> PcsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = analysis::win_rate(successes, attempts)
            .map_err(|e| (PcsStatus::InvalidArgument, e.to_string()))?
            .rate;
        Ok(())
    })
}

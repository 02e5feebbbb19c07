//! C ABI for the decollapse library.
//!
//! Waveforms are opaque handles created and freed by this library; every
//! other type crossing the boundary is a plain C struct or scalar.
//! Functions return [`DclStatus`]; on any failure a thread-local message is
//! retrievable with [`dcl_last_error_message`]. Strings returned by the
//! library must be released with [`dcl_string_free`], waveforms with
//! [`dcl_waveform_free`].
//!
//! The generated header lands in `include/decollapse.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use decollapse::cssd::{det_curve, detect_utterance, ScoreKind};
use decollapse::envelope::extract_envelope;
use decollapse::pipeline::{generate_utterance, PipelineConfig};
use decollapse::sampler::{CollapseScenario, SimulatedSampler};
use decollapse::signal::{
    level_amplitude, mu_law_compand, quantize, wav_read, wav_write, LevelIndex, Waveform,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DclStatus {
    DclOk = 0,
    DclErrNullArgument = 1,
    DclErrUtf8 = 2,
    DclErrIo = 3,
    DclErrFormat = 4,
    DclErrDomain = 5,
    DclErrMismatch = 6,
    DclErrCapacity = 7,
    DclErrInternal = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: DclStatus, message: &str) -> DclStatus {
    set_error(message);
    status
}

/// Message for the most recent failure on this thread. Valid until the
/// next failing call; do not free.
#[no_mangle]
pub extern "C" fn dcl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must have been returned by a `dcl_` function and not freed already.
#[no_mangle]
pub unsafe extern "C" fn dcl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Opaque mono waveform handle.
pub struct DclWaveform {
    inner: Waveform,
}

/// One detector verdict.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DclSegmentVerdict {
    pub segment_index: usize,
    pub score: f64,
    pub flagged: bool,
}

/// Detector and pipeline settings; get defaults from [`dcl_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DclConfig {
    pub segment_length: usize,
    pub slot_length: usize,
    pub lowpass_cutoff_hz: f64,
    /// 0 = absolute-value rectifier, nonzero = Hilbert.
    pub hilbert: i32,
    pub hilbert_context: usize,
    pub threshold: f64,
    pub lpc_order: usize,
    pub frame_length_ms: f64,
    pub frame_shift_ms: f64,
    /// Escalating regularization schedule; first `n_rho` entries are used.
    pub rho_schedule: [f64; 8],
    pub n_rho: usize,
}

#[no_mangle]
pub extern "C" fn dcl_config_default() -> DclConfig {
    let cfg = PipelineConfig::default();
    let mut rho_schedule = [0.0f64; 8];
    for (slot, &r) in rho_schedule.iter_mut().zip(&cfg.rho_schedule) {
        *slot = r;
    }
    DclConfig {
        segment_length: cfg.segment_length,
        slot_length: cfg.slot_length,
        lowpass_cutoff_hz: cfg.lowpass_cutoff_hz,
        hilbert: i32::from(cfg.hilbert),
        hilbert_context: cfg.hilbert_context,
        threshold: cfg.threshold,
        lpc_order: cfg.lpc_order,
        frame_length_ms: cfg.frame_length_ms,
        frame_shift_ms: cfg.frame_shift_ms,
        rho_schedule,
        n_rho: cfg.rho_schedule.len(),
    }
}

fn pipeline_config(c: &DclConfig) -> Result<PipelineConfig, String> {
    if c.n_rho > 8 {
        return Err(format!("n_rho {} exceeds the schedule capacity 8", c.n_rho));
    }
    Ok(PipelineConfig {
        segment_length: c.segment_length,
        slot_length: c.slot_length,
        lowpass_cutoff_hz: c.lowpass_cutoff_hz,
        hilbert: c.hilbert != 0,
        hilbert_context: c.hilbert_context,
        threshold: c.threshold,
        score_kind: ScoreKind::MaxDiff,
        lpc_order: c.lpc_order,
        frame_length_ms: c.frame_length_ms,
        frame_shift_ms: c.frame_shift_ms,
        rho_schedule: c.rho_schedule[..c.n_rho].to_vec(),
    })
}

unsafe fn path_from(ptr_: *const c_char) -> Result<PathBuf, DclStatus> {
    if ptr_.is_null() {
        set_error("null path");
        return Err(DclStatus::DclErrNullArgument);
    }
    match CStr::from_ptr(ptr_).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(DclStatus::DclErrUtf8)
        }
    }
}

/// Read a mono 16-bit PCM WAV file. Returns null on failure (see
/// [`dcl_last_error_message`]).
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dcl_waveform_read_wav(path: *const c_char) -> *mut DclWaveform {
    let path = match path_from(path) {
        Ok(p) => p,
        Err(_) => return ptr::null_mut(),
    };
    match catch_unwind(|| wav_read(&path)) {
        Ok(Ok(inner)) => Box::into_raw(Box::new(DclWaveform { inner })),
        Ok(Err(e)) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
        Err(_) => {
            set_error("internal panic");
            ptr::null_mut()
        }
    }
}

/// Build a waveform from a sample buffer (amplitudes in [-1, 1]).
///
/// # Safety
/// `samples` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn dcl_waveform_from_samples(
    samples: *const f64,
    len: usize,
    sample_rate: u32,
) -> *mut DclWaveform {
    if samples.is_null() && len > 0 {
        set_error("null sample buffer");
        return ptr::null_mut();
    }
    let data = if len == 0 {
        Vec::new()
    } else {
        std::slice::from_raw_parts(samples, len).to_vec()
    };
    match Waveform::new(data, sample_rate) {
        Ok(inner) => Box::into_raw(Box::new(DclWaveform { inner })),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// Write a waveform as mono 16-bit PCM.
///
/// # Safety
/// `w` must be a live waveform handle; `path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn dcl_waveform_write_wav(
    w: *const DclWaveform,
    path: *const c_char,
) -> DclStatus {
    let Some(w) = w.as_ref() else {
        return fail(DclStatus::DclErrNullArgument, "null waveform");
    };
    let path = match path_from(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match wav_write(&path, &w.inner) {
        Ok(()) => DclStatus::DclOk,
        Err(e) => fail(DclStatus::DclErrIo, &e.to_string()),
    }
}

/// Number of samples.
///
/// # Safety
/// `w` must be a live waveform handle.
#[no_mangle]
pub unsafe extern "C" fn dcl_waveform_len(w: *const DclWaveform) -> usize {
    w.as_ref().map_or(0, |w| w.inner.len())
}

/// Sample rate in Hz.
///
/// # Safety
/// `w` must be a live waveform handle.
#[no_mangle]
pub unsafe extern "C" fn dcl_waveform_sample_rate(w: *const DclWaveform) -> u32 {
    w.as_ref().map_or(0, |w| w.inner.sample_rate)
}

/// Copy samples into a caller buffer of `capacity` doubles.
///
/// # Safety
/// `out` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dcl_waveform_copy_samples(
    w: *const DclWaveform,
    out: *mut f64,
    capacity: usize,
) -> DclStatus {
    let Some(w) = w.as_ref() else {
        return fail(DclStatus::DclErrNullArgument, "null waveform");
    };
    if out.is_null() {
        return fail(DclStatus::DclErrNullArgument, "null output buffer");
    }
    if capacity < w.inner.len() {
        return fail(
            DclStatus::DclErrCapacity,
            &format!("buffer holds {capacity}, waveform has {}", w.inner.len()),
        );
    }
    std::ptr::copy_nonoverlapping(w.inner.samples.as_ptr(), out, w.inner.len());
    DclStatus::DclOk
}

/// Release a waveform handle.
///
/// # Safety
/// `w` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dcl_waveform_free(w: *mut DclWaveform) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// μ-law companding curve; fails outside [-1, 1].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcl_mu_law_compand(x: f64, out: *mut f64) -> DclStatus {
    if out.is_null() {
        return fail(DclStatus::DclErrNullArgument, "null output");
    }
    match mu_law_compand(x) {
        Ok(v) => {
            *out = v;
            DclStatus::DclOk
        }
        Err(e) => fail(DclStatus::DclErrDomain, &e.to_string()),
    }
}

/// Quantize an amplitude to its μ-law level index.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcl_quantize(x: f64, out: *mut u8) -> DclStatus {
    if out.is_null() {
        return fail(DclStatus::DclErrNullArgument, "null output");
    }
    match quantize(x) {
        Ok(level) => {
            *out = level.0;
            DclStatus::DclOk
        }
        Err(e) => fail(DclStatus::DclErrDomain, &e.to_string()),
    }
}

/// Decoded amplitude of a μ-law level.
#[no_mangle]
pub extern "C" fn dcl_level_amplitude(level: u8) -> f64 {
    level_amplitude(LevelIndex(level))
}

/// Smoothed amplitude envelope of a waveform; writes one value per sample.
///
/// # Safety
/// `out` must point to at least `dcl_waveform_len(w)` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dcl_extract_envelope(
    w: *const DclWaveform,
    config: *const DclConfig,
    out: *mut f64,
    capacity: usize,
) -> DclStatus {
    let Some(w) = w.as_ref() else {
        return fail(DclStatus::DclErrNullArgument, "null waveform");
    };
    let Some(config) = config.as_ref() else {
        return fail(DclStatus::DclErrNullArgument, "null config");
    };
    if out.is_null() {
        return fail(DclStatus::DclErrNullArgument, "null output buffer");
    }
    if capacity < w.inner.len() {
        return fail(DclStatus::DclErrCapacity, "output buffer too small");
    }
    let cfg = match pipeline_config(config) {
        Ok(c) => c,
        Err(e) => return fail(DclStatus::DclErrFormat, &e),
    };
    let result = catch_unwind(AssertUnwindSafe(|| {
        extract_envelope(&w.inner, &cfg.envelope_config())
    }));
    match result {
        Ok(env) => {
            std::ptr::copy_nonoverlapping(env.values.as_ptr(), out, env.values.len());
            DclStatus::DclOk
        }
        Err(_) => fail(DclStatus::DclErrInternal, "internal panic"),
    }
}

/// Segment the generated utterance against the reference and write one
/// verdict per segment. `n_out` receives the verdict count; the capacity
/// needed is `ceil(len / segment_length)`.
///
/// # Safety
/// `verdicts` must point to `capacity` writable entries; `n_out` writable.
#[no_mangle]
pub unsafe extern "C" fn dcl_detect(
    gen: *const DclWaveform,
    reference: *const DclWaveform,
    config: *const DclConfig,
    verdicts: *mut DclSegmentVerdict,
    capacity: usize,
    n_out: *mut usize,
) -> DclStatus {
    let (Some(gen), Some(reference), Some(config)) =
        (gen.as_ref(), reference.as_ref(), config.as_ref())
    else {
        return fail(DclStatus::DclErrNullArgument, "null argument");
    };
    if verdicts.is_null() || n_out.is_null() {
        return fail(DclStatus::DclErrNullArgument, "null output");
    }
    let cfg = match pipeline_config(config) {
        Ok(c) => c,
        Err(e) => return fail(DclStatus::DclErrFormat, &e),
    };
    let result = catch_unwind(AssertUnwindSafe(|| {
        detect_utterance(&gen.inner, &reference.inner, &cfg.detector_config())
    }));
    match result {
        Ok(Ok(list)) => {
            if capacity < list.len() {
                return fail(
                    DclStatus::DclErrCapacity,
                    &format!("need {} verdict slots, have {capacity}", list.len()),
                );
            }
            for (i, v) in list.iter().enumerate() {
                *verdicts.add(i) = DclSegmentVerdict {
                    segment_index: v.segment_index,
                    score: v.score,
                    flagged: v.flagged,
                };
            }
            *n_out = list.len();
            DclStatus::DclOk
        }
        Ok(Err(e)) => fail(DclStatus::DclErrMismatch, &e.to_string()),
        Err(_) => fail(DclStatus::DclErrInternal, "internal panic"),
    }
}

/// DET sweep over labeled scores (`labels[i]` nonzero means collapsed);
/// writes the equal-error rate and its threshold.
///
/// # Safety
/// `scores` and `labels` must hold `n` readable entries; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn dcl_det_eer(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    eer_out: *mut f64,
    threshold_out: *mut f64,
) -> DclStatus {
    if scores.is_null() || labels.is_null() || eer_out.is_null() || threshold_out.is_null() {
        return fail(DclStatus::DclErrNullArgument, "null argument");
    }
    let scores = std::slice::from_raw_parts(scores, n);
    let labels: Vec<bool> = std::slice::from_raw_parts(labels, n)
        .iter()
        .map(|&v| v != 0)
        .collect();
    match det_curve(scores, &labels) {
        Ok(curve) => {
            *eer_out = curve.eer;
            *threshold_out = curve.eer_threshold;
            DclStatus::DclOk
        }
        Err(e) => fail(DclStatus::DclErrMismatch, &e.to_string()),
    }
}

/// Run the full suppression pipeline with the collapse simulator as the
/// sample source: generate against the reference, regenerate flagged
/// segments under the escalating schedule, and return the audio. When
/// `report_json_out` is non-null it receives the per-segment report (free
/// with [`dcl_string_free`]).
///
/// # Safety
/// `scenario_json` must be a valid NUL-terminated string; `reference` a
/// live handle; `report_json_out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn dcl_generate_simulated(
    scenario_json: *const c_char,
    reference: *const DclWaveform,
    config: *const DclConfig,
    seed: u64,
    report_json_out: *mut *mut c_char,
) -> *mut DclWaveform {
    let Some(reference) = reference.as_ref() else {
        set_error("null reference");
        return ptr::null_mut();
    };
    let Some(config) = config.as_ref() else {
        set_error("null config");
        return ptr::null_mut();
    };
    if scenario_json.is_null() {
        set_error("null scenario");
        return ptr::null_mut();
    }
    let Ok(text) = CStr::from_ptr(scenario_json).to_str() else {
        set_error("scenario is not valid UTF-8");
        return ptr::null_mut();
    };
    let scenario = match CollapseScenario::from_json(text) {
        Ok(s) => s,
        Err(e) => {
            set_error(&e.to_string());
            return ptr::null_mut();
        }
    };
    let cfg = match pipeline_config(config) {
        Ok(c) => c,
        Err(e) => {
            set_error(&e);
            return ptr::null_mut();
        }
    };
    let n = scenario.n_samples.min(reference.inner.len());
    let result = catch_unwind(AssertUnwindSafe(|| -> Result<_, String> {
        let mut sampler =
            SimulatedSampler::new(scenario.clone(), scenario.seed).map_err(|e| e.to_string())?;
        generate_utterance(&mut sampler, &reference.inner, n, &cfg, seed, "capi")
            .map_err(|e| e.to_string())
    }));
    match result {
        Ok(Ok((waveform, report))) => {
            if !report_json_out.is_null() {
                let json = serde_json::to_string(&report).unwrap_or_default();
                let json = json.replace('\0', " ");
                *report_json_out = CString::new(json).unwrap_or_default().into_raw();
            }
            Box::into_raw(Box::new(DclWaveform { inner: waveform }))
        }
        Ok(Err(e)) => {
            set_error(&e);
            ptr::null_mut()
        }
        Err(_) => {
            set_error("internal panic");
            ptr::null_mut()
        }
    }
}

//! Per-frame linear-prediction analysis of the reference waveform and
//! per-sample mean prediction from generated-sample history.
//!
//! The estimator is the autocorrelation method: Hann window, lag-domain
//! autocorrelation, Levinson-Durbin recursion. Coefficients use the
//! prediction-weight convention `x̂_t = Σ a_i · x_{t−i}`, so an AR(1)
//! process `x_t = 0.9·x_{t−1} + e_t` yields `a_1 ≈ 0.9`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{codec_roundtrip, Waveform};

/// Variance floor for degenerate (e.g. silent) frames, in amplitude² units.
/// Keeps the Gaussian mask from collapsing to zero width.
pub const RESIDUAL_VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LpcError {
    #[error("reference has {got} samples, need at least the frame length {need}")]
    ReferenceTooShort { got: usize, need: usize },
    #[error("invalid frame grid: length {frame_length}, shift {frame_shift}")]
    BadGrid { frame_length: usize, frame_shift: usize },
    #[error(transparent)]
    Signal(#[from] crate::signal::SignalError),
}

/// Frame layout over a signal: frame `k` starts at `k · frame_shift`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameGrid {
    pub frame_length: usize,
    pub frame_shift: usize,
    pub count: usize,
}

impl FrameGrid {
    /// Grid for a signal of `n_samples`, with frame length and shift given in
    /// milliseconds (rounded to whole samples).
    pub fn from_ms(
        frame_length_ms: f64,
        frame_shift_ms: f64,
        sample_rate: u32,
        n_samples: usize,
    ) -> Result<Self, LpcError> {
        let frame_length = (frame_length_ms * f64::from(sample_rate) / 1000.0).round() as usize;
        let frame_shift = (frame_shift_ms * f64::from(sample_rate) / 1000.0).round() as usize;
        Self::new(frame_length, frame_shift, n_samples)
    }

    pub fn new(frame_length: usize, frame_shift: usize, n_samples: usize) -> Result<Self, LpcError> {
        if frame_shift < 1 || frame_length < frame_shift {
            return Err(LpcError::BadGrid { frame_length, frame_shift });
        }
        if n_samples < frame_length {
            return Err(LpcError::ReferenceTooShort { got: n_samples, need: frame_length });
        }
        let count = (n_samples - frame_length) / frame_shift + 1;
        Ok(Self { frame_length, frame_shift, count })
    }
}

/// Prediction weights and per-sample residual variance for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpcFrame {
    /// `a_1..a_l` with `x̂_t = Σ a_i · x_{t−i}`.
    pub coeffs: Vec<f64>,
    pub residual_variance: f64,
}

impl LpcFrame {
    fn degenerate(order: usize) -> Self {
        Self { coeffs: vec![0.0; order], residual_variance: RESIDUAL_VARIANCE_FLOOR }
    }
}

/// Per-frame analysis of a whole reference utterance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpcTrack {
    pub frames: Vec<LpcFrame>,
    pub grid: FrameGrid,
    pub order: usize,
}

impl LpcTrack {
    /// Frame governing sample `t` (see [`frame_for_sample`]).
    pub fn frame_at(&self, t: usize) -> &LpcFrame {
        &self.frames[frame_for_sample(t, &self.grid)]
    }
}

pub fn hann_window(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|i| {
            let phase = std::f64::consts::TAU * i as f64 / (len - 1) as f64;
            0.5 * (1.0 - phase.cos())
        })
        .collect()
}

/// Energy of the Hann window, `Σ w(t)²`. Dividing the Levinson final error
/// by this turns the windowed-sum error into a per-sample variance estimate.
pub fn hann_window_energy(len: usize) -> f64 {
    hann_window(len).iter().map(|w| w * w).sum()
}

/// Windowed autocorrelation `r[k] = Σ_t w(t)·x(t) · w(t+k)·x(t+k)` for
/// `k = 0..=max_lag`, with a Hann window `w`. An all-zero frame yields an
/// all-zero vector.
pub fn autocorrelate(frame: &[f64], max_lag: usize) -> Vec<f64> {
    assert!(!frame.is_empty(), "autocorrelation of an empty frame");
    let w = hann_window(frame.len());
    let windowed: Vec<f64> = frame.iter().zip(&w).map(|(x, w)| x * w).collect();
    let n = windowed.len();
    let mut r = vec![0.0; max_lag + 1];
    for (k, rk) in r.iter_mut().enumerate() {
        if k >= n {
            break;
        }
        *rk = (0..n - k).map(|t| windowed[t] * windowed[t + k]).sum();
    }
    r
}

/// Levinson-Durbin recursion on an autocorrelation sequence.
///
/// `window_energy` is the divisor applied to the recursion's final error so
/// that `residual_variance` estimates per-sample error variance; pass
/// `Σ w(t)²` for autocorrelations produced by [`autocorrelate`], or 1.0 for
/// unwindowed sums already scaled per sample.
///
/// A degenerate input yields zero coefficients and the floor variance
/// rather than an error. Degenerate means `r[0] ≤ 0`, or per-sample power
/// `r[0]/window_energy` at or below the variance floor — prediction cannot
/// reduce the error below the floor there, and the μ-law codec turns even
/// digital silence into a tiny DC constant that carries no structure.
pub fn levinson_durbin(autocorr: &[f64], window_energy: f64) -> LpcFrame {
    let order = autocorr.len().saturating_sub(1);
    if autocorr.is_empty() || autocorr[0] <= RESIDUAL_VARIANCE_FLOOR * window_energy {
        return LpcFrame::degenerate(order);
    }

    let r = autocorr;
    let mut a = vec![0.0; order];
    let mut prev = vec![0.0; order];
    let mut error = r[0];

    for m in 0..order {
        let mut acc = r[m + 1];
        for i in 0..m {
            acc -= prev[i] * r[m - i];
        }
        if error <= 0.0 {
            // Exactly predictable signal; remaining coefficients stay zero.
            error = 0.0;
            break;
        }
        let k = acc / error;
        a[m] = k;
        for i in 0..m {
            a[i] = prev[i] - k * prev[m - 1 - i];
        }
        error *= 1.0 - k * k;
        prev[..=m].copy_from_slice(&a[..=m]);
    }

    let variance = (error / window_energy).max(RESIDUAL_VARIANCE_FLOOR);
    LpcFrame { coeffs: a, residual_variance: variance }
}

/// Analyze one frame of raw samples: Hann window, autocorrelation, Levinson.
pub fn analyze_frame(frame: &[f64], order: usize) -> LpcFrame {
    let r = autocorrelate(frame, order);
    levinson_durbin(&r, hann_window_energy(frame.len()))
}

/// Full-utterance analysis of the reference waveform.
///
/// The reference is first passed through the μ-law codec round trip so that
/// its sample statistics match what the generator can actually emit; frames
/// are then analyzed on the given grid. Precompute this once per utterance.
pub fn analyze_reference(reference: &Waveform, grid: &FrameGrid, order: usize) -> Result<LpcTrack, LpcError> {
    if reference.len() < grid.frame_length {
        return Err(LpcError::ReferenceTooShort {
            got: reference.len(),
            need: grid.frame_length,
        });
    }
    let coded: Vec<f64> = reference
        .samples
        .iter()
        .map(|&x| codec_roundtrip(x))
        .collect::<Result<_, _>>()?;

    let frames = (0..grid.count)
        .map(|k| {
            let start = k * grid.frame_shift;
            analyze_frame(&coded[start..start + grid.frame_length], order)
        })
        .collect();
    Ok(LpcTrack { frames, grid: *grid, order })
}

/// Frame index governing sample `t`: frame `k` covers samples
/// `[k·shift, (k+1)·shift)`, clamped to the last frame at the tail.
pub fn frame_for_sample(t: usize, grid: &FrameGrid) -> usize {
    (t / grid.frame_shift).min(grid.count - 1)
}

/// LPC mean prediction `μ = Σ a_i · y_{t−i}` from decoded generated samples.
///
/// `history[i]` is `y_{t−1−i}` (most recent first); missing history at the
/// utterance start is zero-padded by the caller.
pub fn predict_mean(history: &[f64], frame: &LpcFrame) -> f64 {
    frame
        .coeffs
        .iter()
        .zip(history)
        .map(|(a, y)| a * y)
        .sum()
}

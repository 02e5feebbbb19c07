//! Waveform-envelope extraction in three steps: rectify, slot-max peak
//! detection, low-pass filtering.
//!
//! The rectifier is either the plain absolute value or the magnitude of the
//! analytic signal (Hilbert transform); the Hilbert variant tends to give a
//! lower detection error. Peak detection replaces every sample in each
//! non-overlapping slot with the slot maximum. The low-pass is a causal
//! 4th-order Butterworth with unity DC gain, so the detector can run
//! segment by segment during generation; the small group delay affects the
//! generated and reference envelopes equally and cancels in the difference.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::signal::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rectifier {
    Abs,
    Hilbert,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    pub rectifier: Rectifier,
    /// Peak-detection slot length in samples.
    pub slot_length: usize,
    /// Low-pass cutoff in Hz; must stay below Nyquist.
    pub lowpass_cutoff: f64,
    /// Zero padding on each side of the analyzed span before the Hilbert
    /// FFT, discarded afterwards; bounds wrap-around edge artifacts.
    pub hilbert_context: usize,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            rectifier: Rectifier::Abs,
            slot_length: 200,
            lowpass_cutoff: 300.0,
            hilbert_context: 400,
        }
    }
}

/// Smoothed amplitude envelope at full sample rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope {
    pub values: Vec<f64>,
    pub config: EnvelopeConfig,
}

/// First step: nonnegative amplitude sequence.
pub fn rectify(w: &Waveform, config: &EnvelopeConfig) -> Vec<f64> {
    match config.rectifier {
        Rectifier::Abs => w.samples.iter().map(|s| s.abs()).collect(),
        Rectifier::Hilbert => analytic_magnitude(&w.samples, config.hilbert_context),
    }
}

/// Magnitude of the analytic signal, computed in the frequency domain over
/// the input padded with `context` zeros on each side.
fn analytic_magnitude(samples: &[f64], context: usize) -> Vec<f64> {
    if samples.is_empty() {
        return Vec::new();
    }
    let n = samples.len() + 2 * context;
    let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n];
    for (b, &s) in buf[context..].iter_mut().zip(samples) {
        *b = Complex64::new(s, 0.0);
    }

    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);

    // Analytic-signal spectrum: keep DC (and Nyquist for even n), double the
    // positive frequencies, zero the negative ones.
    let half = n / 2;
    if n % 2 == 0 {
        for v in &mut buf[1..half] {
            *v *= 2.0;
        }
        for v in &mut buf[half + 1..] {
            *v = Complex64::new(0.0, 0.0);
        }
    } else {
        for v in &mut buf[1..=half] {
            *v *= 2.0;
        }
        for v in &mut buf[half + 1..] {
            *v = Complex64::new(0.0, 0.0);
        }
    }

    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf[context..context + samples.len()]
        .iter()
        .map(|c| (c * scale).norm())
        .collect()
}

/// Second step: replace every sample in each non-overlapping slot with the
/// slot maximum. A short trailing slot is treated the same way.
pub fn peak_detect(rectified: &[f64], slot_length: usize) -> Vec<f64> {
    assert!(slot_length >= 1, "slot length must be at least 1");
    let mut out = Vec::with_capacity(rectified.len());
    for slot in rectified.chunks(slot_length) {
        let max = slot.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        out.extend(std::iter::repeat(max).take(slot.len()));
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    /// Second-order Butterworth low-pass section via the bilinear transform.
    fn butterworth_lowpass(cutoff: f64, sample_rate: f64, q: f64) -> Self {
        let k = (std::f64::consts::PI * cutoff / sample_rate).tan();
        let norm = 1.0 / (1.0 + k / q + k * k);
        let b0 = k * k * norm;
        Self {
            b0,
            b1: 2.0 * b0,
            b2: b0,
            a1: 2.0 * (k * k - 1.0) * norm,
            a2: (1.0 - k / q + k * k) * norm,
        }
    }

    /// Magnitude response at frequency `f`, used as a test oracle.
    #[cfg(test)]
    fn magnitude_at(&self, f: f64, sample_rate: f64) -> f64 {
        let w = std::f64::consts::TAU * f / sample_rate;
        let z1 = Complex64::new(w.cos(), -w.sin());
        let z2 = z1 * z1;
        let num = Complex64::new(self.b0, 0.0) + z1 * self.b1 + z2 * self.b2;
        let den = Complex64::new(1.0, 0.0) + z1 * self.a1 + z2 * self.a2;
        (num / den).norm()
    }
}

/// Pole-pair Q factors of the 4th-order Butterworth prototype.
const BUTTERWORTH4_Q: [f64; 2] = [0.541_196_100_146_197, 1.306_562_964_876_376_6];

/// Third step: causal 4th-order Butterworth low-pass with unity DC gain,
/// run from zero state.
pub fn lowpass(peaks: &[f64], cutoff: f64, sample_rate: u32) -> Vec<f64> {
    let fs = f64::from(sample_rate);
    assert!(
        cutoff > 0.0 && cutoff < fs / 2.0,
        "cutoff {cutoff} Hz outside (0, Nyquist)"
    );
    let sections =
        BUTTERWORTH4_Q.map(|q| Biquad::butterworth_lowpass(cutoff, fs, q));

    let mut out = peaks.to_vec();
    for s in sections {
        // Direct form II transposed.
        let (mut z1, mut z2) = (0.0f64, 0.0f64);
        for v in out.iter_mut() {
            let x = *v;
            let y = s.b0 * x + z1;
            z1 = s.b1 * x - s.a1 * y + z2;
            z2 = s.b2 * x - s.a2 * y;
            *v = y;
        }
    }
    out
}

/// The full three-step extraction.
pub fn extract_envelope(w: &Waveform, config: &EnvelopeConfig) -> Envelope {
    let rectified = rectify(w, config);
    let peaks = peak_detect(&rectified, config.slot_length);
    let values = lowpass(&peaks, config.lowpass_cutoff, w.sample_rate);
    Envelope { values, config: *config }
}

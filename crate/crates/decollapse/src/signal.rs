//! Waveform representation, 16-bit PCM WAV I/O, and the 8-bit μ-law codec.
//!
//! Amplitudes are dimensionless reals in `[-1, 1]`. The μ-law companding
//! curve used throughout is
//!
//! ```text
//! E(x) = sgn(x) · ln(1 + 255·|x|) / ln(256)
//! ```
//!
//! and the 256 discrete levels are placed uniformly in the companded domain
//! via `v(q) = 2q/255 − 1`, so levels 0 and 255 decode to exactly −1 and +1.
//! Note there is no exact-zero level: levels 127 and 128 decode to
//! ∓8.62e-5.

use std::path::Path;
use std::sync::OnceLock;

use thiserror::Error;

const MU: f64 = 255.0;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("amplitude {0} outside [-1, 1]")]
    OutOfRange(f64),
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("expected mono audio, file has {0} channels")]
    ChannelCount(u16),
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("WAV I/O error: {0}")]
    Wav(#[from] hound::Error),
}

/// A mono waveform: amplitudes in `[-1, 1]` at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    /// Build a waveform, validating the amplitude range and sample rate.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, SignalError> {
        if sample_rate == 0 {
            return Err(SignalError::ZeroSampleRate);
        }
        if let Some(&bad) = samples.iter().find(|s| !(-1.0..=1.0).contains(*s)) {
            return Err(SignalError::OutOfRange(bad));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// One of the 256 μ-law quantization levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LevelIndex(pub u8);

impl LevelIndex {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Decoded amplitude of every level, strictly increasing in the index.
#[derive(Debug, Clone)]
pub struct LevelTable {
    amplitudes: [f64; 256],
}

impl LevelTable {
    pub fn new() -> Self {
        let mut amplitudes = [0.0; 256];
        for (q, a) in amplitudes.iter_mut().enumerate() {
            *a = decode_level(q as u8);
        }
        Self { amplitudes }
    }

    /// Shared table; the mapping is fixed so one instance serves everyone.
    pub fn global() -> &'static LevelTable {
        static TABLE: OnceLock<LevelTable> = OnceLock::new();
        TABLE.get_or_init(LevelTable::new)
    }

    pub fn amplitude(&self, q: LevelIndex) -> f64 {
        self.amplitudes[q.index()]
    }

    pub fn amplitudes(&self) -> &[f64; 256] {
        &self.amplitudes
    }
}

impl Default for LevelTable {
    fn default() -> Self {
        Self::new()
    }
}

/// μ-law companding curve `E(x)`, mapping `[-1, 1]` onto itself.
///
/// Odd and strictly increasing; errors if `|x| > 1`.
pub fn mu_law_compand(x: f64) -> Result<f64, SignalError> {
    if !x.is_finite() || x.abs() > 1.0 {
        return Err(SignalError::OutOfRange(x));
    }
    Ok(x.signum() * (1.0 + MU * x.abs()).ln() / (1.0 + MU).ln())
}

/// Analytic inverse of [`mu_law_compand`].
pub fn mu_law_expand(y: f64) -> Result<f64, SignalError> {
    if !y.is_finite() || y.abs() > 1.0 {
        return Err(SignalError::OutOfRange(y));
    }
    Ok(y.signum() * ((1.0 + MU).powf(y.abs()) - 1.0) / MU)
}

/// Quantize an amplitude to its μ-law level.
///
/// The companded value is mapped to `[0, 255]` by `(E(x) + 1)/2 · 255` and
/// rounded half away from zero (so an input of exactly 0 lands on level 128),
/// then clamped.
pub fn quantize(x: f64) -> Result<LevelIndex, SignalError> {
    let companded = mu_law_compand(x)?;
    let q = ((companded + 1.0) / 2.0 * 255.0).round().clamp(0.0, 255.0);
    Ok(LevelIndex(q as u8))
}

/// Decoded amplitude of level `q`: the companding inverse of `v(q) = 2q/255 − 1`.
pub fn level_amplitude(q: LevelIndex) -> f64 {
    decode_level(q.0)
}

fn decode_level(q: u8) -> f64 {
    let v = 2.0 * f64::from(q) / 255.0 - 1.0;
    v.signum() * ((1.0 + MU).powf(v.abs()) - 1.0) / MU
}

/// Quantize then decode: the amplitude the codec would reproduce for `x`.
pub fn codec_roundtrip(x: f64) -> Result<f64, SignalError> {
    Ok(level_amplitude(quantize(x)?))
}

/// Read a mono 16-bit PCM WAV file. Samples are scaled by 1/32768.
pub fn wav_read<P: AsRef<Path>>(path: P) -> Result<Waveform, SignalError> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(SignalError::ChannelCount(spec.channels));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(SignalError::UnsupportedFormat(format!(
            "{:?} {}-bit (need 16-bit PCM)",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<Result<Vec<_>, _>>()?;
    Waveform::new(samples, spec.sample_rate)
}

/// Write a waveform as mono 16-bit PCM. Values are rounded and clamped to
/// the int16 range, so a read-back differs by at most 1/32768.
pub fn wav_write<P: AsRef<Path>>(path: P, w: &Waveform) -> Result<(), SignalError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &w.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v)?;
    }
    writer.finalize()?;
    Ok(())
}

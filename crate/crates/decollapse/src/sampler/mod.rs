//! Sample-distribution sources for autoregressive generation: the source
//! contract, per-sample conditioning tracks, deterministic draw streams, a
//! WaveNet-style dilated causal network (inference only), and a synthetic
//! collapse simulator for testing the suppression machinery.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::lpcdc::Pmf256;
use crate::signal::LevelIndex;

pub mod simulate;
pub mod wavenet;

pub use simulate::{
    build_corpus, reference_waveform, simulate_generate, CollapseKind, CollapseScenario,
    CorpusSpec, Injection, LabeledScenario, SimulatedSampler,
};
pub use wavenet::{load_weights, save_weights, wn_forward, wn_generate, WnConfig, WnModel, WnSampler};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("bad weight file: {0}")]
    WeightFormat(String),
    #[error("bad aux track file: {0}")]
    AuxFormat(String),
    #[error("bad scenario: {0}")]
    BadScenario(String),
    #[error("aux track covers {covered} samples, {needed} requested")]
    AuxTooShort { covered: usize, needed: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Pmf(#[from] crate::lpcdc::PmfError),
}

/// A per-utterance source of per-sample PMFs over the 256 levels.
///
/// The generation loop feeds back the *accepted* history — which the
/// distribution constraint may have altered — so a source's later
/// predictions react to constrained draws exactly as a real autoregressive
/// model would. Predictions may read at most [`receptive_field`] trailing
/// history samples; anything older must not influence the output.
///
/// [`receptive_field`]: SampleSource::receptive_field
pub trait SampleSource {
    fn receptive_field(&self) -> usize;

    /// PMF for sample `t`. `history` is the accepted prefix `y_0..y_{t−1}`
    /// (oldest first, `history.len() == t`); missing context at the
    /// utterance start is the zero-amplitude level.
    ///
    /// `t` may rewind to an earlier position (segment regeneration);
    /// implementations rebuild any internal state from the given prefix.
    fn predict(&mut self, t: usize, history: &[LevelIndex]) -> Pmf256;
}

/// Deterministic, randomly addressable stream of uniform draws.
///
/// Draw `t` of attempt `a` is fixed by `(base_seed, a, t)` alone: the
/// attempt selects a ChaCha stream and `t` the block offset within it. A
/// regeneration attempt therefore resamples every position of its segment,
/// while attempt 0 reproduces plain generation sample for sample no matter
/// how the utterance is segmented.
pub struct DrawStream {
    rng: ChaCha12Rng,
}

impl DrawStream {
    pub fn new(base_seed: u64, attempt: u32) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(base_seed);
        rng.set_stream(u64::from(attempt));
        Self { rng }
    }

    /// Uniform in `[0, 1)` for sample index `t`.
    pub fn uniform_at(&mut self, t: usize) -> f64 {
        self.rng.set_word_pos(t as u128 * 2);
        self.rng.random::<f64>()
    }
}

const AUX_MAGIC: &[u8; 4] = b"DCAX";

/// Per-frame conditioning vectors, upsampled to sample rate by repetition:
/// sample `t` uses row `min(t / frame_shift, rows − 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxTrack {
    pub rows: usize,
    pub cols: usize,
    pub frame_shift: usize,
    data: Vec<f32>,
}

impl AuxTrack {
    pub fn new(rows: usize, cols: usize, frame_shift: usize, data: Vec<f32>) -> Result<Self, SamplerError> {
        if frame_shift == 0 || data.len() != rows * cols {
            return Err(SamplerError::AuxFormat(format!(
                "{} values for {rows}x{cols} frames with shift {frame_shift}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, frame_shift, data })
    }

    /// An all-zero track long enough for `n_samples` of `aux_dim` features.
    pub fn zeros(aux_dim: usize, frame_shift: usize, n_samples: usize) -> Self {
        let rows = n_samples.div_ceil(frame_shift).max(1);
        Self { rows, cols: aux_dim, frame_shift, data: vec![0.0; rows * aux_dim] }
    }

    /// Number of samples the track covers by repetition.
    pub fn covered_samples(&self) -> usize {
        self.rows * self.frame_shift
    }

    pub fn row_for_sample(&self, t: usize) -> &[f32] {
        let row = (t / self.frame_shift).min(self.rows - 1);
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Binary format: magic, rows/cols/frame_shift as u32 LE, then
    /// row-major f32 LE data.
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), SamplerError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(AUX_MAGIC)?;
        for v in [self.rows as u32, self.cols as u32, self.frame_shift as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, SamplerError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| SamplerError::AuxFormat("truncated header".into()))?;
        if &magic != AUX_MAGIC {
            return Err(SamplerError::AuxFormat("bad magic".into()));
        }
        let mut header = [0u8; 12];
        r.read_exact(&mut header)
            .map_err(|_| SamplerError::AuxFormat("truncated header".into()))?;
        let rows = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let frame_shift = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let mut data = vec![0.0f32; rows * cols];
        let mut buf = [0u8; 4];
        for v in data.iter_mut() {
            r.read_exact(&mut buf)
                .map_err(|_| SamplerError::AuxFormat("truncated data".into()))?;
            *v = f32::from_le_bytes(buf);
        }
        Self::new(rows, cols, frame_shift, data)
    }
}

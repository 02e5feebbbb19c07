//! Minimal WaveNet-style network: stacked gated residual blocks with
//! dilated causal convolutions (kernel 2), auxiliary conditioning, skip
//! connections, and a 256-way softmax head. Inference only — weights come
//! from a file or a seeded random initializer; training is out of scope
//! because the suppression machinery is agnostic to how the PMFs arise.
//!
//! Generation keeps one ring buffer per block holding that block's input at
//! the last `dilation` positions, so each step costs one pass over the
//! stack instead of a full window recomputation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{AuxTrack, DrawStream, SampleSource, SamplerError};
use crate::lpcdc::Pmf256;
use crate::signal::{LevelIndex, LevelTable, Waveform};

/// Level fed as history before the utterance starts: the quantization of
/// amplitude zero.
pub const ZERO_LEVEL: LevelIndex = LevelIndex(128);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WnConfig {
    pub n_blocks: usize,
    pub residual_channels: usize,
    pub skip_channels: usize,
    pub aux_dim: usize,
    /// One dilation per block.
    pub dilations: Vec<usize>,
    /// Fixed at 2; stored for the weight-file header.
    pub kernel_size: usize,
    /// Output levels, fixed at 256.
    pub levels: usize,
}

impl WnConfig {
    /// The reference configuration: 30 blocks of 512 residual channels,
    /// 256 skip/post channels, dilations 2⁰..2⁹ over three cycles.
    pub fn reference(aux_dim: usize) -> Self {
        Self {
            n_blocks: 30,
            residual_channels: 512,
            skip_channels: 256,
            aux_dim,
            dilations: (0..30).map(|k| 1usize << (k % 10)).collect(),
            kernel_size: 2,
            levels: 256,
        }
    }

    /// A small configuration for tests and demos.
    pub fn tiny(n_blocks: usize, channels: usize, aux_dim: usize) -> Self {
        Self {
            n_blocks,
            residual_channels: channels,
            skip_channels: channels,
            aux_dim,
            dilations: (0..n_blocks).map(|k| 1usize << (k % 10)).collect(),
            kernel_size: 2,
            levels: 256,
        }
    }

    /// Samples of history that can influence one prediction:
    /// `1 + Σ dilations` for kernel size 2.
    pub fn receptive_field(&self) -> usize {
        1 + self.dilations.iter().sum::<usize>()
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.kernel_size != 2 {
            return Err(SamplerError::ShapeMismatch(format!(
                "kernel size {} unsupported (must be 2)",
                self.kernel_size
            )));
        }
        if self.levels != 256 {
            return Err(SamplerError::ShapeMismatch(format!(
                "{} output levels unsupported (must be 256)",
                self.levels
            )));
        }
        if self.dilations.len() != self.n_blocks {
            return Err(SamplerError::ShapeMismatch(format!(
                "{} dilations for {} blocks",
                self.dilations.len(),
                self.n_blocks
            )));
        }
        if self.n_blocks == 0 || self.residual_channels == 0 || self.skip_channels == 0 {
            return Err(SamplerError::ShapeMismatch("empty network".into()));
        }
        if self.dilations.iter().any(|&d| d == 0) {
            return Err(SamplerError::ShapeMismatch("zero dilation".into()));
        }
        Ok(())
    }
}

impl Default for WnConfig {
    fn default() -> Self {
        Self::reference(0)
    }
}

/// A dense weight tensor, row-major f32.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self { dims, data: vec![0.0; len] }
    }

    fn random(dims: Vec<usize>, rng: &mut ChaCha12Rng) -> Self {
        let len: usize = dims.iter().product();
        // Uniform ±1/√fan_in, with fan_in the trailing dimension.
        let fan_in = *dims.last().unwrap_or(&1);
        let scale = if fan_in > 0 { 1.0 / (fan_in as f32).sqrt() } else { 0.0 };
        let data = (0..len).map(|_| rng.random_range(-scale..=scale)).collect();
        Self { dims, data }
    }
}

struct BlockWeights {
    filter_w: Tensor,     // [2, res, res]: taps (past, current)
    filter_b: Tensor,     // [res]
    gate_w: Tensor,       // [2, res, res]
    gate_b: Tensor,       // [res]
    aux_filter_w: Tensor, // [res, aux]
    aux_gate_w: Tensor,   // [res, aux]
    res_w: Tensor,        // [res, res]
    res_b: Tensor,        // [res]
    skip_w: Tensor,       // [skip, res]
    skip_b: Tensor,       // [skip]
}

pub struct WnModel {
    pub config: WnConfig,
    embed: Tensor, // [levels, res]
    blocks: Vec<BlockWeights>,
    post1_w: Tensor, // [skip, skip]
    post1_b: Tensor, // [skip]
    post2_w: Tensor, // [levels, skip]
    post2_b: Tensor, // [levels]
}

fn expected_shapes(config: &WnConfig) -> Vec<Vec<usize>> {
    let res = config.residual_channels;
    let skip = config.skip_channels;
    let aux = config.aux_dim;
    let mut shapes = vec![vec![config.levels, res]];
    for _ in 0..config.n_blocks {
        shapes.push(vec![2, res, res]);
        shapes.push(vec![res]);
        shapes.push(vec![2, res, res]);
        shapes.push(vec![res]);
        shapes.push(vec![res, aux]);
        shapes.push(vec![res, aux]);
        shapes.push(vec![res, res]);
        shapes.push(vec![res]);
        shapes.push(vec![skip, res]);
        shapes.push(vec![skip]);
    }
    shapes.push(vec![skip, skip]);
    shapes.push(vec![skip]);
    shapes.push(vec![config.levels, skip]);
    shapes.push(vec![config.levels]);
    shapes
}

impl WnModel {
    /// Assemble a model from tensors in declared order (the weight-file
    /// order): embedding, ten tensors per block (filter w/b, gate w/b, aux
    /// filter/gate, residual w/b, skip w/b), then the two post layers.
    pub fn from_tensors(config: WnConfig, tensors: Vec<Tensor>) -> Result<Self, SamplerError> {
        config.validate()?;
        let shapes = expected_shapes(&config);
        if tensors.len() != shapes.len() {
            return Err(SamplerError::ShapeMismatch(format!(
                "{} tensors supplied, {} expected",
                tensors.len(),
                shapes.len()
            )));
        }
        for (i, (t, s)) in tensors.iter().zip(&shapes).enumerate() {
            let count: usize = t.dims.iter().product();
            if &t.dims != s || t.data.len() != count {
                return Err(SamplerError::ShapeMismatch(format!(
                    "tensor {i}: dims {:?} (expected {:?})",
                    t.dims, s
                )));
            }
        }
        let mut it = tensors.into_iter();
        let embed = it.next().unwrap();
        let mut blocks = Vec::with_capacity(config.n_blocks);
        for _ in 0..config.n_blocks {
            blocks.push(BlockWeights {
                filter_w: it.next().unwrap(),
                filter_b: it.next().unwrap(),
                gate_w: it.next().unwrap(),
                gate_b: it.next().unwrap(),
                aux_filter_w: it.next().unwrap(),
                aux_gate_w: it.next().unwrap(),
                res_w: it.next().unwrap(),
                res_b: it.next().unwrap(),
                skip_w: it.next().unwrap(),
                skip_b: it.next().unwrap(),
            });
        }
        let post1_w = it.next().unwrap();
        let post1_b = it.next().unwrap();
        let post2_w = it.next().unwrap();
        let post2_b = it.next().unwrap();
        Ok(Self { config, embed, blocks, post1_w, post1_b, post2_w, post2_b })
    }

    /// Tensors in declared order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.embed];
        for b in &self.blocks {
            out.extend([
                &b.filter_w,
                &b.filter_b,
                &b.gate_w,
                &b.gate_b,
                &b.aux_filter_w,
                &b.aux_gate_w,
                &b.res_w,
                &b.res_b,
                &b.skip_w,
                &b.skip_b,
            ]);
        }
        out.extend([&self.post1_w, &self.post1_b, &self.post2_w, &self.post2_b]);
        out
    }

    /// Seeded random weights; for tests, demos and benchmarks.
    pub fn random(config: WnConfig, seed: u64) -> Result<Self, SamplerError> {
        config.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let tensors = expected_shapes(&config)
            .into_iter()
            .map(|dims| Tensor::random(dims, &mut rng))
            .collect();
        Self::from_tensors(config, tensors)
    }
}

const WEIGHT_MAGIC: &[u8; 4] = b"DCWN";
const WEIGHT_VERSION: u32 = 1;

/// Weight container: magic, version, config header (block/channel counts,
/// kernel, aux dim, levels, dilations as u32 LE), then every tensor in
/// declared order as a u32 rank, u32 dims, and f32 LE data.
pub fn save_weights<P: AsRef<Path>>(model: &WnModel, path: P) -> Result<(), SamplerError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(WEIGHT_MAGIC)?;
    let c = &model.config;
    let header = [
        WEIGHT_VERSION,
        c.n_blocks as u32,
        c.residual_channels as u32,
        c.skip_channels as u32,
        c.aux_dim as u32,
        c.kernel_size as u32,
        c.levels as u32,
        c.dilations.len() as u32,
    ];
    for v in header {
        w.write_all(&v.to_le_bytes())?;
    }
    for &d in &c.dilations {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for t in model.tensors() {
        w.write_all(&(t.dims.len() as u32).to_le_bytes())?;
        for &d in &t.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in &t.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_weights<P: AsRef<Path>>(path: P) -> Result<WnModel, SamplerError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| SamplerError::WeightFormat("truncated file".into()))?;
    if &magic != WEIGHT_MAGIC {
        return Err(SamplerError::WeightFormat("bad magic".into()));
    }
    let read_u32 = |r: &mut BufReader<File>| -> Result<u32, SamplerError> {
        let mut buf = [0u8; 4];
        r.read_exact(&mut buf)
            .map_err(|_| SamplerError::WeightFormat("truncated file".into()))?;
        Ok(u32::from_le_bytes(buf))
    };
    let version = read_u32(&mut r)?;
    if version != WEIGHT_VERSION {
        return Err(SamplerError::WeightFormat(format!("unsupported version {version}")));
    }
    let n_blocks = read_u32(&mut r)? as usize;
    let residual_channels = read_u32(&mut r)? as usize;
    let skip_channels = read_u32(&mut r)? as usize;
    let aux_dim = read_u32(&mut r)? as usize;
    let kernel_size = read_u32(&mut r)? as usize;
    let levels = read_u32(&mut r)? as usize;
    let n_dilations = read_u32(&mut r)? as usize;
    if n_dilations > 4096 {
        return Err(SamplerError::WeightFormat(format!("implausible dilation count {n_dilations}")));
    }
    let mut dilations = Vec::with_capacity(n_dilations);
    for _ in 0..n_dilations {
        dilations.push(read_u32(&mut r)? as usize);
    }
    let config = WnConfig {
        n_blocks,
        residual_channels,
        skip_channels,
        aux_dim,
        dilations,
        kernel_size,
        levels,
    };
    config.validate()?;

    let mut tensors = Vec::new();
    for _ in 0..expected_shapes(&config).len() {
        let rank = read_u32(&mut r)? as usize;
        if rank > 4 {
            return Err(SamplerError::WeightFormat(format!("implausible tensor rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(read_u32(&mut r)? as usize);
        }
        let len: usize = dims.iter().product();
        let mut data = vec![0.0f32; len];
        let mut buf = [0u8; 4];
        for v in data.iter_mut() {
            r.read_exact(&mut buf)
                .map_err(|_| SamplerError::WeightFormat("truncated tensor data".into()))?;
            *v = f32::from_le_bytes(buf);
        }
        tensors.push(Tensor { dims, data });
    }
    WnModel::from_tensors(config, tensors)
}

/// `out += w · v` for a row-major `[rows, cols]` matrix.
fn matvec_acc(w: &[f32], rows: usize, cols: usize, v: &[f32], out: &mut [f32]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(v.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for (row, o) in out.iter_mut().enumerate() {
        let base = row * cols;
        let mut acc = 0.0f32;
        for (i, &x) in v.iter().enumerate() {
            acc += w[base + i] * x;
        }
        *o += acc;
    }
}

/// Ring buffer of a block's input vectors at the last `dilation` positions.
struct TapBuffer {
    slots: Vec<Vec<f32>>,
    pushes: usize,
}

impl TapBuffer {
    fn new(dilation: usize, channels: usize) -> Self {
        Self { slots: vec![vec![0.0; channels]; dilation], pushes: 0 }
    }

    /// Returns the vector pushed `dilation` steps ago (zeros before that)
    /// and stores the new one in its place.
    fn exchange(&mut self, current: &[f32], scratch: &mut Vec<f32>) {
        let idx = self.pushes % self.slots.len();
        std::mem::swap(&mut self.slots[idx], scratch);
        if self.pushes < self.slots.len() {
            scratch.iter_mut().for_each(|v| *v = 0.0);
        }
        self.slots[idx].clear();
        self.slots[idx].extend_from_slice(current);
        self.pushes += 1;
    }
}

/// Incremental per-position state for one generation pass.
struct GenState {
    taps: Vec<TapBuffer>,
}

impl GenState {
    fn new(model: &WnModel) -> Self {
        let res = model.config.residual_channels;
        let taps = model
            .config
            .dilations
            .iter()
            .map(|&d| TapBuffer::new(d, res))
            .collect();
        Self { taps }
    }

    /// Advance one position: input level `level`, conditioning `aux`.
    /// Computes the PMF head only when `want_pmf` is set (catch-up pushes
    /// only need the buffers warmed).
    fn push(
        &mut self,
        model: &WnModel,
        level: LevelIndex,
        aux: &[f32],
        want_pmf: bool,
    ) -> Option<Pmf256> {
        let res = model.config.residual_channels;
        let skip = model.config.skip_channels;

        let mut x = model.embed.data[level.index() * res..(level.index() + 1) * res].to_vec();
        let mut skip_sum = vec![0.0f32; skip];
        let mut past = vec![0.0f32; res];

        for (block, tap) in model.blocks.iter().zip(&mut self.taps) {
            tap.exchange(&x, &mut past);

            let mut f = block.filter_b.data.clone();
            matvec_acc(&block.filter_w.data[..res * res], res, res, &past, &mut f);
            matvec_acc(&block.filter_w.data[res * res..], res, res, &x, &mut f);
            let mut g = block.gate_b.data.clone();
            matvec_acc(&block.gate_w.data[..res * res], res, res, &past, &mut g);
            matvec_acc(&block.gate_w.data[res * res..], res, res, &x, &mut g);
            if !aux.is_empty() {
                matvec_acc(&block.aux_filter_w.data, res, aux.len(), aux, &mut f);
                matvec_acc(&block.aux_gate_w.data, res, aux.len(), aux, &mut g);
            }

            let z: Vec<f32> = f
                .iter()
                .zip(&g)
                .map(|(&fv, &gv)| fv.tanh() * (1.0 / (1.0 + (-gv).exp())))
                .collect();

            for (s, b) in skip_sum.iter_mut().zip(&block.skip_b.data) {
                *s += b;
            }
            matvec_acc(&block.skip_w.data, skip, res, &z, &mut skip_sum);

            let mut next = block.res_b.data.clone();
            matvec_acc(&block.res_w.data, res, res, &z, &mut next);
            for (n, xv) in next.iter_mut().zip(&x) {
                *n += xv;
            }
            x = next;
        }

        if !want_pmf {
            return None;
        }

        for v in skip_sum.iter_mut() {
            *v = v.max(0.0);
        }
        let mut h = model.post1_b.data.clone();
        matvec_acc(&model.post1_w.data, skip, skip, &skip_sum, &mut h);
        for v in h.iter_mut() {
            *v = v.max(0.0);
        }
        let mut logits = model.post2_b.data.clone();
        matvec_acc(&model.post2_w.data, model.config.levels, skip, &h, &mut logits);

        Some(softmax256(&logits))
    }
}

/// Softmax over 256 logits, accumulated in f64 so the result satisfies the
/// PMF normalization tolerance.
fn softmax256(logits: &[f32]) -> Pmf256 {
    debug_assert_eq!(logits.len(), 256);
    let max = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
    let mut raw = [0.0f64; 256];
    for (r, &l) in raw.iter_mut().zip(logits) {
        *r = (l as f64 - max).exp();
    }
    Pmf256::normalized(raw).expect("softmax produces a valid PMF")
}

/// One-shot forward pass: PMF for the sample following an exactly
/// receptive-field-sized history window.
///
/// The single `aux` vector conditions every position of the window; use
/// [`WnSampler`] when conditioning varies per sample.
pub fn wn_forward(model: &WnModel, history: &[LevelIndex], aux: &[f32]) -> Result<Pmf256, SamplerError> {
    let r = model.config.receptive_field();
    if history.len() != r {
        return Err(SamplerError::ShapeMismatch(format!(
            "history of {} samples, receptive field is {r}",
            history.len()
        )));
    }
    if aux.len() != model.config.aux_dim {
        return Err(SamplerError::ShapeMismatch(format!(
            "aux of {} features, model wants {}",
            aux.len(),
            model.config.aux_dim
        )));
    }
    let mut state = GenState::new(model);
    let mut pmf = None;
    for (i, &level) in history.iter().enumerate() {
        let last = i + 1 == history.len();
        pmf = state.push(model, level, aux, last);
    }
    Ok(pmf.expect("receptive field is at least 1"))
}

/// A [`SampleSource`] wrapping a model and its conditioning track.
///
/// Predictions advance incrementally; a rewound `t` (segment regeneration)
/// rebuilds the state by replaying the accepted prefix.
pub struct WnSampler<'a> {
    model: &'a WnModel,
    aux: &'a AuxTrack,
    state: GenState,
    /// Next position the state will consume (0 after reset + warmup).
    next_pos: usize,
}

impl<'a> WnSampler<'a> {
    pub fn new(model: &'a WnModel, aux: &'a AuxTrack) -> Result<Self, SamplerError> {
        if aux.cols != model.config.aux_dim {
            return Err(SamplerError::ShapeMismatch(format!(
                "aux track has {} features, model wants {}",
                aux.cols, model.config.aux_dim
            )));
        }
        let mut s = Self { model, aux, state: GenState::new(model), next_pos: 0 };
        s.warm_up();
        Ok(s)
    }

    fn warm_up(&mut self) {
        // Pre-utterance history is the zero-amplitude level throughout.
        let aux0 = self.aux.row_for_sample(0);
        for _ in 0..self.model.config.receptive_field() - 1 {
            self.state.push(self.model, ZERO_LEVEL, aux0, false);
        }
    }

    fn reset(&mut self) {
        self.state = GenState::new(self.model);
        self.next_pos = 0;
        self.warm_up();
    }
}

impl SampleSource for WnSampler<'_> {
    fn receptive_field(&self) -> usize {
        self.model.config.receptive_field()
    }

    fn predict(&mut self, t: usize, history: &[LevelIndex]) -> Pmf256 {
        debug_assert_eq!(history.len(), t, "history must be the prefix ending at t − 1");
        if self.next_pos > t {
            self.reset();
        }
        let mut pmf = None;
        while self.next_pos <= t {
            let pos = self.next_pos;
            let input = if pos == 0 { ZERO_LEVEL } else { history[pos - 1] };
            let aux = self.aux.row_for_sample(pos);
            pmf = self.state.push(self.model, input, aux, pos == t);
            self.next_pos += 1;
        }
        pmf.expect("loop runs at least once")
    }
}

/// Plain autoregressive generation: draw each sample from the model's PMF
/// with the addressable seeded stream, decode through the level table.
/// Optionally captures every PMF for inspection.
pub fn wn_generate(
    model: &WnModel,
    aux: &AuxTrack,
    n_samples: usize,
    sample_rate: u32,
    base_seed: u64,
    capture_pmfs: bool,
) -> Result<(Waveform, Option<Vec<Pmf256>>), SamplerError> {
    if aux.covered_samples() < n_samples {
        return Err(SamplerError::AuxTooShort { covered: aux.covered_samples(), needed: n_samples });
    }
    let mut sampler = WnSampler::new(model, aux)?;
    let mut draws = DrawStream::new(base_seed, 0);
    let table = LevelTable::global();

    let mut history: Vec<LevelIndex> = Vec::with_capacity(n_samples);
    let mut samples = Vec::with_capacity(n_samples);
    let mut pmfs = capture_pmfs.then(Vec::new);
    for t in 0..n_samples {
        let pmf = sampler.predict(t, &history);
        let level = pmf.sample(draws.uniform_at(t));
        samples.push(table.amplitude(level));
        history.push(level);
        if let Some(p) = pmfs.as_mut() {
            p.push(pmf);
        }
    }
    let waveform = Waveform::new(samples, sample_rate)
        .expect("level amplitudes are within [-1, 1]");
    Ok((waveform, pmfs))
}

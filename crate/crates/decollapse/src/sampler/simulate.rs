//! Synthetic collapse scenarios: a scriptable [`SampleSource`] that behaves
//! like a healthy autoregressive vocoder outside injection windows and
//! emits collapse-shaped PMFs inside them.
//!
//! Outside injections the PMF is a narrow Gaussian over levels whose mean
//! follows the scenario's base tone plus a damped carry of the fed-back
//! deviation from it — so constrained draws genuinely steer later
//! predictions, as in a real model. Type I windows emit bimodal mass near
//! the extreme levels over a uniform floor (sustained white-noise-like
//! output); Type II windows emit a spike at an extreme level (short
//! impulse noise).
//!
//! Collapse is ignited at the window start and then *self-sustaining
//! through the fed-back history*: the collapse-shaped PMF is emitted only
//! while some recent fed-back sample is extreme. An unconstrained run
//! keeps feeding itself extremes and stays collapsed for the whole window;
//! a constrained draw lands near the prediction mean, the window cools,
//! and the following samples recover — the same mechanism by which fixing
//! the first samples of a collapsed segment heals a real autoregressive
//! model. The matching reference waveform is the base tone plus a small
//! noise floor, which keeps the reference LPC residual realistic instead
//! of vanishingly tight.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::{SampleSource, SamplerError};
use crate::lpcdc::Pmf256;
use crate::signal::{LevelIndex, LevelTable, Waveform};

/// Noise floor added to the reference rendition of the base tone.
pub const REFERENCE_NOISE_STD: f64 = 0.012;

/// Per-draw amplitude std of the healthy-mode PMF.
const CLEAN_STD: f64 = 0.004;
/// How much of the fed-back deviation from the base trajectory carries
/// into the next prediction. Below 1 so draw and quantization noise decays
/// instead of resonating toward the rails.
const DEVIATION_CARRY: f64 = 0.7;
/// Width of the extreme-level bumps in Type I windows.
const TYPE1_STD: f64 = 0.03;
/// Uniform floor mass in Type I windows (softmax outputs never hit zero).
const TYPE1_FLOOR: f64 = 0.12;
const TYPE2_STD: f64 = 0.03;
const TYPE2_FLOOR: f64 = 0.03;
/// A fed-back sample at or above this magnitude keeps a collapse window
/// hot; constrained draws land below it and cool the window.
const HOT_AMP: f64 = 0.8;
/// How many trailing fed-back samples can sustain a collapse.
const HOT_MEMORY: usize = 8;
/// Healthy-mode tail mass. Kept tiny: a draw from the tail is a full-range
/// outlier that slot-max detection would amplify into a false alarm, and a
/// healthy softmax gives such levels vanishing but nonzero mass.
const CLEAN_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollapseKind {
    /// Sustained white-noise-like segment.
    TypeI,
    /// Short impulse.
    TypeII,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    pub start: usize,
    pub length: usize,
    pub kind: CollapseKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseTone {
    pub freq_hz: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

/// A scripted utterance: base tone, collapse injections, and the seed that
/// fixes the reference noise and in-window PMF variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseScenario {
    pub sample_rate: u32,
    pub n_samples: usize,
    pub base: BaseTone,
    #[serde(default)]
    pub injections: Vec<Injection>,
    #[serde(default)]
    pub seed: u64,
}

impl CollapseScenario {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.sample_rate == 0 || self.n_samples == 0 {
            return Err(SamplerError::BadScenario("empty utterance".into()));
        }
        if !(0.0..=1.0).contains(&self.base.amplitude) {
            return Err(SamplerError::BadScenario(format!(
                "base amplitude {} outside [0, 1]",
                self.base.amplitude
            )));
        }
        let mut sorted = self.injections.clone();
        sorted.sort_by_key(|i| i.start);
        let mut prev_end = 0usize;
        for inj in &sorted {
            if inj.length == 0 {
                return Err(SamplerError::BadScenario("zero-length injection".into()));
            }
            let end = inj.start + inj.length;
            if end > self.n_samples {
                return Err(SamplerError::BadScenario(format!(
                    "injection [{}, {end}) outside utterance of {}",
                    inj.start, self.n_samples
                )));
            }
            if inj.start < prev_end {
                return Err(SamplerError::BadScenario("overlapping injections".into()));
            }
            prev_end = end;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SamplerError> {
        let scenario: Self = serde_json::from_str(text)
            .map_err(|e| SamplerError::BadScenario(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    fn base_value(&self, t: usize) -> f64 {
        let omega = std::f64::consts::TAU * self.base.freq_hz / f64::from(self.sample_rate);
        self.base.amplitude * (omega * t as f64 + self.base.phase).sin()
    }

    fn injection_at(&self, t: usize) -> Option<&Injection> {
        self.injections
            .iter()
            .find(|i| (i.start..i.start + i.length).contains(&t))
    }
}

/// The collapse-free rendition of the scenario: base tone plus a small
/// seeded noise floor, clamped to the amplitude range.
pub fn reference_waveform(scenario: &CollapseScenario) -> Waveform {
    let mut rng = ChaCha12Rng::seed_from_u64(scenario.seed);
    rng.set_stream(u64::MAX); // separate from the sampler's tilt stream
    let samples = (0..scenario.n_samples)
        .map(|t| {
            let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            let noise = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            (scenario.base_value(t) + REFERENCE_NOISE_STD * noise).clamp(-1.0, 1.0)
        })
        .collect();
    Waveform::new(samples, scenario.sample_rate).expect("clamped samples are in range")
}

/// Gaussian bump over the level table plus a uniform floor, normalized.
fn gaussian_mixture(components: &[(f64, f64, f64)], floor: f64, table: &LevelTable) -> Pmf256 {
    let mut raw = [floor / 256.0; 256];
    for &(weight, mu, sigma) in components {
        // Mass within ±40σ only; the tails underflow to zero anyway.
        for (q, r) in raw.iter_mut().enumerate() {
            let z = (table.amplitudes()[q] - mu) / sigma;
            if z.abs() < 40.0 {
                *r += weight * (-0.5 * z * z).exp();
            }
        }
    }
    Pmf256::normalized(raw).expect("mixture has positive mass")
}

/// Unconstrained generation from a scenario: every sample drawn straight
/// from the simulator's PMF. This is the "collapsed" rendition used to
/// exercise detectors.
pub fn simulate_generate(scenario: &CollapseScenario, base_seed: u64) -> Result<Waveform, SamplerError> {
    let mut sampler = SimulatedSampler::new(scenario.clone(), scenario.seed)?;
    let table = LevelTable::global();
    let mut draws = crate::sampler::DrawStream::new(base_seed, 0);
    let mut history = Vec::with_capacity(scenario.n_samples);
    let mut samples = Vec::with_capacity(scenario.n_samples);
    for t in 0..scenario.n_samples {
        let pmf = sampler.predict(t, &history);
        let level = pmf.sample(draws.uniform_at(t));
        samples.push(table.amplitude(level));
        history.push(level);
    }
    Ok(Waveform::new(samples, scenario.sample_rate).expect("levels decode in range"))
}

/// Recipe for a labeled corpus of clean and collapsed utterances, fully
/// determined by the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub seed: u64,
    pub n_clean: usize,
    pub n_type1: usize,
    pub n_type2: usize,
    pub sample_rate: u32,
    pub n_samples: usize,
    pub freq_range: (f64, f64),
    pub amp_range: (f64, f64),
    pub type1_length_range: (usize, usize),
    pub type2_length_range: (usize, usize),
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            seed: 2026,
            n_clean: 100,
            n_type1: 60,
            n_type2: 40,
            sample_rate: 22_050,
            n_samples: 22_050,
            freq_range: (120.0, 420.0),
            amp_range: (0.3, 0.7),
            type1_length_range: (3000, 6000),
            type2_length_range: (5, 15),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScenario {
    pub id: String,
    /// `clean`, `type1` or `type2`.
    pub label: String,
    pub scenario: CollapseScenario,
}

impl LabeledScenario {
    pub fn is_collapsed(&self) -> bool {
        self.label != "clean"
    }
}

/// Expand a corpus spec into concrete labeled scenarios, deterministically.
pub fn build_corpus(spec: &CorpusSpec) -> Result<Vec<LabeledScenario>, SamplerError> {
    if spec.n_samples == 0 || spec.sample_rate == 0 {
        return Err(SamplerError::BadScenario("empty corpus utterances".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut corpus = Vec::new();
    let classes: [(&str, usize); 3] =
        [("clean", spec.n_clean), ("type1", spec.n_type1), ("type2", spec.n_type2)];
    for (label, count) in classes {
        for i in 0..count {
            let base = BaseTone {
                freq_hz: rng.random_range(spec.freq_range.0..=spec.freq_range.1),
                amplitude: rng.random_range(spec.amp_range.0..=spec.amp_range.1),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            };
            let injections = match label {
                "type1" => {
                    let len = rng.random_range(spec.type1_length_range.0..=spec.type1_length_range.1);
                    let margin = spec.n_samples.saturating_sub(len + 2000);
                    let start = 1000 + rng.random_range(0..=margin.max(1)).min(margin);
                    vec![Injection { start, length: len, kind: CollapseKind::TypeI }]
                }
                "type2" => {
                    let len = rng.random_range(spec.type2_length_range.0..=spec.type2_length_range.1);
                    let margin = spec.n_samples.saturating_sub(len + 2000);
                    let start = 1000 + rng.random_range(0..=margin.max(1)).min(margin);
                    vec![Injection { start, length: len, kind: CollapseKind::TypeII }]
                }
                _ => vec![],
            };
            let scenario = CollapseScenario {
                sample_rate: spec.sample_rate,
                n_samples: spec.n_samples,
                base,
                injections,
                seed: rng.random::<u64>(),
            };
            scenario.validate()?;
            corpus.push(LabeledScenario { id: format!("{label}_{i:03}"), label: label.to_string(), scenario });
        }
    }
    Ok(corpus)
}

/// Scriptable sample source; see the module docs for the emitted shapes.
pub struct SimulatedSampler {
    scenario: CollapseScenario,
    /// Per-sample Type I balance tilt, precomputed for injection windows.
    tilts: Vec<(usize, Vec<f64>)>,
}

impl SimulatedSampler {
    pub fn new(scenario: CollapseScenario, rng_seed: u64) -> Result<Self, SamplerError> {
        scenario.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
        let tilts = scenario
            .injections
            .iter()
            .filter(|i| i.kind == CollapseKind::TypeI)
            .map(|i| {
                let t: Vec<f64> = (0..i.length).map(|_| rng.random_range(-0.09..0.09)).collect();
                (i.start, t)
            })
            .collect();
        Ok(Self { scenario, tilts })
    }

    pub fn scenario(&self) -> &CollapseScenario {
        &self.scenario
    }

    fn tilt_at(&self, t: usize) -> f64 {
        for (start, tilts) in &self.tilts {
            if t >= *start && t < start + tilts.len() {
                return tilts[t - start];
            }
        }
        0.0
    }
}

fn recently_hot(history: &[LevelIndex], table: &LevelTable) -> bool {
    history
        .iter()
        .rev()
        .take(HOT_MEMORY)
        .any(|&l| table.amplitude(l).abs() >= HOT_AMP)
}

impl SampleSource for SimulatedSampler {
    fn receptive_field(&self) -> usize {
        HOT_MEMORY
    }

    fn predict(&mut self, t: usize, history: &[LevelIndex]) -> Pmf256 {
        debug_assert_eq!(history.len(), t);
        let table = LevelTable::global();
        // Ignition burns unconditionally for a few samples so a single cold
        // draw cannot fizzle the injection; after that the window stays
        // collapsed only while the fed-back history keeps it hot.
        let collapse = self
            .scenario
            .injection_at(t)
            .filter(|i| t - i.start < HOT_MEMORY.min(i.length) || recently_hot(history, table))
            .map(|i| i.kind);
        match collapse {
            Some(CollapseKind::TypeI) => {
                let w = 0.44 + self.tilt_at(t);
                gaussian_mixture(
                    &[(w, -0.95, TYPE1_STD), (0.88 - w, 0.95, TYPE1_STD)],
                    TYPE1_FLOOR,
                    table,
                )
            }
            Some(CollapseKind::TypeII) => {
                gaussian_mixture(&[(1.0 - TYPE2_FLOOR, 0.97, TYPE2_STD)], TYPE2_FLOOR, table)
            }
            None => {
                // Follow the tone, carrying a damped share of the fed-back
                // deviation so altered draws steer later predictions.
                let deviation = if t >= 1 {
                    table.amplitude(history[t - 1]) - self.scenario.base_value(t - 1)
                } else {
                    0.0
                };
                let mu = (self.scenario.base_value(t) + DEVIATION_CARRY * deviation)
                    .clamp(-0.99, 0.99);
                gaussian_mixture(&[(1.0 - CLEAN_FLOOR, mu, CLEAN_STD)], CLEAN_FLOOR, table)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::DrawStream;

    fn run(sampler: &mut SimulatedSampler, n: usize, seed: u64) -> Waveform {
        let table = LevelTable::global();
        let mut draws = DrawStream::new(seed, 0);
        let mut history = Vec::with_capacity(n);
        let mut samples = Vec::with_capacity(n);
        for t in 0..n {
            let pmf = sampler.predict(t, &history);
            let level = pmf.sample(draws.uniform_at(t));
            samples.push(table.amplitude(level));
            history.push(level);
        }
        Waveform::new(samples, sampler.scenario().sample_rate).unwrap()
    }

    fn tone_scenario(injections: Vec<Injection>) -> CollapseScenario {
        CollapseScenario {
            sample_rate: 22_050,
            n_samples: 22_050,
            base: BaseTone { freq_hz: 220.0, amplitude: 0.5, phase: 0.0 },
            injections,
            seed: 5,
        }
    }

    #[test]
    fn validation_catches_bad_scenarios() {
        let mut s = tone_scenario(vec![]);
        s.injections = vec![Injection { start: 30_000, length: 10, kind: CollapseKind::TypeII }];
        assert!(s.validate().is_err());
        s.injections = vec![
            Injection { start: 100, length: 500, kind: CollapseKind::TypeI },
            Injection { start: 300, length: 10, kind: CollapseKind::TypeII },
        ];
        assert!(s.validate().is_err());
        s.injections = vec![Injection { start: 100, length: 0, kind: CollapseKind::TypeI }];
        assert!(s.validate().is_err());
    }

    #[test]
    fn scenario_json_roundtrip() {
        let s = tone_scenario(vec![Injection { start: 8000, length: 4000, kind: CollapseKind::TypeI }]);
        let parsed = CollapseScenario::from_json(&s.to_json()).unwrap();
        assert_eq!(parsed, s);
    }

    #[test]
    fn clean_run_tracks_base_envelope() {
        let mut sampler = SimulatedSampler::new(tone_scenario(vec![]), 1).unwrap();
        let w = run(&mut sampler, 22_050, 77);
        let env = crate::envelope::extract_envelope(&w, &crate::envelope::EnvelopeConfig::default());
        for (t, &v) in env.values.iter().enumerate().skip(2000) {
            assert!((v - 0.5).abs() < 0.12, "envelope {v} at {t}");
        }
    }

    #[test]
    fn type1_window_is_loud_clean_windows_are_not() {
        let scenario = tone_scenario(vec![Injection {
            start: 8000,
            length: 4000,
            kind: CollapseKind::TypeI,
        }]);
        let mut sampler = SimulatedSampler::new(scenario, 2).unwrap();
        let w = run(&mut sampler, 22_050, 78);
        let mean_abs = |range: std::ops::Range<usize>| {
            w.samples[range.clone()].iter().map(|s| s.abs()).sum::<f64>() / range.len() as f64
        };
        assert!(mean_abs(8000..12_000) > 0.6, "collapsed window too quiet");
        // A clean window matches the |sinusoid| average, 2A/π ≈ 0.318.
        let clean = mean_abs(2000..6000);
        assert!((clean - 0.318).abs() < 0.1, "clean window mean |amp| {clean}");
    }

    #[test]
    fn type2_injection_is_an_isolated_spike() {
        let scenario = tone_scenario(vec![Injection {
            start: 15_000,
            length: 10,
            kind: CollapseKind::TypeII,
        }]);
        let mut sampler = SimulatedSampler::new(scenario, 3).unwrap();
        let w = run(&mut sampler, 22_050, 79);
        let spike = w.samples[15_000..15_010]
            .iter()
            .map(|s| s.abs())
            .fold(0.0f64, f64::max);
        assert!(spike > 0.9, "spike peak {spike}");
        let nearby = w.samples[15_100..15_600]
            .iter()
            .map(|s| s.abs())
            .fold(0.0f64, f64::max);
        assert!(nearby < 0.75, "post-spike magnitude {nearby}");
    }

    #[test]
    fn emitted_pmfs_are_valid_everywhere() {
        let scenario = tone_scenario(vec![
            Injection { start: 5000, length: 2000, kind: CollapseKind::TypeI },
            Injection { start: 12_000, length: 10, kind: CollapseKind::TypeII },
        ]);
        let mut sampler = SimulatedSampler::new(scenario, 4).unwrap();
        let mut history = Vec::new();
        let table = LevelTable::global();
        let mut draws = DrawStream::new(80, 0);
        for t in 0..14_000 {
            let pmf = sampler.predict(t, &history);
            let sum: f64 = pmf.masses().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(pmf.masses().iter().all(|&v| v >= 0.0));
            history.push(pmf.sample(draws.uniform_at(t)));
        }
        let _ = table;
    }

    #[test]
    fn reference_matches_base_tone() {
        let scenario = tone_scenario(vec![]);
        let r = reference_waveform(&scenario);
        assert_eq!(r.len(), 22_050);
        for (t, &s) in r.samples.iter().enumerate() {
            assert!((s - scenario.base_value(t)).abs() < 6.0 * REFERENCE_NOISE_STD);
        }
        // Deterministic per scenario.
        assert_eq!(reference_waveform(&scenario).samples, r.samples);
    }
}




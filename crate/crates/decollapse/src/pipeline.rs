//! The full generation loop: precompute the reference analysis, generate
//! segment by segment, detect collapse per segment, and regenerate flagged
//! segments under an escalating regularization schedule, keeping the latest
//! result when the attempts run out.
//!
//! Regeneration restarts at the segment boundary with the previously
//! accepted samples as history, and the constraint applies to every sample
//! of the flagged segment. Draws come from an addressable seeded stream, so
//! attempt 0 of any segmentation reproduces plain generation and each
//! regeneration attempt explores fresh draws deterministically.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cssd::{segment_score, DetectorConfig, ScoreKind, DEFAULT_THRESHOLD};
use crate::envelope::{extract_envelope, Envelope, EnvelopeConfig, Rectifier};
use crate::lpc::{analyze_reference, predict_mean, FrameGrid, LpcError, LpcTrack};
use crate::lpcdc::{apply_constraint, lpc_mask, PmfError};
use crate::sampler::{DrawStream, SampleSource, SamplerError};
use crate::signal::{LevelTable, SignalError, Waveform};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid policy: {0}")]
    BadPolicy(String),
    #[error("requested {requested} samples but the reference has {available}")]
    ReferenceTooShort { requested: usize, available: usize },
    #[error(transparent)]
    Lpc(#[from] LpcError),
    #[error(transparent)]
    Detect(#[from] crate::cssd::DetectError),
    #[error(transparent)]
    Pmf(#[from] PmfError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad config or sidecar file: {0}")]
    Format(String),
}

/// Segment length, escalation schedule and attempt budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPolicy {
    pub segment_length: usize,
    /// Regularization for the first, second, ... regeneration.
    pub rho_schedule: Vec<f64>,
    pub max_regenerations: usize,
    /// Keep the last attempt even if still flagged.
    pub keep_latest: bool,
}

impl Default for GenerationPolicy {
    fn default() -> Self {
        Self {
            segment_length: 4000,
            rho_schedule: vec![0.01, 0.1, 1.0],
            max_regenerations: 3,
            keep_latest: true,
        }
    }
}

impl GenerationPolicy {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.segment_length == 0 {
            return Err(PipelineError::BadPolicy("zero segment length".into()));
        }
        if self.rho_schedule.len() != self.max_regenerations {
            return Err(PipelineError::BadPolicy(format!(
                "{} schedule entries for {} regenerations",
                self.rho_schedule.len(),
                self.max_regenerations
            )));
        }
        let increasing = self.rho_schedule.windows(2).all(|w| w[1] > w[0]);
        if !increasing || self.rho_schedule.iter().any(|&r| r <= 0.0 || !r.is_finite()) {
            return Err(PipelineError::BadPolicy(
                "rho schedule must be strictly increasing and positive".into(),
            ));
        }
        Ok(())
    }
}

/// Every tunable of the system in one serializable bundle; the CLI reads
/// this from a JSON file. Missing fields take the defaults listed in the
/// README (segment 4000, slot 200, cutoff 300 Hz, LPC order 30, frames
/// 20 ms / 5 ms, schedule 0.01/0.1/1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub segment_length: usize,
    pub slot_length: usize,
    pub lowpass_cutoff_hz: f64,
    pub hilbert: bool,
    pub hilbert_context: usize,
    pub threshold: f64,
    pub score_kind: ScoreKind,
    pub lpc_order: usize,
    pub frame_length_ms: f64,
    pub frame_shift_ms: f64,
    pub rho_schedule: Vec<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            segment_length: 4000,
            slot_length: 200,
            lowpass_cutoff_hz: 300.0,
            hilbert: false,
            hilbert_context: 400,
            threshold: DEFAULT_THRESHOLD,
            score_kind: ScoreKind::MaxDiff,
            lpc_order: 30,
            frame_length_ms: 20.0,
            frame_shift_ms: 5.0,
            rho_schedule: vec![0.01, 0.1, 1.0],
        }
    }
}

impl PipelineConfig {
    pub fn envelope_config(&self) -> EnvelopeConfig {
        EnvelopeConfig {
            rectifier: if self.hilbert { Rectifier::Hilbert } else { Rectifier::Abs },
            slot_length: self.slot_length,
            lowpass_cutoff: self.lowpass_cutoff_hz,
            hilbert_context: self.hilbert_context,
        }
    }

    pub fn detector_config(&self) -> DetectorConfig {
        DetectorConfig {
            segment_length: self.segment_length,
            threshold: self.threshold,
            envelope_config: self.envelope_config(),
            score_kind: self.score_kind,
        }
    }

    pub fn policy(&self) -> GenerationPolicy {
        GenerationPolicy {
            segment_length: self.segment_length,
            rho_schedule: self.rho_schedule.clone(),
            max_regenerations: self.rho_schedule.len(),
            keep_latest: true,
        }
    }

    pub fn grid(&self, sample_rate: u32, n_samples: usize) -> Result<FrameGrid, PipelineError> {
        Ok(FrameGrid::from_ms(self.frame_length_ms, self.frame_shift_ms, sample_rate, n_samples)?)
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Format(e.to_string()))
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, PipelineError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Precomputed per-utterance artifacts: LPC track and reference envelope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreparedReference {
    pub sample_rate: u32,
    pub lpc_track: LpcTrack,
    pub envelope: Envelope,
}

/// Analyze the reference once per utterance: LPC frames over the grid and
/// the comparison envelope.
pub fn prepare(
    reference: &Waveform,
    grid: &FrameGrid,
    order: usize,
    env_config: &EnvelopeConfig,
) -> Result<PreparedReference, PipelineError> {
    let lpc_track = analyze_reference(reference, grid, order)?;
    let envelope = extract_envelope(reference, env_config);
    Ok(PreparedReference { sample_rate: reference.sample_rate, lpc_track, envelope })
}

/// Sidecar file for the `analyze` CLI stage.
pub fn save_sidecar<P: AsRef<Path>>(prepared: &PreparedReference, path: P) -> Result<(), PipelineError> {
    let text = serde_json::to_string(prepared).map_err(|e| PipelineError::Format(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_sidecar<P: AsRef<Path>>(path: P) -> Result<PreparedReference, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Format(e.to_string()))
}

/// One generation attempt of one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptReport {
    /// Regularization used; `None` on the unconstrained first attempt.
    pub rho: Option<f64>,
    pub score: f64,
    pub flagged: bool,
    /// Constraint products with empty support that fell back to the mask.
    pub fallback_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub segment_index: usize,
    pub start: usize,
    pub end: usize,
    pub attempts: Vec<AttemptReport>,
    pub final_flagged: bool,
}

impl SegmentReport {
    /// ρ of the attempt that was kept.
    pub fn rho_used(&self) -> Option<f64> {
        self.attempts.last().and_then(|a| a.rho)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportTotals {
    pub n_segments: usize,
    pub initially_flagged: usize,
    pub final_flagged: usize,
    pub regenerations: usize,
    pub fallback_events: usize,
    pub sampler_invocations: usize,
}

/// Audit trail of one pipeline run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtteranceReport {
    pub utterance_id: String,
    pub segments: Vec<SegmentReport>,
    pub totals: ReportTotals,
}

struct SegmentOutcome {
    levels: Vec<crate::signal::LevelIndex>,
    amplitudes: Vec<f64>,
    fallback_events: usize,
    invocations: usize,
}

/// Generate samples `start..end` on top of the accepted history. With a
/// regularization weight, every sample's PMF is multiplied by the
/// ρ-powered Gaussian mask centered on the LPC prediction from the decoded
/// fed-back history.
#[allow(clippy::too_many_arguments)]
fn generate_segment(
    sampler: &mut dyn SampleSource,
    accepted_levels: &[crate::signal::LevelIndex],
    accepted_amplitudes: &[f64],
    start: usize,
    end: usize,
    lpc_track: &LpcTrack,
    rho: Option<f64>,
    base_seed: u64,
    attempt: u32,
) -> Result<SegmentOutcome, PipelineError> {
    debug_assert_eq!(accepted_levels.len(), start);
    let table = LevelTable::global();
    let order = lpc_track.order;
    let mut draws = DrawStream::new(base_seed, attempt);

    let mut levels = accepted_levels.to_vec();
    let mut amplitudes = accepted_amplitudes.to_vec();
    let mut fallback_events = 0usize;
    let mut invocations = 0usize;
    let mut lpc_history = vec![0.0f64; order];

    for t in start..end {
        let pmf = sampler.predict(t, &levels);
        invocations += 1;
        let pmf = match rho {
            None => pmf,
            Some(rho) => {
                let frame = lpc_track.frame_at(t);
                for (i, slot) in lpc_history.iter_mut().enumerate() {
                    *slot = if t > i { amplitudes[t - 1 - i] } else { 0.0 };
                }
                let mu = predict_mean(&lpc_history, frame);
                let mask = lpc_mask(mu, frame.residual_variance.sqrt(), table)?;
                let constrained = apply_constraint(&pmf, &mask, rho);
                if constrained.fallback {
                    fallback_events += 1;
                }
                constrained.pmf
            }
        };
        let level = pmf.sample(draws.uniform_at(t));
        levels.push(level);
        amplitudes.push(table.amplitude(level));
    }

    levels.drain(..start);
    amplitudes.drain(..start);
    Ok(SegmentOutcome { levels, amplitudes, fallback_events, invocations })
}

/// Run the full loop: per segment, attempt 0 without constraint, then while
/// the detector flags the segment and regenerations remain, regenerate the
/// same segment from its start under the next ρ. The last attempt is kept
/// regardless. Accepted samples are never touched again.
pub fn generate_utterance(
    sampler: &mut dyn SampleSource,
    reference: &Waveform,
    n_samples: usize,
    config: &PipelineConfig,
    base_seed: u64,
    utterance_id: &str,
) -> Result<(Waveform, UtteranceReport), PipelineError> {
    let policy = config.policy();
    policy.validate()?;
    if n_samples > reference.len() {
        return Err(PipelineError::ReferenceTooShort {
            requested: n_samples,
            available: reference.len(),
        });
    }
    let env_config = config.envelope_config();
    let grid = config.grid(reference.sample_rate, reference.len())?;
    let prepared = prepare(reference, &grid, config.lpc_order, &env_config)?;

    let mut accepted_levels: Vec<crate::signal::LevelIndex> = Vec::with_capacity(n_samples);
    let mut accepted_amplitudes: Vec<f64> = Vec::with_capacity(n_samples);
    let mut segments = Vec::new();
    let mut totals = ReportTotals::default();

    let mut start = 0usize;
    let mut segment_index = 0usize;
    while start < n_samples {
        let end = (start + policy.segment_length).min(n_samples);
        let mut attempts: Vec<AttemptReport> = Vec::new();
        let mut kept: Option<SegmentOutcome> = None;

        for attempt in 0..=policy.max_regenerations {
            let rho = if attempt == 0 { None } else { Some(policy.rho_schedule[attempt - 1]) };
            let outcome = generate_segment(
                sampler,
                &accepted_levels,
                &accepted_amplitudes,
                start,
                end,
                &prepared.lpc_track,
                rho,
                base_seed,
                attempt as u32,
            )?;
            totals.sampler_invocations += outcome.invocations;
            totals.fallback_events += outcome.fallback_events;

            let score = score_candidate(
                &accepted_amplitudes,
                &outcome.amplitudes,
                &prepared,
                reference,
                start,
                end,
                config,
            )?;
            let flagged = score > config.threshold;
            attempts.push(AttemptReport {
                rho,
                score,
                flagged,
                fallback_events: outcome.fallback_events,
            });
            kept = Some(outcome);
            if !flagged {
                break;
            }
        }

        let outcome = kept.expect("at least one attempt runs");
        accepted_levels.extend_from_slice(&outcome.levels);
        accepted_amplitudes.extend_from_slice(&outcome.amplitudes);

        let final_flagged = attempts.last().expect("non-empty").flagged;
        if attempts[0].flagged {
            totals.initially_flagged += 1;
        }
        if final_flagged {
            totals.final_flagged += 1;
        }
        totals.regenerations += attempts.len() - 1;
        segments.push(SegmentReport { segment_index, start, end, attempts, final_flagged });

        start = end;
        segment_index += 1;
    }
    totals.n_segments = segments.len();

    let waveform = Waveform::new(accepted_amplitudes, reference.sample_rate)?;
    let report = UtteranceReport { utterance_id: utterance_id.to_string(), segments, totals };
    Ok((waveform, report))
}

/// Score a candidate segment against the reference: envelope difference over
/// the prefix ending at the segment (the causal filter state depends only on
/// the past), or raw power for the baseline score.
fn score_candidate(
    accepted_amplitudes: &[f64],
    candidate: &[f64],
    prepared: &PreparedReference,
    reference: &Waveform,
    start: usize,
    end: usize,
    config: &PipelineConfig,
) -> Result<f64, PipelineError> {
    if config.score_kind == ScoreKind::PowerDiff {
        return Ok(segment_score(
            candidate,
            &reference.samples[start..end],
            ScoreKind::PowerDiff,
        )?);
    }
    let mut prefix = Vec::with_capacity(end);
    prefix.extend_from_slice(accepted_amplitudes);
    prefix.extend_from_slice(candidate);
    let prefix_wave = Waveform { samples: prefix, sample_rate: prepared.sample_rate };
    let env = extract_envelope(&prefix_wave, &config.envelope_config());
    Ok(segment_score(
        &env.values[start..end],
        &prepared.envelope.values[start..end],
        config.score_kind,
    )?)
}

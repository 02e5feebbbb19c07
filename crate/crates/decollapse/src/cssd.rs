//! Segmental collapsed-speech detection by envelope comparison, the
//! power-difference baseline, and DET-curve/EER evaluation.
//!
//! A segment is flagged when its score exceeds the threshold. Scores never
//! normalize the waveforms: the conditioning features driving the generator
//! already carry the reference's power, so absolute amplitudes are
//! comparable.
//!
//! Error-rate naming follows the verification convention used for this
//! detector: FAR is the rate of collapsed utterances that were *not*
//! detected (misses), FRR the rate of normal utterances that *were*
//! detected (false alarms). Reports carry the standard names alongside.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::{extract_envelope, EnvelopeConfig};
use crate::signal::Waveform;

/// Default flagging threshold for [`ScoreKind::MaxDiff`] envelope scores
/// under the default (absolute-value) envelope configuration, calibrated at
/// the Type-I equal-error point of the default synthetic corpus (clean
/// utterances top out near 0.014 there, sustained collapse starts above
/// 0.32). Calibrate per deployment when the signal conditions differ.
pub const DEFAULT_THRESHOLD: f64 = 0.1686;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("segment lengths differ: {gen} vs {reference}")]
    LengthMismatch { gen: usize, reference: usize },
    #[error("generated utterance is empty")]
    EmptyInput,
    #[error("generated utterance ({gen} samples) exceeds the reference ({reference})")]
    ReferenceTooShort { gen: usize, reference: usize },
    #[error("sample rates differ: {gen} vs {reference}")]
    SampleRateMismatch { gen: u32, reference: u32 },
    #[error("DET evaluation needs at least one positive and one negative label")]
    SingleClass,
}

/// How a segment's score is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// Largest signed envelope excess `max_t (gen[t] − ref[t])`. Collapse
    /// shows up as the generated envelope exceeding the reference, so this
    /// is deliberately asymmetric. The default.
    MaxDiff,
    /// Mean absolute envelope difference (symmetric).
    MeanAbsDiff,
    /// Difference of mean squared raw amplitudes; the power-based baseline.
    PowerDiff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Samples per detection segment.
    pub segment_length: usize,
    /// Flag a segment when its score exceeds this.
    pub threshold: f64,
    pub envelope_config: EnvelopeConfig,
    pub score_kind: ScoreKind,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            segment_length: 4000,
            threshold: DEFAULT_THRESHOLD,
            envelope_config: EnvelopeConfig::default(),
            score_kind: ScoreKind::MaxDiff,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentVerdict {
    pub segment_index: usize,
    pub score: f64,
    pub flagged: bool,
}

/// Per-utterance detection report, one JSON object per line in CLI output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionReport {
    pub utterance_id: String,
    pub segments: Vec<SegmentVerdict>,
    pub n_flagged: usize,
    /// Maximum segment score; the utterance-level statistic for DET sweeps.
    pub max_score: f64,
}

impl DetectionReport {
    pub fn from_verdicts(utterance_id: impl Into<String>, segments: Vec<SegmentVerdict>) -> Self {
        let n_flagged = segments.iter().filter(|v| v.flagged).count();
        let max_score = segments
            .iter()
            .map(|v| v.score)
            .fold(f64::NEG_INFINITY, f64::max);
        Self { utterance_id: utterance_id.into(), segments, n_flagged, max_score }
    }
}

/// Score one segment. For [`ScoreKind::MaxDiff`] and
/// [`ScoreKind::MeanAbsDiff`] the inputs are envelope slices; for
/// [`ScoreKind::PowerDiff`] they are raw amplitude slices.
pub fn segment_score(gen_seg: &[f64], ref_seg: &[f64], kind: ScoreKind) -> Result<f64, DetectError> {
    if gen_seg.len() != ref_seg.len() {
        return Err(DetectError::LengthMismatch { gen: gen_seg.len(), reference: ref_seg.len() });
    }
    if gen_seg.is_empty() {
        return Err(DetectError::EmptyInput);
    }
    let n = gen_seg.len() as f64;
    Ok(match kind {
        ScoreKind::MaxDiff => gen_seg
            .iter()
            .zip(ref_seg)
            .map(|(g, r)| g - r)
            .fold(f64::NEG_INFINITY, f64::max),
        ScoreKind::MeanAbsDiff => {
            gen_seg.iter().zip(ref_seg).map(|(g, r)| (g - r).abs()).sum::<f64>() / n
        }
        ScoreKind::PowerDiff => {
            let gp = gen_seg.iter().map(|v| v * v).sum::<f64>() / n;
            let rp = ref_seg.iter().map(|v| v * v).sum::<f64>() / n;
            gp - rp
        }
    })
}

/// Segment the generated utterance and score each segment against the
/// reference. The reference envelope is computed over the full reference;
/// a partial trailing segment is scored like a full one so collapses near
/// the end cannot escape.
pub fn detect_utterance(
    gen: &Waveform,
    reference: &Waveform,
    config: &DetectorConfig,
) -> Result<Vec<SegmentVerdict>, DetectError> {
    if gen.is_empty() {
        return Err(DetectError::EmptyInput);
    }
    if gen.len() > reference.len() {
        return Err(DetectError::ReferenceTooShort { gen: gen.len(), reference: reference.len() });
    }
    if gen.sample_rate != reference.sample_rate {
        return Err(DetectError::SampleRateMismatch {
            gen: gen.sample_rate,
            reference: reference.sample_rate,
        });
    }

    let (gen_vals, ref_vals): (Vec<f64>, Vec<f64>) = match config.score_kind {
        ScoreKind::PowerDiff => (gen.samples.clone(), reference.samples.clone()),
        _ => (
            extract_envelope(gen, &config.envelope_config).values,
            extract_envelope(reference, &config.envelope_config).values,
        ),
    };

    let mut verdicts = Vec::new();
    let mut start = 0usize;
    let mut segment_index = 0usize;
    while start < gen.len() {
        let end = (start + config.segment_length).min(gen.len());
        let score = segment_score(&gen_vals[start..end], &ref_vals[start..end], config.score_kind)?;
        verdicts.push(SegmentVerdict {
            segment_index,
            score,
            flagged: score > config.threshold,
        });
        start = end;
        segment_index += 1;
    }
    Ok(verdicts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    /// Miss rate on collapsed utterances (paper-convention FAR).
    pub far: f64,
    /// False-alarm rate on normal utterances (paper-convention FRR).
    pub frr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetCurve {
    pub points: Vec<DetPoint>,
    pub eer: f64,
    /// Threshold at the equal-error crossing, linearly interpolated; an
    /// operating point for [`DetectorConfig::threshold`].
    pub eer_threshold: f64,
}

/// Sweep thresholds over labeled scores (`label = true` means collapsed)
/// and locate the equal-error rate.
///
/// Thresholds are all midpoints between adjacent distinct scores plus ±∞.
/// With flagging defined as `score > θ`, FAR rises and FRR falls as θ
/// grows; the EER is linearly interpolated at the crossing.
pub fn det_curve(scores: &[f64], labels: &[bool]) -> Result<DetCurve, DetectError> {
    assert_eq!(scores.len(), labels.len(), "scores and labels must pair up");
    let mut pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(&s, _)| s)
        .collect();
    let mut neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| !l)
        .map(|(&s, _)| s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(DetectError::SingleClass);
    }
    pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    neg.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();

    let mut thresholds = vec![f64::NEG_INFINITY];
    thresholds.extend(distinct.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    thresholds.push(f64::INFINITY);

    let points: Vec<DetPoint> = thresholds
        .iter()
        .map(|&threshold| {
            let missed = pos.partition_point(|&s| s <= threshold);
            let alarmed = neg.len() - neg.partition_point(|&s| s <= threshold);
            DetPoint {
                threshold,
                far: missed as f64 / pos.len() as f64,
                frr: alarmed as f64 / neg.len() as f64,
            }
        })
        .collect();

    let (eer, eer_threshold) = interpolate_eer(&points, &distinct);
    Ok(DetCurve { points, eer, eer_threshold })
}

fn interpolate_eer(points: &[DetPoint], distinct_scores: &[f64]) -> (f64, f64) {
    // d = far − frr runs from −1 to +1; find the sign change.
    let cross = points
        .iter()
        .position(|p| p.far - p.frr >= 0.0)
        .expect("far − frr reaches +1 at θ = +∞");
    let hi = &points[cross];
    if hi.far - hi.frr == 0.0 {
        return (hi.far, finite_or(hi.threshold, distinct_scores));
    }
    let lo = &points[cross - 1];
    let d_lo = lo.far - lo.frr;
    let d_hi = hi.far - hi.frr;
    let t = -d_lo / (d_hi - d_lo);
    let eer = lo.far + t * (hi.far - lo.far);
    let thr = if lo.threshold.is_finite() && hi.threshold.is_finite() {
        lo.threshold + t * (hi.threshold - lo.threshold)
    } else if lo.threshold.is_finite() {
        lo.threshold
    } else if hi.threshold.is_finite() {
        hi.threshold
    } else {
        // Only ±∞ in the sweep: every score is identical.
        distinct_scores[0]
    };
    (eer, thr)
}

fn finite_or(threshold: f64, distinct_scores: &[f64]) -> f64 {
    if threshold.is_finite() {
        threshold
    } else {
        distinct_scores[0]
    }
}

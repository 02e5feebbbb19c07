//! The LPC distribution constraint: a Gaussian mask over the 256 μ-law
//! levels and its ρ-weighted product with a predicted PMF.
//!
//! The mask evaluates a Gaussian density with mean `μ_LPC` (the LPC-predicted
//! amplitude) and std `σ_LPC` (the reference frame's residual std) at every
//! level amplitude, then normalizes. The constrained distribution is
//! `p_mod[q] ∝ p[q] · mask[q]^ρ`. All products run in the log domain with
//! max subtraction: ρ near 1 with σ near 1e-3 underflows direct arithmetic.

use thiserror::Error;

use crate::signal::{LevelIndex, LevelTable};

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PmfError {
    #[error("probability mass at level {index} is negative or non-finite: {value}")]
    BadMass { index: usize, value: f64 },
    #[error("probability masses sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("mask parameters must be finite with sigma > 0 (mu = {mu}, sigma = {sigma})")]
    BadMaskParams { mu: f64, sigma: f64 },
}

/// A probability mass function over the 256 μ-law levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf256 {
    p: [f64; 256],
}

impl Pmf256 {
    /// Validate an already-normalized mass vector.
    pub fn new(p: [f64; 256]) -> Result<Self, PmfError> {
        for (index, &value) in p.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(PmfError::BadMass { index, value });
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(PmfError::NotNormalized { sum });
        }
        Ok(Self { p })
    }

    /// Normalize a nonnegative mass vector to sum 1.
    pub fn normalized(mut raw: [f64; 256]) -> Result<Self, PmfError> {
        for (index, &value) in raw.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(PmfError::BadMass { index, value });
            }
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(PmfError::NotNormalized { sum: total });
        }
        for v in raw.iter_mut() {
            *v /= total;
        }
        Ok(Self { p: raw })
    }

    pub fn uniform() -> Self {
        Self { p: [1.0 / 256.0; 256] }
    }

    pub fn masses(&self) -> &[f64; 256] {
        &self.p
    }

    pub fn mass(&self, q: LevelIndex) -> f64 {
        self.p[q.index()]
    }

    pub fn argmax(&self) -> LevelIndex {
        let mut best = 0usize;
        for q in 1..256 {
            if self.p[q] > self.p[best] {
                best = q;
            }
        }
        LevelIndex(best as u8)
    }

    /// Inverse-CDF draw from a uniform variate in `[0, 1)`.
    pub fn sample(&self, u: f64) -> LevelIndex {
        debug_assert!((0.0..=1.0).contains(&u));
        let mut cum = 0.0;
        for (q, &mass) in self.p.iter().enumerate() {
            cum += mass;
            if u < cum {
                return LevelIndex(q as u8);
            }
        }
        // Accumulated rounding can leave cum marginally below u.
        LevelIndex(255)
    }
}

/// Mask parameters for one sample: regularization weight and the Gaussian
/// mean/std derived from the reference analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintParams {
    pub rho: f64,
    pub mu_lpc: f64,
    pub sigma_lpc: f64,
}

/// Result of applying the constraint. `fallback` is set when the predicted
/// PMF and the mask had no common support, in which case the mask itself is
/// returned as the safest reference-faithful distribution.
#[derive(Debug, Clone)]
pub struct Constrained {
    pub pmf: Pmf256,
    pub fallback: bool,
}

/// Gaussian mask over the level table: `p[q] ∝ exp(−((y_q − μ)/σ)²/2)`,
/// normalized to sum 1.
pub fn lpc_mask(mu_lpc: f64, sigma_lpc: f64, table: &LevelTable) -> Result<Pmf256, PmfError> {
    if !mu_lpc.is_finite() || !sigma_lpc.is_finite() || sigma_lpc <= 0.0 {
        return Err(PmfError::BadMaskParams { mu: mu_lpc, sigma: sigma_lpc });
    }
    let mut log_p = [0.0f64; 256];
    let mut max_log = f64::NEG_INFINITY;
    for (q, lp) in log_p.iter_mut().enumerate() {
        let z = (table.amplitudes()[q] - mu_lpc) / sigma_lpc;
        *lp = -0.5 * z * z;
        if *lp > max_log {
            max_log = *lp;
        }
    }
    let mut raw = [0.0f64; 256];
    for (r, lp) in raw.iter_mut().zip(&log_p) {
        *r = (lp - max_log).exp();
    }
    Pmf256::normalized(raw)
}

/// Constrain a predicted PMF with a ρ-powered mask: `p_mod[q] ∝ p[q]·mask[q]^ρ`.
///
/// ρ = 0 returns the prediction unchanged (exactly). Levels with zero
/// predicted mass stay zero. An empty support intersection triggers the
/// mask fallback instead of producing an invalid distribution.
pub fn apply_constraint(wn_pmf: &Pmf256, mask: &Pmf256, rho: f64) -> Constrained {
    assert!(rho >= 0.0 && rho.is_finite(), "rho must be finite and nonnegative");
    if rho == 0.0 {
        return Constrained { pmf: wn_pmf.clone(), fallback: false };
    }

    let mut log_p = [f64::NEG_INFINITY; 256];
    let mut max_log = f64::NEG_INFINITY;
    for q in 0..256 {
        let wn = wn_pmf.p[q];
        let m = mask.p[q];
        if wn > 0.0 && m > 0.0 {
            let lp = wn.ln() + rho * m.ln();
            log_p[q] = lp;
            if lp > max_log {
                max_log = lp;
            }
        }
    }
    if !max_log.is_finite() {
        return Constrained { pmf: mask.clone(), fallback: true };
    }

    let mut raw = [0.0f64; 256];
    for (r, lp) in raw.iter_mut().zip(&log_p) {
        *r = (lp - max_log).exp();
    }
    match Pmf256::normalized(raw) {
        Ok(pmf) => Constrained { pmf, fallback: false },
        Err(_) => Constrained { pmf: mask.clone(), fallback: true },
    }
}

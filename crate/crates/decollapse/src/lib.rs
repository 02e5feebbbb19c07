//! Detection and suppression of collapsed speech in autoregressive
//! sample-level waveform generation.
//!
//! Autoregressive vocoders that predict one 256-level μ-law sample at a time
//! occasionally derail into "collapsed" output: sustained white-noise-like
//! stretches (Type I) or short full-scale impulses (Type II). This crate
//! provides the two mechanisms to deal with that, plus the plumbing around
//! them:
//!
//! - a per-sample **distribution constraint**: the predicted probability mass
//!   function over the 256 μ-law levels is multiplied by a ρ-powered Gaussian
//!   mask derived from linear-prediction analysis of a collapse-free
//!   reference waveform ([`lpcdc`], backed by [`lpc`]),
//! - a segmental **collapse detector** that compares smoothed amplitude
//!   envelopes of the generated and reference waveforms ([`cssd`], backed by
//!   [`envelope`]),
//! - an orchestration loop that generates segment by segment, re-generates
//!   flagged segments under an escalating ρ schedule, and reports what it did
//!   ([`pipeline`]),
//! - sample sources to drive it: a WaveNet-style dilated causal network
//!   (inference only) and a scriptable collapse simulator ([`sampler`]),
//! - μ-law codec, 16-bit PCM WAV I/O ([`signal`]) and DET-curve evaluation
//!   ([`cssd::det_curve`]).
//!
//! The `decollapse` binary exposes the same functionality as a CLI; see the
//! repository README for the subcommands and file formats.

pub mod cssd;
pub mod envelope;
pub mod lpc;
pub mod lpcdc;
pub mod pipeline;
pub mod sampler;
pub mod signal;

pub use signal::{LevelIndex, LevelTable, Waveform};

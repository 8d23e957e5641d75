//! Phase reconstruction toolkit for monaural source separation in the
//! short-time Fourier transform domain.
//!
//! Given a mixture of sources and (estimates of) their spectral magnitudes,
//! the phase of each source at every time-frequency unit is constrained to
//! one of two mirror-image candidates around the mixture phase; only the
//! sign of the offset is unknown. This crate implements the machinery to
//! compute those candidates and to resolve the sign:
//!
//! - [`spectral`] — STFT/iSTFT with square-root Hann windows and exact
//!   overlap-add reconstruction.
//! - [`trig`] — absolute phase differences from the law of cosines, phase
//!   assembly from sign choices, and time-frequency masks (IBM/IRM/SMM/PSM).
//! - [`misi`] — multiple input spectrogram inversion with per-iteration
//!   mixture-consistency error redistribution.
//! - [`groupdelay`] — group delay along frequency and per-frame sign
//!   assignment via two-state dynamic programming, with an exhaustive
//!   search oracle.
//! - [`oracles`] — ground-truth-derived magnitude, sign, and group-delay
//!   providers plus controlled degradations for benchmark sweeps.
//! - [`metrics`] — SI-SDR family metrics and benchmark report types.
//! - [`scenes`] — WAV I/O, synthetic test signals, and SNR-controlled
//!   mixing driven by scene manifests.

pub mod spectral;
pub mod trig;

pub mod groupdelay;
pub mod misi;
pub mod oracles;

pub mod metrics;
pub mod scenes;

mod error;
pub(crate) mod util;

pub use error::{Error, Result};
pub use util::derive_seed;

/// Floor applied to divisors and magnitudes before division. Units whose
/// divisor falls below it produce 0 (masks) or fall back to the mixture
/// phase (phase differences).
pub const DIV_FLOOR: f64 = 1e-12;

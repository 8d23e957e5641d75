//! Multiple input spectrogram inversion.
//!
//! Each iteration resynthesizes every source from its fixed magnitude and
//! current phase, measures the mixture-consistency error, hands an equal
//! share of that error back to every source, and re-analyzes to obtain the
//! next phases. Magnitudes never change; only phases move. The returned
//! waveforms include the final error share, so they sum to the mixture
//! exactly.

use crate::spectral::{istft, polar_compose, polar_decompose, stft, MagSpec, PhaseSpec, Waveform};
use crate::util::{ensure_same_config, ensure_same_shape};
use crate::{Error, Result};

/// Output of [`misi`].
#[derive(Debug, Clone)]
pub struct MisiResult {
    /// Per-source phases after the final iteration.
    pub phases: Vec<PhaseSpec>,
    /// Per-source waveforms. After at least one iteration these carry the
    /// final error share and sum to the mixture exactly.
    pub waveforms: Vec<Waveform>,
    /// Energy of the mixture-consistency error at each iteration.
    pub residual_energy: Vec<f64>,
    /// Number of iterations actually run.
    pub iterations: usize,
}

/// Run `iterations` rounds of multiple input spectrogram inversion.
///
/// With `iterations == 0` the starting phases are returned verbatim along
/// with their plain resyntheses (no error distribution).
pub fn misi(
    mixture: &Waveform,
    mags: &[MagSpec],
    start_phases: &[PhaseSpec],
    iterations: usize,
) -> Result<MisiResult> {
    if mags.len() < 2 {
        return Err(Error::InvalidValue(format!(
            "misi requires at least 2 sources, got {}",
            mags.len()
        )));
    }
    if mags.len() != start_phases.len() {
        return Err(Error::LengthMismatch(format!(
            "misi: {} magnitudes but {} starting phases",
            mags.len(),
            start_phases.len()
        )));
    }
    let config = *mags[0].config();
    if config.sample_rate_hz != mixture.sample_rate_hz() {
        return Err(Error::InvalidValue(format!(
            "misi: mixture sample rate {} does not match config {}",
            mixture.sample_rate_hz(),
            config.sample_rate_hz
        )));
    }
    let frames = config.num_frames(mixture.len())?;
    for (c, (m, p)) in mags.iter().zip(start_phases).enumerate() {
        ensure_same_config("misi", &config, m.config())?;
        ensure_same_config("misi", &config, p.config())?;
        ensure_same_shape("misi", m.data().dim(), p.data().dim())?;
        if m.num_frames() != frames {
            return Err(Error::ShapeMismatch(format!(
                "misi: source {c} has {} frames, mixture implies {frames}",
                m.num_frames()
            )));
        }
    }

    let mut phases: Vec<PhaseSpec> = start_phases.to_vec();
    if iterations == 0 {
        let waveforms = mags
            .iter()
            .zip(&phases)
            .map(|(m, p)| istft(&polar_compose(m, p)?, mixture.len()))
            .collect::<Result<Vec<_>>>()?;
        return Ok(MisiResult { phases, waveforms, residual_energy: Vec::new(), iterations: 0 });
    }

    let share = 1.0 / mags.len() as f64;
    let mut residual_energy = Vec::with_capacity(iterations);
    let mut corrected: Vec<Waveform> = Vec::new();
    for _ in 0..iterations {
        let estimates = mags
            .iter()
            .zip(&phases)
            .map(|(m, p)| istft(&polar_compose(m, p)?, mixture.len()))
            .collect::<Result<Vec<_>>>()?;

        let mut error = mixture.samples().to_vec();
        for est in &estimates {
            for (e, s) in error.iter_mut().zip(est.samples()) {
                *e -= s;
            }
        }
        residual_energy.push(error.iter().map(|v| v * v).sum());

        corrected = estimates
            .iter()
            .map(|est| {
                Waveform::new(
                    est.samples()
                        .iter()
                        .zip(&error)
                        .map(|(s, e)| s + e * share)
                        .collect(),
                    mixture.sample_rate_hz(),
                )
            })
            .collect::<Result<Vec<_>>>()?;

        for (phase, wave) in phases.iter_mut().zip(&corrected) {
            *phase = polar_decompose(&stft(wave, &config)?).1;
        }
    }

    Ok(MisiResult { phases, waveforms: corrected, residual_energy, iterations })
}

/// Energy of the mixture-consistency error `||mixture - sum(estimates)||^2`.
pub fn mixture_consistency_residual(mixture: &Waveform, estimates: &[Waveform]) -> Result<f64> {
    for est in estimates {
        if est.len() != mixture.len() {
            return Err(Error::LengthMismatch(format!(
                "mixture_consistency_residual: estimate has {} samples, mixture {}",
                est.len(),
                mixture.len()
            )));
        }
    }
    Ok(mixture
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let total: f64 = estimates.iter().map(|e| e.samples()[i]).sum();
            (y - total) * (y - total)
        })
        .sum())
}

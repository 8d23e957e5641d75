//! Ground-truth-derived estimators and their controlled degradations.
//!
//! These stand in for learned magnitude/sign/group-delay estimators: exact
//! values come straight from the clean sources, and seeded perturbations
//! degrade them by a configurable amount so sweeps can measure how much
//! estimation error each reconstruction method tolerates. All randomness
//! is derived from (seed, stream index), so results never depend on
//! evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::groupdelay::{group_delay, GdSpec};
use crate::scenes::MixtureScene;
use crate::spectral::{
    istft, polar_compose, polar_decompose, stft, wrap_phase, ComplexSpec, MagSpec, PhaseSpec,
    StftConfig,
};
use crate::trig::{MaskSpec, SignSpec};
use crate::util::{derive_seed, ensure_same_config, ensure_same_shape};
use crate::{Error, Result};

/// Exact magnitude spectrograms of every source in the scene.
pub fn oracle_magnitudes(scene: &MixtureScene, config: &StftConfig) -> Result<Vec<MagSpec>> {
    scene
        .sources()
        .iter()
        .map(|s| Ok(polar_decompose(&stft(s, config)?).0))
        .collect()
}

/// Complex spectrograms of the one-vs-rest pair for source `target`: the
/// source itself and the sum of all remaining sources.
pub fn one_vs_rest_specs(
    scene: &MixtureScene,
    config: &StftConfig,
    target: usize,
) -> Result<(ComplexSpec, ComplexSpec)> {
    if target >= scene.num_sources() {
        return Err(Error::InvalidValue(format!(
            "source index {target} out of range ({} sources)",
            scene.num_sources()
        )));
    }
    let target_spec = stft(&scene.sources()[target], config)?;
    let rest_spec = stft(&scene.rest_of(target)?, config)?;
    Ok((target_spec, rest_spec))
}

/// Exact magnitudes of the one-vs-rest pair for source `target`.
pub fn one_vs_rest_magnitudes(
    scene: &MixtureScene,
    config: &StftConfig,
    target: usize,
) -> Result<(MagSpec, MagSpec)> {
    let (t, r) = one_vs_rest_specs(scene, config, target)?;
    Ok((polar_decompose(&t).0, polar_decompose(&r).0))
}

/// Multiply every unit by `10^(n/20)` with `n ~ Normal(0, noise_db)`,
/// i.e. log-normal magnitude noise with a standard deviation of
/// `noise_db` decibels. Seeded and reproducible; `noise_db == 0` is the
/// identity.
pub fn perturb_magnitudes(mags: &[MagSpec], noise_db: f64, seed: u64) -> Result<Vec<MagSpec>> {
    if !noise_db.is_finite() || noise_db < 0.0 {
        return Err(Error::InvalidValue(format!(
            "noise_db must be finite and >= 0, got {noise_db}"
        )));
    }
    if noise_db == 0.0 {
        return Ok(mags.to_vec());
    }
    let normal = Normal::new(0.0, noise_db)
        .map_err(|e| Error::InvalidValue(format!("noise_db {noise_db}: {e}")))?;
    mags.iter()
        .enumerate()
        .map(|(idx, m)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, idx as u64));
            let data = m.data().mapv(|a| a * 10f64.powf(rng.sample(normal) / 20.0));
            MagSpec::new(data, *m.config())
        })
        .collect()
}

/// Magnitude estimates obtained by applying masks to the mixture
/// magnitude; negative products are clamped to zero.
pub fn mask_applied_magnitudes(masks: &[MaskSpec], mag_mix: &MagSpec) -> Result<Vec<MagSpec>> {
    masks
        .iter()
        .map(|mask| {
            ensure_same_shape("mask_applied_magnitudes", mask.data().dim(), mag_mix.data().dim())?;
            ensure_same_config("mask_applied_magnitudes", mask.config(), mag_mix.config())?;
            let data = ndarray::Zip::from(mask.data())
                .and(mag_mix.data())
                .map_collect(|&m, &y| (m * y).max(0.0));
            MagSpec::new(data, *mag_mix.config())
        })
        .collect()
}

/// The true sign of the phase offset of the pair's reference source:
/// `+1` where its phase is at or ahead of the mixture phase, `-1` behind.
pub fn oracle_signs(target_phase: &PhaseSpec, phase_mix: &PhaseSpec) -> Result<SignSpec> {
    ensure_same_shape("oracle_signs", target_phase.data().dim(), phase_mix.data().dim())?;
    ensure_same_config("oracle_signs", target_phase.config(), phase_mix.config())?;
    let data = ndarray::Zip::from(target_phase.data())
        .and(phase_mix.data())
        .map_collect(|&p, &y| if wrap_phase(p - y) >= 0.0 { 1.0 } else { -1.0 });
    SignSpec::new(data, *target_phase.config())
}

/// Group delay of a clean phase spectrogram.
pub fn oracle_gd(phase: &PhaseSpec) -> Result<GdSpec> {
    group_delay(phase)
}

/// Add wrapped zero-mean Gaussian noise with standard deviation
/// `spread_rad` radians to every group-delay entry. `spread_rad == 0` is
/// the identity.
pub fn perturb_gd(gd: &GdSpec, spread_rad: f64, seed: u64) -> Result<GdSpec> {
    if !spread_rad.is_finite() || spread_rad < 0.0 {
        return Err(Error::InvalidValue(format!(
            "spread_rad must be finite and >= 0, got {spread_rad}"
        )));
    }
    if spread_rad == 0.0 {
        return Ok(gd.clone());
    }
    let normal = Normal::new(0.0, spread_rad)
        .map_err(|e| Error::InvalidValue(format!("spread {spread_rad}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = gd.data().mapv(|v| wrap_phase(v + rng.sample(normal)));
    GdSpec::new(data, *gd.config())
}

/// Resynthesize each source from a magnitude/phase pair (convenience for
/// oracle-identity checks).
pub fn resynthesize(
    mags: &[MagSpec],
    phases: &[PhaseSpec],
    out_len: usize,
) -> Result<Vec<crate::spectral::Waveform>> {
    if mags.len() != phases.len() {
        return Err(Error::LengthMismatch(format!(
            "resynthesize: {} magnitudes vs {} phases",
            mags.len(),
            phases.len()
        )));
    }
    mags.iter()
        .zip(phases)
        .map(|(m, p)| istft(&polar_compose(m, p)?, out_len))
        .collect()
}

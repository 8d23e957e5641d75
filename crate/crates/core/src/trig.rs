//! The trigonometric core.
//!
//! For a two-source mixture with known magnitudes, the law of cosines fixes
//! the absolute phase offset of each source from the mixture phase; only
//! the side of the mixture phasor each source lies on is unknown. This
//! module computes those offsets and the two resulting phase candidates,
//! assembles full phase spectrograms from explicit sign choices, and builds
//! the classic time-frequency masks.

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spectral::{spec_accessors, wrap_phase, ComplexSpec, MagSpec, PhaseSpec, StftConfig};
use crate::util::{ensure_same_config, ensure_same_shape, validate_entries};
use crate::{Error, Result, DIV_FLOOR};

const PI: f64 = std::f64::consts::PI;

/// Absolute source-to-mixture phase differences, entries in `[0, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSpec {
    data: Array2<f64>,
    config: StftConfig,
}

spec_accessors!(DeltaSpec, f64);

impl DeltaSpec {
    pub fn new(data: Array2<f64>, config: StftConfig) -> Result<Self> {
        config.validate()?;
        if data.ncols() != config.num_bins() {
            return Err(Error::ShapeMismatch(format!(
                "DeltaSpec has {} bins, config implies {}",
                data.ncols(),
                config.num_bins()
            )));
        }
        validate_entries("DeltaSpec", &data, |v| (0.0..=PI).contains(&v), "outside [0, pi]")?;
        Ok(DeltaSpec { data, config })
    }
}

/// Per-unit sign choices, entries in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignSpec {
    data: Array2<f64>,
    config: StftConfig,
}

spec_accessors!(SignSpec, f64);

impl SignSpec {
    pub fn new(data: Array2<f64>, config: StftConfig) -> Result<Self> {
        config.validate()?;
        if data.ncols() != config.num_bins() {
            return Err(Error::ShapeMismatch(format!(
                "SignSpec has {} bins, config implies {}",
                data.ncols(),
                config.num_bins()
            )));
        }
        validate_entries("SignSpec", &data, |v| v == 1.0 || v == -1.0, "must be -1 or +1")?;
        Ok(SignSpec { data, config })
    }
}

/// Mask families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    /// Ideal binary mask: 1 where the source dominates.
    Ibm,
    /// Ideal ratio mask: source magnitude over the sum of source magnitudes.
    Irm,
    /// Spectral magnitude mask: source magnitude over mixture magnitude.
    Smm,
    /// Phase-sensitive mask: SMM scaled by the cosine of the phase offset.
    /// Unbounded; negative values occur.
    Psm,
}

/// A time-frequency mask of a given [`MaskKind`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSpec {
    data: Array2<f64>,
    kind: MaskKind,
    config: StftConfig,
}

spec_accessors!(MaskSpec, f64);

impl MaskSpec {
    pub fn new(data: Array2<f64>, kind: MaskKind, config: StftConfig) -> Result<Self> {
        config.validate()?;
        if data.ncols() != config.num_bins() {
            return Err(Error::ShapeMismatch(format!(
                "MaskSpec has {} bins, config implies {}",
                data.ncols(),
                config.num_bins()
            )));
        }
        match kind {
            MaskKind::Ibm => {
                validate_entries("MaskSpec(IBM)", &data, |v| v == 0.0 || v == 1.0, "must be 0 or 1")?
            }
            MaskKind::Irm => validate_entries(
                "MaskSpec(IRM)",
                &data,
                |v| (0.0..=1.0).contains(&v),
                "outside [0, 1]",
            )?,
            MaskKind::Smm => validate_entries(
                "MaskSpec(SMM)",
                &data,
                |v| v.is_finite() && v >= 0.0,
                "must be finite and >= 0",
            )?,
            MaskKind::Psm => {
                validate_entries("MaskSpec(PSM)", &data, |v| v.is_finite(), "must be finite")?
            }
        }
        Ok(MaskSpec { data, kind, config })
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }
}

/// `max(a, min(b, x))`.
///
/// Panics if `a > b`. NaN propagates.
pub fn clamp(x: f64, a: f64, b: f64) -> f64 {
    assert!(a <= b, "clamp: empty range [{a}, {b}]");
    x.clamp(a, b)
}

/// Absolute phase difference between a source and the mixture, from the
/// three magnitudes via the law of cosines.
///
/// The cosine argument is truncated so that any value outside `[-1, 1]`
/// maps to 1: when the three magnitudes cannot form a triangle the
/// difference is 0 and the mixture phase stands in for the source phase.
/// Mixture or source magnitudes below [`DIV_FLOOR`] also yield 0.
///
/// Panics on negative or non-finite input.
pub fn abs_phase_diff(mag_mix: f64, mag_target: f64, mag_rest: f64) -> f64 {
    assert!(
        mag_mix >= 0.0 && mag_target >= 0.0 && mag_rest >= 0.0,
        "abs_phase_diff: negative magnitude ({mag_mix}, {mag_target}, {mag_rest})"
    );
    assert!(
        mag_mix.is_finite() && mag_target.is_finite() && mag_rest.is_finite(),
        "abs_phase_diff: non-finite magnitude"
    );
    if mag_mix < DIV_FLOOR || mag_target < DIV_FLOOR {
        return 0.0;
    }
    let raw = (mag_mix * mag_mix + mag_target * mag_target - mag_rest * mag_rest)
        / (2.0 * mag_mix * mag_target);
    let truncated = if !(-1.0..=1.0).contains(&raw) { 1.0 } else { raw };
    truncated.acos()
}

/// The two phase candidates for a source given the mixture value and the
/// magnitude pair: the mixture phase offset by the absolute difference on
/// either side. Returned as `(plus, minus)`, both wrapped.
pub fn phase_candidates(mixture: Complex64, mag_target: f64, mag_rest: f64) -> (f64, f64) {
    let mag_mix = mixture.norm();
    let angle = if mag_mix == 0.0 { 0.0 } else { wrap_phase(mixture.arg()) };
    let delta = abs_phase_diff(mag_mix, mag_target, mag_rest);
    (wrap_phase(angle + delta), wrap_phase(angle - delta))
}

/// Grid version of [`abs_phase_diff`] over whole spectrograms.
pub fn delta_from_magnitudes(
    mag_mix: &MagSpec,
    mag_target: &MagSpec,
    mag_rest: &MagSpec,
) -> Result<DeltaSpec> {
    ensure_same_shape("delta_from_magnitudes", mag_mix.data().dim(), mag_target.data().dim())?;
    ensure_same_shape("delta_from_magnitudes", mag_mix.data().dim(), mag_rest.data().dim())?;
    ensure_same_config("delta_from_magnitudes", mag_mix.config(), mag_target.config())?;
    ensure_same_config("delta_from_magnitudes", mag_mix.config(), mag_rest.config())?;
    let data = Zip::from(mag_mix.data())
        .and(mag_target.data())
        .and(mag_rest.data())
        .map_collect(|&y, &a, &b| abs_phase_diff(y, a, b));
    DeltaSpec::new(data, *mag_mix.config())
}

/// Assemble the phase estimates of a source pair from the mixture phase,
/// the two absolute differences, and a per-unit sign.
///
/// The target source gets `wrap(mixture + sign * delta_target)` and the
/// rest gets `wrap(mixture - sign * delta_rest)`, so the pair always lies
/// on opposite sides of the mixture phase.
pub fn assemble_phases(
    phase_mix: &PhaseSpec,
    delta_target: &DeltaSpec,
    delta_rest: &DeltaSpec,
    sign: &SignSpec,
) -> Result<(PhaseSpec, PhaseSpec)> {
    let dim = phase_mix.data().dim();
    ensure_same_shape("assemble_phases", dim, delta_target.data().dim())?;
    ensure_same_shape("assemble_phases", dim, delta_rest.data().dim())?;
    ensure_same_shape("assemble_phases", dim, sign.data().dim())?;
    ensure_same_config("assemble_phases", phase_mix.config(), delta_target.config())?;
    ensure_same_config("assemble_phases", phase_mix.config(), delta_rest.config())?;
    ensure_same_config("assemble_phases", phase_mix.config(), sign.config())?;

    let target = Zip::from(phase_mix.data())
        .and(delta_target.data())
        .and(sign.data())
        .map_collect(|&y, &d, &g| wrap_phase(y + g * d));
    let rest = Zip::from(phase_mix.data())
        .and(delta_rest.data())
        .and(sign.data())
        .map_collect(|&y, &d, &g| wrap_phase(y - g * d));
    let config = *phase_mix.config();
    Ok((PhaseSpec::new(target, config)?, PhaseSpec::new(rest, config)?))
}

/// Ideal masks of the requested kind, one per source.
///
/// Warns (without failing) when the sources do not sum to the mixture
/// within 1e-8. Divisions are floored at [`DIV_FLOOR`]; affected units get
/// mask 0. IBM ties go to the lowest source index.
pub fn ideal_masks(
    sources: &[ComplexSpec],
    mixture: &ComplexSpec,
    kind: MaskKind,
) -> Result<Vec<MaskSpec>> {
    if sources.is_empty() {
        return Err(Error::InvalidValue("ideal_masks: no sources".into()));
    }
    let dim = mixture.data().dim();
    for s in sources {
        ensure_same_shape("ideal_masks", dim, s.data().dim())?;
        ensure_same_config("ideal_masks", mixture.config(), s.config())?;
    }

    let mut max_dev = 0.0f64;
    for (idx, y) in mixture.data().indexed_iter() {
        let sum: Complex64 = sources.iter().map(|s| s.data()[idx]).sum();
        max_dev = max_dev.max((sum - y).norm());
    }
    if max_dev > 1e-8 {
        log::warn!("ideal_masks: sources deviate from mixture by up to {max_dev:.3e}");
    }

    let config = *mixture.config();
    let mags: Vec<Array2<f64>> = sources.iter().map(|s| s.data().mapv(|c| c.norm())).collect();
    let mut out = Vec::with_capacity(sources.len());
    for (c, source) in sources.iter().enumerate() {
        let data = Array2::from_shape_fn(dim, |idx| {
            let a = mags[c][idx];
            match kind {
                MaskKind::Ibm => {
                    let mut winner = 0;
                    for other in 1..sources.len() {
                        if mags[other][idx] > mags[winner][idx] {
                            winner = other;
                        }
                    }
                    if winner == c {
                        1.0
                    } else {
                        0.0
                    }
                }
                MaskKind::Irm => {
                    let total: f64 = mags.iter().map(|m| m[idx]).sum();
                    if total < DIV_FLOOR {
                        0.0
                    } else {
                        a / total
                    }
                }
                MaskKind::Smm => {
                    let y = mixture.data()[idx].norm();
                    if y < DIV_FLOOR {
                        0.0
                    } else {
                        a / y
                    }
                }
                MaskKind::Psm => {
                    let y = mixture.data()[idx];
                    let mag_y = y.norm();
                    if mag_y < DIV_FLOOR {
                        0.0
                    } else {
                        let angle_gap = source.data()[idx].arg() - y.arg();
                        a * angle_gap.cos() / mag_y
                    }
                }
            }
        });
        // IRM rounding can leave values a hair above 1; snap them back.
        let data = if kind == MaskKind::Irm {
            data.mapv(|v| v.clamp(0.0, 1.0))
        } else {
            data
        };
        out.push(MaskSpec::new(data, kind, config)?);
    }
    Ok(out)
}

/// Assemble a phase-sensitive mask from magnitude estimates alone: the
/// cosine of the phase offset is taken from the law-of-cosines difference,
/// so no phase estimate is needed. The result is unbounded and can go
/// negative.
pub fn psm_from_magnitudes(
    mag_target: &MagSpec,
    delta_target: &DeltaSpec,
    mag_mix: &MagSpec,
) -> Result<MaskSpec> {
    ensure_same_shape("psm_from_magnitudes", mag_target.data().dim(), delta_target.data().dim())?;
    ensure_same_shape("psm_from_magnitudes", mag_target.data().dim(), mag_mix.data().dim())?;
    ensure_same_config("psm_from_magnitudes", mag_target.config(), delta_target.config())?;
    ensure_same_config("psm_from_magnitudes", mag_target.config(), mag_mix.config())?;
    let data = Zip::from(mag_target.data())
        .and(delta_target.data())
        .and(mag_mix.data())
        .map_collect(|&a, &d, &y| if y < DIV_FLOOR { 0.0 } else { a * d.cos() / y });
    MaskSpec::new(data, MaskKind::Psm, *mag_target.config())
}

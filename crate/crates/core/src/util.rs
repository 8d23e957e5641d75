//! Shared validation helpers.

use ndarray::Array2;

use crate::spectral::StftConfig;
use crate::{Error, Result};

pub(crate) fn ensure_same_shape(op: &str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!(
            "{op}: {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

pub(crate) fn ensure_same_config(op: &str, a: &StftConfig, b: &StftConfig) -> Result<()> {
    if a != b {
        return Err(Error::InvalidConfig(format!(
            "{op}: operands carry different STFT configs"
        )));
    }
    Ok(())
}

/// Validate every entry of a real matrix against a predicate.
pub(crate) fn validate_entries<F>(name: &str, data: &Array2<f64>, pred: F, desc: &str) -> Result<()>
where
    F: Fn(f64) -> bool,
{
    for ((t, f), &v) in data.indexed_iter() {
        if !pred(v) {
            return Err(Error::InvalidValue(format!(
                "{name}: entry ({t},{f}) = {v} {desc}"
            )));
        }
    }
    Ok(())
}

/// Split a 64-bit seed into an independent stream for substream `index`.
///
/// SplitMix64 finalizer; cheap and well distributed, so per-source and
/// per-purpose RNG streams never overlap for practical purposes.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

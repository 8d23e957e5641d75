//! Framed spectral analysis and synthesis.
//!
//! Signals are zero-padded by `win_len - hop` samples at both ends, framed
//! with a square-root periodic Hann window, and transformed with a
//! one-sided DFT of `fft_size / 2 + 1` bins. Synthesis overlap-adds the
//! inverse transforms through the same window and normalizes by the
//! accumulated squared window, so `istft(stft(x))` reconstructs `x` across
//! the whole signal, edges included.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::util::{ensure_same_config, ensure_same_shape, validate_entries};
use crate::{Error, Result, DIV_FLOOR};

const TWO_PI: f64 = std::f64::consts::TAU;
const PI: f64 = std::f64::consts::PI;

/// Analysis/synthesis window shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    SqrtHann,
}

/// Framing parameters shared by every spectrogram type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub sample_rate_hz: u32,
    pub win_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub window_kind: WindowKind,
}

impl Default for StftConfig {
    /// 8 kHz audio framed with a 32 ms window, 8 ms hop, 256-point DFT.
    fn default() -> Self {
        StftConfig {
            sample_rate_hz: 8000,
            win_len: 256,
            hop: 64,
            fft_size: 256,
            window_kind: WindowKind::SqrtHann,
        }
    }
}

impl StftConfig {
    pub fn new(sample_rate_hz: u32, win_len: usize, hop: usize, fft_size: usize) -> Result<Self> {
        let config = StftConfig {
            sample_rate_hz,
            win_len,
            hop,
            fft_size,
            window_kind: WindowKind::SqrtHann,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz == 0 {
            return Err(Error::InvalidConfig("sample_rate_hz must be positive".into()));
        }
        if self.win_len == 0 || self.hop == 0 {
            return Err(Error::InvalidConfig("win_len and hop must be positive".into()));
        }
        if self.hop > self.win_len {
            return Err(Error::InvalidConfig(format!(
                "hop {} exceeds win_len {}",
                self.hop, self.win_len
            )));
        }
        // Overlap-added squared sqrt-Hann windows sum to a constant only
        // when the hop divides the window length.
        if self.win_len % self.hop != 0 {
            return Err(Error::InvalidConfig(format!(
                "hop {} must divide win_len {}",
                self.hop, self.win_len
            )));
        }
        if self.fft_size < self.win_len {
            return Err(Error::InvalidConfig(format!(
                "fft_size {} smaller than win_len {}",
                self.fft_size, self.win_len
            )));
        }
        if self.fft_size % 2 != 0 {
            return Err(Error::InvalidConfig("fft_size must be even".into()));
        }
        Ok(())
    }

    /// Number of one-sided frequency bins, `fft_size / 2 + 1`.
    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Zero padding added at both signal ends before framing.
    pub fn edge_pad(&self) -> usize {
        self.win_len - self.hop
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn num_frames(&self, len: usize) -> Result<usize> {
        let padded = len + 2 * self.edge_pad();
        if padded < self.win_len {
            return Err(Error::SignalTooShort(format!(
                "{len} samples is shorter than one frame after padding \
                 ({padded} < win_len {})",
                self.win_len
            )));
        }
        Ok((padded - self.win_len).div_ceil(self.hop) + 1)
    }
}

/// A finite, non-empty time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidValue("waveform sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidValue("waveform must not be empty".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "waveform sample {i} is not finite: {}",
                samples[i]
            )));
        }
        Ok(Waveform { samples, sample_rate_hz })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}

macro_rules! spec_accessors {
    ($ty:ident, $elem:ty) => {
        impl $ty {
            pub fn data(&self) -> &Array2<$elem> {
                &self.data
            }

            pub fn config(&self) -> &StftConfig {
                &self.config
            }

            pub fn num_frames(&self) -> usize {
                self.data.nrows()
            }

            pub fn num_bins(&self) -> usize {
                self.data.ncols()
            }
        }
    };
}

pub(crate) use spec_accessors;

/// Complex STFT matrix, frames on rows and bins on columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpec {
    data: Array2<Complex64>,
    config: StftConfig,
}

spec_accessors!(ComplexSpec, Complex64);

impl ComplexSpec {
    pub fn new(data: Array2<Complex64>, config: StftConfig) -> Result<Self> {
        config.validate()?;
        if data.ncols() != config.num_bins() {
            return Err(Error::ShapeMismatch(format!(
                "ComplexSpec has {} bins, config implies {}",
                data.ncols(),
                config.num_bins()
            )));
        }
        for ((t, f), v) in data.indexed_iter() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::InvalidValue(format!(
                    "ComplexSpec: entry ({t},{f}) = {v} is not finite"
                )));
            }
        }
        Ok(ComplexSpec { data, config })
    }
}

/// Non-negative magnitude spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct MagSpec {
    data: Array2<f64>,
    config: StftConfig,
}

spec_accessors!(MagSpec, f64);

impl MagSpec {
    pub fn new(data: Array2<f64>, config: StftConfig) -> Result<Self> {
        config.validate()?;
        if data.ncols() != config.num_bins() {
            return Err(Error::ShapeMismatch(format!(
                "MagSpec has {} bins, config implies {}",
                data.ncols(),
                config.num_bins()
            )));
        }
        validate_entries("MagSpec", &data, |v| v.is_finite() && v >= 0.0, "must be finite and >= 0")?;
        Ok(MagSpec { data, config })
    }
}

/// Phase spectrogram with every entry wrapped into `(-pi, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpec {
    data: Array2<f64>,
    config: StftConfig,
}

spec_accessors!(PhaseSpec, f64);

impl PhaseSpec {
    pub fn new(data: Array2<f64>, config: StftConfig) -> Result<Self> {
        config.validate()?;
        if data.ncols() != config.num_bins() {
            return Err(Error::ShapeMismatch(format!(
                "PhaseSpec has {} bins, config implies {}",
                data.ncols(),
                config.num_bins()
            )));
        }
        validate_entries("PhaseSpec", &data, |v| v > -PI && v <= PI, "outside (-pi, pi]")?;
        Ok(PhaseSpec { data, config })
    }
}

/// Wrap an angle into `(-pi, pi]`.
///
/// Already-wrapped values are returned bitwise unchanged, so wrapping is
/// exactly idempotent. Panics on non-finite input.
pub fn wrap_phase(x: f64) -> f64 {
    assert!(x.is_finite(), "wrap_phase: non-finite input {x}");
    if x > -PI && x <= PI {
        return x;
    }
    let r = x.rem_euclid(TWO_PI);
    if r > PI {
        r - TWO_PI
    } else {
        r
    }
}

/// Analysis window for `config`: square root of the periodic Hann window.
pub fn make_window(config: &StftConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let n = config.win_len as f64;
    Ok(match config.window_kind {
        WindowKind::SqrtHann => (0..config.win_len)
            .map(|i| (0.5 - 0.5 * (TWO_PI * i as f64 / n).cos()).max(0.0).sqrt())
            .collect(),
    })
}

/// One-sided STFT of `x`.
pub fn stft(x: &Waveform, config: &StftConfig) -> Result<ComplexSpec> {
    config.validate()?;
    if x.sample_rate_hz() != config.sample_rate_hz {
        return Err(Error::InvalidValue(format!(
            "waveform sample rate {} does not match config {}",
            x.sample_rate_hz(),
            config.sample_rate_hz
        )));
    }
    let frames = config.num_frames(x.len())?;
    let pad = config.edge_pad();
    let total = (frames - 1) * config.hop + config.win_len;
    let mut padded = vec![0.0; total];
    padded[pad..pad + x.len()].copy_from_slice(x.samples());

    let window = make_window(config)?;
    let bins = config.num_bins();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(config.fft_size);

    let mut data = Array2::<Complex64>::zeros((frames, bins));
    let mut buf = vec![Complex64::new(0.0, 0.0); config.fft_size];
    for t in 0..frames {
        let start = t * config.hop;
        for (i, b) in buf.iter_mut().enumerate() {
            let s = if i < config.win_len {
                padded[start + i] * window[i]
            } else {
                0.0
            };
            *b = Complex64::new(s, 0.0);
        }
        fft.process(&mut buf);
        for f in 0..bins {
            data[(t, f)] = buf[f];
        }
    }
    ComplexSpec::new(data, *config)
}

/// Inverse STFT via overlap-add, trimmed to `out_len` samples.
///
/// The synthesis window equals the analysis window; the overlap-add sum is
/// normalized by the accumulated squared window (floored at [`DIV_FLOOR`]).
/// Requesting more samples than the frames can reconstruct is an error.
pub fn istft(spec: &ComplexSpec, out_len: usize) -> Result<Waveform> {
    let config = *spec.config();
    let frames = spec.num_frames();
    let pad = config.edge_pad();
    let total = (frames - 1) * config.hop + config.win_len;
    if pad + out_len > total {
        return Err(Error::InvalidValue(format!(
            "istft: requested {out_len} samples but only {} are reconstructable from {frames} frames",
            total - pad
        )));
    }

    let window = make_window(&config)?;
    let bins = config.num_bins();
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(config.fft_size);

    let mut acc = vec![0.0; total];
    let mut norm = vec![0.0; total];
    let mut buf = vec![Complex64::new(0.0, 0.0); config.fft_size];
    let scale = 1.0 / config.fft_size as f64;
    for t in 0..frames {
        for f in 0..bins {
            buf[f] = spec.data()[(t, f)];
        }
        // Hermitian extension; taking the real part below projects any
        // non-symmetric DC/Nyquist content onto real signals.
        for f in bins..config.fft_size {
            buf[f] = buf[config.fft_size - f].conj();
        }
        ifft.process(&mut buf);
        let start = t * config.hop;
        for i in 0..config.win_len {
            acc[start + i] += buf[i].re * scale * window[i];
            norm[start + i] += window[i] * window[i];
        }
    }

    let samples = (0..out_len)
        .map(|i| acc[pad + i] / norm[pad + i].max(DIV_FLOOR))
        .collect();
    Waveform::new(samples, config.sample_rate_hz)
}

/// Split a complex spectrogram into magnitude and phase.
///
/// Phase at exactly-zero magnitude is defined as 0.
pub fn polar_decompose(spec: &ComplexSpec) -> (MagSpec, PhaseSpec) {
    let mag = spec.data().mapv(|c| c.norm());
    let phase = spec
        .data()
        .mapv(|c| if c.norm() == 0.0 { 0.0 } else { wrap_phase(c.arg()) });
    let config = *spec.config();
    (
        MagSpec::new(mag, config).expect("norms of finite values are valid magnitudes"),
        PhaseSpec::new(phase, config).expect("wrapped angles are valid phases"),
    )
}

/// Combine magnitude and phase into a complex spectrogram.
pub fn polar_compose(mag: &MagSpec, phase: &PhaseSpec) -> Result<ComplexSpec> {
    ensure_same_shape("polar_compose", mag.data().dim(), phase.data().dim())?;
    ensure_same_config("polar_compose", mag.config(), phase.config())?;
    let data = ndarray::Zip::from(mag.data())
        .and(phase.data())
        .map_collect(|&m, &p| Complex64::from_polar(m, p));
    ComplexSpec::new(data, *mag.config())
}

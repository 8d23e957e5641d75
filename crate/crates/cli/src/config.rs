//! Run configuration: reconstruction method, magnitude estimator,
//! group-delay source, and STFT parameters, with string forms shared by
//! the command line, config files, and report labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use trigphase::spectral::StftConfig;

use crate::{CliError, CliResult};

/// How the source phases are reconstructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    /// Estimated magnitudes with the mixture phase.
    MixturePhase,
    /// Iterative phase reconstruction with error redistribution.
    Misi,
    /// Per-frame sign decoding against estimated group delay.
    GdViterbi,
    /// Phase offsets with the true sign per unit.
    OracleSign,
    /// Diagnostic ceiling: per unit, the candidate closer to the true
    /// phase. Uses ground truth; flagged in reports.
    CandidatesBest,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::MixturePhase,
        Method::Misi,
        Method::GdViterbi,
        Method::OracleSign,
        Method::CandidatesBest,
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::MixturePhase => "mixture_phase",
            Method::Misi => "misi",
            Method::GdViterbi => "gd_viterbi",
            Method::OracleSign => "oracle_sign",
            Method::CandidatesBest => "candidates_best",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mixture_phase" => Ok(Method::MixturePhase),
            "misi" => Ok(Method::Misi),
            "gd_viterbi" => Ok(Method::GdViterbi),
            "oracle_sign" => Ok(Method::OracleSign),
            "candidates_best" => Ok(Method::CandidatesBest),
            other => Err(format!(
                "unknown method {other:?} (expected mixture_phase, misi, gd_viterbi, oracle_sign, or candidates_best)"
            )),
        }
    }
}

/// Starting phases handed to the iterative method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StartPhase {
    Mixture,
    GdViterbi,
    OracleSign,
}

impl fmt::Display for StartPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StartPhase::Mixture => "mixture",
            StartPhase::GdViterbi => "gd_viterbi",
            StartPhase::OracleSign => "oracle_sign",
        })
    }
}

impl FromStr for StartPhase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mixture" => Ok(StartPhase::Mixture),
            "gd_viterbi" => Ok(StartPhase::GdViterbi),
            "oracle_sign" => Ok(StartPhase::OracleSign),
            other => Err(format!(
                "unknown starting phase {other:?} (expected mixture, gd_viterbi, or oracle_sign)"
            )),
        }
    }
}

/// Where the magnitude estimates come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Estimator {
    /// Exact magnitudes from the clean sources.
    Oracle,
    /// Oracle magnitudes with log-normal noise of the given dB spread.
    Perturbed { noise_db: f64 },
    /// Ideal-ratio-mask estimates: sum-constrained to the mixture
    /// magnitude, which collapses the phase-offset geometry.
    IrmApplied,
    /// Phase-sensitive-mask estimates clamped to [0, 1] before applying.
    PsmClampedApplied,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Oracle => f.write_str("oracle"),
            Estimator::Perturbed { noise_db } => write!(f, "perturbed:{noise_db}"),
            Estimator::IrmApplied => f.write_str("irm_applied"),
            Estimator::PsmClampedApplied => f.write_str("psm_clamped_applied"),
        }
    }
}

impl FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(db) = s.strip_prefix("perturbed:") {
            let noise_db: f64 = db
                .parse()
                .map_err(|_| format!("perturbed estimator: bad noise level {db:?}"))?;
            if !noise_db.is_finite() || noise_db < 0.0 {
                return Err(format!("perturbed estimator: noise level {noise_db} must be >= 0"));
            }
            return Ok(Estimator::Perturbed { noise_db });
        }
        match s {
            "oracle" => Ok(Estimator::Oracle),
            "irm_applied" => Ok(Estimator::IrmApplied),
            "psm_clamped_applied" => Ok(Estimator::PsmClampedApplied),
            other => Err(format!(
                "unknown estimator {other:?} (expected oracle, perturbed:<db>, irm_applied, or psm_clamped_applied)"
            )),
        }
    }
}

/// Where group-delay estimates come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GdSource {
    /// Group delay of the clean source phases.
    Oracle,
    /// Oracle group delay with wrapped Gaussian noise of the given spread
    /// in radians.
    Perturbed { spread_rad: f64 },
}

impl fmt::Display for GdSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GdSource::Oracle => f.write_str("oracle"),
            GdSource::Perturbed { spread_rad } => write!(f, "perturbed:{spread_rad}"),
        }
    }
}

impl FromStr for GdSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(v) = s.strip_prefix("perturbed:") {
            let spread_rad: f64 =
                v.parse().map_err(|_| format!("perturbed gd: bad spread {v:?}"))?;
            if !spread_rad.is_finite() || spread_rad < 0.0 {
                return Err(format!("perturbed gd: spread {spread_rad} must be >= 0"));
            }
            return Ok(GdSource::Perturbed { spread_rad });
        }
        match s {
            "oracle" => Ok(GdSource::Oracle),
            other => Err(format!("unknown gd source {other:?} (expected oracle or perturbed:<rad>)")),
        }
    }
}

macro_rules! string_convs {
    ($ty:ty) => {
        impl From<$ty> for String {
            fn from(v: $ty) -> String {
                v.to_string()
            }
        }

        impl TryFrom<String> for $ty {
            type Error = String;

            fn try_from(s: String) -> Result<Self, String> {
                s.parse()
            }
        }
    };
}

string_convs!(Method);
string_convs!(StartPhase);
string_convs!(Estimator);
string_convs!(GdSource);

/// Everything one reconstruction run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub stft: StftConfig,
    pub method: Method,
    pub misi_k: usize,
    pub start_phase: StartPhase,
    pub estimator: Estimator,
    pub gd_source: GdSource,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            stft: StftConfig::default(),
            method: Method::MixturePhase,
            misi_k: 5,
            start_phase: StartPhase::Mixture,
            estimator: Estimator::Oracle,
            gd_source: GdSource::Oracle,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Canonical label for reports; equal configurations aggregate
    /// together under this key.
    pub fn method_label(&self) -> String {
        let mut label = match self.method {
            Method::Misi => format!("misi-{}[start={}", self.misi_k, self.start_phase),
            other => format!("{other}["),
        };
        if !label.ends_with('[') {
            label.push(',');
        }
        label.push_str(&format!("est={}", self.estimator));
        if self.uses_gd() {
            label.push_str(&format!(",gd={}", self.gd_source));
        }
        label.push(']');
        label
    }

    /// True when the configuration consults a group-delay estimate.
    pub fn uses_gd(&self) -> bool {
        self.method == Method::GdViterbi
            || (self.method == Method::Misi && self.start_phase == StartPhase::GdViterbi)
    }
}

/// Optional config-file fields; anything set here overrides the defaults,
/// and explicit command-line flags override both.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub sample_rate_hz: Option<u32>,
    pub win_len: Option<usize>,
    pub hop: Option<usize>,
    pub fft_size: Option<usize>,
    pub method: Option<String>,
    pub misi_k: Option<usize>,
    pub start_phase: Option<String>,
    pub estimator: Option<String>,
    pub gd: Option<String>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &std::path::Path) -> CliResult<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
    }

    /// Apply this file's fields on top of `base`.
    pub fn apply(&self, base: &mut RunConfig) -> CliResult<()> {
        let mut stft = base.stft;
        if let Some(v) = self.sample_rate_hz {
            stft.sample_rate_hz = v;
        }
        if let Some(v) = self.win_len {
            stft.win_len = v;
        }
        if let Some(v) = self.hop {
            stft.hop = v;
        }
        if let Some(v) = self.fft_size {
            stft.fft_size = v;
        }
        stft.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        base.stft = stft;
        if let Some(v) = &self.method {
            base.method = v.parse().map_err(CliError::Invalid)?;
        }
        if let Some(v) = self.misi_k {
            base.misi_k = v;
        }
        if let Some(v) = &self.start_phase {
            base.start_phase = v.parse().map_err(CliError::Invalid)?;
        }
        if let Some(v) = &self.estimator {
            base.estimator = v.parse().map_err(CliError::Invalid)?;
        }
        if let Some(v) = &self.gd {
            base.gd_source = v.parse().map_err(CliError::Invalid)?;
        }
        if let Some(v) = self.seed {
            base.seed = v;
        }
        Ok(())
    }
}

/// Parse a comma-separated list of values.
pub fn parse_list<T: FromStr<Err = String>>(s: &str, what: &str) -> CliResult<Vec<T>> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        out.push(item.parse().map_err(|e: String| CliError::Invalid(e))?);
    }
    if out.is_empty() {
        return Err(CliError::Invalid(format!("empty {what} list")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimator_round_trips_through_strings() {
        for s in ["oracle", "perturbed:3", "perturbed:0.5", "irm_applied", "psm_clamped_applied"] {
            let e: Estimator = s.parse().unwrap();
            assert_eq!(e.to_string(), s);
        }
        assert!("perturbed:x".parse::<Estimator>().is_err());
        assert!("perturbed:-1".parse::<Estimator>().is_err());
        assert!("psm".parse::<Estimator>().is_err());
    }

    #[test]
    fn method_labels_are_stable() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.method_label(), "mixture_phase[est=oracle]");
        cfg.method = Method::Misi;
        assert_eq!(cfg.method_label(), "misi-5[start=mixture,est=oracle]");
        cfg.start_phase = StartPhase::GdViterbi;
        cfg.gd_source = GdSource::Perturbed { spread_rad: 0.5 };
        assert_eq!(cfg.method_label(), "misi-5[start=gd_viterbi,est=oracle,gd=perturbed:0.5]");
        cfg.method = Method::GdViterbi;
        assert_eq!(cfg.method_label(), "gd_viterbi[est=oracle,gd=perturbed:0.5]");
    }

    #[test]
    fn file_config_overrides_and_validates() {
        let mut cfg = RunConfig::default();
        let file: FileConfig = serde_json::from_str(
            r#"{"method": "misi", "misi_k": 3, "estimator": "perturbed:2", "seed": 9}"#,
        )
        .unwrap();
        file.apply(&mut cfg).unwrap();
        assert_eq!(cfg.method, Method::Misi);
        assert_eq!(cfg.misi_k, 3);
        assert_eq!(cfg.estimator, Estimator::Perturbed { noise_db: 2.0 });
        assert_eq!(cfg.seed, 9);

        let bad: FileConfig = serde_json::from_str(r#"{"hop": 99}"#).unwrap();
        assert!(bad.apply(&mut cfg).is_err());
        assert!(serde_json::from_str::<FileConfig>(r#"{"hops": 64}"#).is_err());
    }

    #[test]
    fn list_parsing() {
        let methods = parse_list::<Method>("mixture_phase, misi", "method").unwrap();
        assert_eq!(methods, vec![Method::MixturePhase, Method::Misi]);
        assert!(parse_list::<Method>("", "method").is_err());
        assert!(parse_list::<Method>("bogus", "method").is_err());
    }
}

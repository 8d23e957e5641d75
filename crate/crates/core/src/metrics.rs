//! Evaluation metrics and benchmark reports.
//!
//! SI-SDR projects the estimate onto the reference, so any rescaling of
//! the estimate leaves the score unchanged. Perfect reconstructions are
//! reported as a capped sentinel ([`SI_SDR_CAP_DB`]) with an explicit flag;
//! aggregates exclude capped values and count them instead.

use serde::{Deserialize, Serialize};

use crate::spectral::{MagSpec, PhaseSpec, Waveform};
use crate::util::{ensure_same_config, ensure_same_shape};
use crate::{Error, Result};

/// Sentinel stored in reports when the error energy underflows, i.e. the
/// reconstruction is numerically perfect.
pub const SI_SDR_CAP_DB: f64 = 300.0;

/// Scale-invariant signal-to-distortion ratio in dB.
///
/// Returns `f64::INFINITY` when the error energy is below
/// `1e-30 * ||projection||^2`; report types cap that to [`SI_SDR_CAP_DB`].
pub fn si_sdr(estimate: &Waveform, reference: &Waveform) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::LengthMismatch(format!(
            "si_sdr: estimate has {} samples, reference {}",
            estimate.len(),
            reference.len()
        )));
    }
    let ref_energy = reference.energy();
    if ref_energy <= 0.0 {
        return Err(Error::SilentSource("si_sdr: reference has zero energy".into()));
    }
    let dot: f64 = estimate
        .samples()
        .iter()
        .zip(reference.samples())
        .map(|(e, r)| e * r)
        .sum();
    let scale = dot / ref_energy;
    let target_energy = scale * scale * ref_energy;
    let error_energy: f64 = estimate
        .samples()
        .iter()
        .zip(reference.samples())
        .map(|(e, r)| {
            let d = e - scale * r;
            d * d
        })
        .sum();
    if error_energy < 1e-30 * target_energy {
        return Ok(f64::INFINITY);
    }
    if target_energy == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(10.0 * (target_energy / error_energy).log10())
}

/// SI-SDR improvement over the unprocessed mixture, in dB.
pub fn si_sdri(estimate: &Waveform, reference: &Waveform, mixture: &Waveform) -> Result<f64> {
    Ok(si_sdr(estimate, reference)? - si_sdr(mixture, reference)?)
}

/// Magnitude-weighted phase error: sum over units of
/// `|S| * (1 - cos(phase_est - phase_ref)) / 2`.
pub fn phase_weighted_error(
    mag_ref: &MagSpec,
    phase_est: &PhaseSpec,
    phase_ref: &PhaseSpec,
) -> Result<f64> {
    ensure_same_shape("phase_weighted_error", mag_ref.data().dim(), phase_est.data().dim())?;
    ensure_same_shape("phase_weighted_error", mag_ref.data().dim(), phase_ref.data().dim())?;
    ensure_same_config("phase_weighted_error", mag_ref.config(), phase_est.config())?;
    ensure_same_config("phase_weighted_error", mag_ref.config(), phase_ref.config())?;
    let mut total = 0.0;
    for (idx, &w) in mag_ref.data().indexed_iter() {
        let d = phase_est.data()[idx] - phase_ref.data()[idx];
        total += w * (1.0 - d.cos()) / 2.0;
    }
    Ok(total)
}

/// Sum of absolute magnitude differences.
pub fn magnitude_l1(mag_est: &MagSpec, mag_ref: &MagSpec) -> Result<f64> {
    ensure_same_shape("magnitude_l1", mag_est.data().dim(), mag_ref.data().dim())?;
    ensure_same_config("magnitude_l1", mag_est.config(), mag_ref.config())?;
    Ok(mag_est
        .data()
        .iter()
        .zip(mag_ref.data())
        .map(|(a, b)| (a - b).abs())
        .sum())
}

fn cap_db(v: f64) -> f64 {
    if v.is_nan() {
        SI_SDR_CAP_DB
    } else {
        v.clamp(-SI_SDR_CAP_DB, SI_SDR_CAP_DB)
    }
}

/// Metrics for one source within one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMetrics {
    pub si_sdr_db: f64,
    pub si_sdri_db: f64,
    /// True when the raw SI-SDR (or its improvement) hit the sentinel cap;
    /// aggregates skip such values.
    pub si_sdr_capped: bool,
    pub phase_error: f64,
    pub gd_error: f64,
    pub magnitude_l1: f64,
}

impl SourceMetrics {
    /// Build from raw metric values, applying the sentinel cap.
    pub fn from_raw(
        si_sdr_db: f64,
        si_sdri_db: f64,
        phase_error: f64,
        gd_error: f64,
        magnitude_l1: f64,
    ) -> Self {
        let capped = !si_sdr_db.is_finite()
            || si_sdr_db.abs() >= SI_SDR_CAP_DB
            || !si_sdri_db.is_finite()
            || si_sdri_db.abs() >= SI_SDR_CAP_DB;
        SourceMetrics {
            si_sdr_db: cap_db(si_sdr_db),
            si_sdri_db: cap_db(si_sdri_db),
            si_sdr_capped: capped,
            phase_error,
            gd_error,
            magnitude_l1,
        }
    }
}

/// One (scene, method) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub scene_id: String,
    pub method: String,
    pub per_source: Vec<SourceMetrics>,
    /// Mixture-consistency error energy per iteration (iterative methods).
    pub misi_residuals: Vec<f64>,
    /// Set when the method consulted ground truth beyond what an estimator
    /// could provide (diagnostic ceilings).
    pub cheating_oracle: bool,
    /// Frames whose sign decoding hit an exactly-tied decision.
    pub viterbi_tie_frames: usize,
}

/// A scene that failed to process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFailure {
    pub scene_id: String,
    pub method: String,
    pub error: String,
}

/// Per-method aggregate over all records of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: String,
    pub records: usize,
    /// Source values included in the means/medians.
    pub values: usize,
    /// Source values excluded because they were capped.
    pub capped_excluded: usize,
    pub mean_si_sdr_db: f64,
    pub median_si_sdr_db: f64,
    pub mean_si_sdri_db: f64,
    pub median_si_sdri_db: f64,
}

/// A full benchmark report: resolved configuration, per-utterance records,
/// failures, and per-method aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub config: serde_json::Value,
    pub records: Vec<UtteranceRecord>,
    pub failures: Vec<SceneFailure>,
    pub aggregates: Vec<MethodAggregate>,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0,
    }
}

impl EvalReport {
    pub fn new(config: serde_json::Value) -> Self {
        EvalReport {
            schema: REPORT_SCHEMA_VERSION,
            config,
            records: Vec::new(),
            failures: Vec::new(),
            aggregates: Vec::new(),
        }
    }

    pub fn push_record(&mut self, record: UtteranceRecord) {
        self.records.push(record);
    }

    pub fn push_failure(&mut self, failure: SceneFailure) {
        self.failures.push(failure);
    }

    /// Sort records and failures and recompute the aggregates. Output is a
    /// pure function of the stored records, independent of insertion order.
    pub fn finalize(&mut self) {
        self.records
            .sort_by(|a, b| (&a.scene_id, &a.method).cmp(&(&b.scene_id, &b.method)));
        self.failures
            .sort_by(|a, b| (&a.scene_id, &a.method).cmp(&(&b.scene_id, &b.method)));
        self.aggregates = Self::compute_aggregates(&self.records);
    }

    /// Merge two reports; records from both are kept and aggregates are
    /// recomputed. Associative and order-independent after [`finalize`].
    ///
    /// [`finalize`]: EvalReport::finalize
    pub fn merge(mut self, other: EvalReport) -> EvalReport {
        self.records.extend(other.records);
        self.failures.extend(other.failures);
        self.finalize();
        self
    }

    pub fn compute_aggregates(records: &[UtteranceRecord]) -> Vec<MethodAggregate> {
        let mut methods: Vec<&str> = records.iter().map(|r| r.method.as_str()).collect();
        methods.sort_unstable();
        methods.dedup();

        methods
            .into_iter()
            .map(|method| {
                let mut sdr = Vec::new();
                let mut sdri = Vec::new();
                let mut capped = 0usize;
                let mut count = 0usize;
                for r in records.iter().filter(|r| r.method == method) {
                    count += 1;
                    for s in &r.per_source {
                        if s.si_sdr_capped {
                            capped += 1;
                        } else {
                            sdr.push(s.si_sdr_db);
                            sdri.push(s.si_sdri_db);
                        }
                    }
                }
                let mean_si_sdr_db = mean(&sdr);
                let mean_si_sdri_db = mean(&sdri);
                sdr.sort_by(f64::total_cmp);
                sdri.sort_by(f64::total_cmp);
                MethodAggregate {
                    method: method.to_string(),
                    records: count,
                    values: sdr.len(),
                    capped_excluded: capped,
                    mean_si_sdr_db,
                    median_si_sdr_db: median(&sdr),
                    mean_si_sdri_db,
                    median_si_sdri_db: median(&sdri),
                }
            })
            .collect()
    }

    /// True when the stored aggregates equal a fresh recomputation.
    pub fn aggregates_consistent(&self) -> bool {
        self.aggregates == Self::compute_aggregates(&self.records)
    }

    /// Deterministic pretty-printed JSON (trailing newline included).
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wave(samples: Vec<f64>) -> Waveform {
        Waveform::new(samples, 8000).unwrap()
    }

    fn random_wave(len: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        wave((0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn identical_signals_hit_the_cap() {
        let x = random_wave(1000, 1);
        assert_eq!(si_sdr(&x, &x).unwrap(), f64::INFINITY);
        let scaled = wave(x.samples().iter().map(|v| v * 2.0).collect());
        assert_eq!(si_sdr(&scaled, &x).unwrap(), f64::INFINITY);
    }

    #[test]
    fn orthogonal_noise_at_one_tenth_energy_gives_ten_db() {
        let reference = random_wave(4000, 2);
        let mut noise: Vec<f64> = random_wave(4000, 3).samples().to_vec();
        // orthogonalize against the reference
        let dot: f64 = noise.iter().zip(reference.samples()).map(|(n, r)| n * r).sum();
        let scale = dot / reference.energy();
        for (n, r) in noise.iter_mut().zip(reference.samples()) {
            *n -= scale * r;
        }
        let noise_energy: f64 = noise.iter().map(|v| v * v).sum();
        let target = (0.1 * reference.energy() / noise_energy).sqrt();
        let estimate = wave(
            reference
                .samples()
                .iter()
                .zip(&noise)
                .map(|(r, n)| r + target * n)
                .collect(),
        );
        let got = si_sdr(&estimate, &reference).unwrap();
        assert!((got - 10.0).abs() < 1e-9, "got {got}");
    }

    #[test]
    fn scale_invariance() {
        let reference = random_wave(2000, 4);
        let estimate = wave(
            reference
                .samples()
                .iter()
                .enumerate()
                .map(|(i, r)| r + 0.01 * ((i as f64) * 0.1).sin())
                .collect(),
        );
        let base = si_sdr(&estimate, &reference).unwrap();
        for alpha in [0.1, 3.0, -2.0] {
            let scaled = wave(estimate.samples().iter().map(|v| v * alpha).collect());
            let got = si_sdr(&scaled, &reference).unwrap();
            assert!((got - base).abs() < 1e-9, "alpha {alpha}: {got} vs {base}");
        }
    }

    #[test]
    fn si_sdr_rejects_zero_reference_and_length_mismatch() {
        let x = random_wave(100, 5);
        let zero = wave(vec![0.0; 100]);
        assert!(si_sdr(&x, &zero).is_err());
        let short = random_wave(50, 6);
        assert!(si_sdr(&short, &x).is_err());
    }

    #[test]
    fn improvement_of_the_mixture_itself_is_zero() {
        let reference = random_wave(500, 7);
        let mixture = wave(
            reference
                .samples()
                .iter()
                .enumerate()
                .map(|(i, r)| r + 0.3 * ((i as f64) * 0.01).cos())
                .collect(),
        );
        let got = si_sdri(&mixture, &reference, &mixture).unwrap();
        assert_eq!(got, 0.0);
        assert_eq!(si_sdri(&reference, &reference, &mixture).unwrap(), f64::INFINITY);
    }

    #[test]
    fn phase_error_examples() {
        use crate::spectral::StftConfig;
        use ndarray::Array2;
        let config = StftConfig::new(8000, 4, 2, 4).unwrap();
        let mag = MagSpec::new(Array2::from_elem((1, 3), 0.25), config).unwrap();
        let phase = PhaseSpec::new(Array2::zeros((1, 3)), config).unwrap();
        assert_eq!(phase_weighted_error(&mag, &phase, &phase).unwrap(), 0.0);

        let mut off = Array2::zeros((1, 3));
        off[(0, 1)] = std::f64::consts::PI;
        let est = PhaseSpec::new(off, config).unwrap();
        let e = phase_weighted_error(&mag, &est, &phase).unwrap();
        assert!((e - 0.25).abs() < 1e-12);
    }

    #[test]
    fn magnitude_l1_examples() {
        use crate::spectral::StftConfig;
        use ndarray::Array2;
        let config = StftConfig::new(8000, 4, 2, 4).unwrap();
        let a = MagSpec::new(Array2::from_elem((2, 3), 1.0), config).unwrap();
        let b = MagSpec::new(Array2::from_elem((2, 3), 2.0), config).unwrap();
        assert_eq!(magnitude_l1(&a, &a).unwrap(), 0.0);
        assert_eq!(magnitude_l1(&b, &a).unwrap(), 6.0);
        assert_eq!(magnitude_l1(&a, &b).unwrap(), 6.0);
    }

    fn record(scene: &str, method: &str, sdr: f64, capped: bool) -> UtteranceRecord {
        UtteranceRecord {
            scene_id: scene.into(),
            method: method.into(),
            per_source: vec![SourceMetrics {
                si_sdr_db: sdr,
                si_sdri_db: sdr / 2.0,
                si_sdr_capped: capped,
                phase_error: 0.0,
                gd_error: 0.0,
                magnitude_l1: 0.0,
            }],
            misi_residuals: vec![],
            cheating_oracle: false,
            viterbi_tie_frames: 0,
        }
    }

    #[test]
    fn aggregates_exclude_capped_values_and_count_them() {
        let mut report = EvalReport::new(serde_json::json!({}));
        report.push_record(record("a", "m", 10.0, false));
        report.push_record(record("b", "m", 20.0, false));
        report.push_record(record("c", "m", SI_SDR_CAP_DB, true));
        report.finalize();
        assert_eq!(report.aggregates.len(), 1);
        let agg = &report.aggregates[0];
        assert_eq!(agg.values, 2);
        assert_eq!(agg.capped_excluded, 1);
        assert!((agg.mean_si_sdr_db - 15.0).abs() < 1e-12);
        assert!((agg.median_si_sdr_db - 15.0).abs() < 1e-12);
        assert!(report.aggregates_consistent());
    }

    #[test]
    fn merge_is_order_independent() {
        let mut a = EvalReport::new(serde_json::json!({"x": 1}));
        a.push_record(record("b", "m", 5.0, false));
        a.finalize();
        let mut b = EvalReport::new(serde_json::json!({"x": 1}));
        b.push_record(record("a", "m", 7.0, false));
        b.finalize();
        let ab = a.clone().merge(b.clone());
        let ba = b.merge(a);
        assert_eq!(ab.records, ba.records);
        assert_eq!(ab.aggregates, ba.aggregates);
        assert_eq!(ab.to_json_string(), {
            let mut other = ba.clone();
            other.config = serde_json::json!({"x": 1});
            other.to_json_string()
        });
    }

    #[test]
    fn from_raw_caps_infinities() {
        let m = SourceMetrics::from_raw(f64::INFINITY, f64::INFINITY, 0.0, 0.0, 0.0);
        assert_eq!(m.si_sdr_db, SI_SDR_CAP_DB);
        assert_eq!(m.si_sdri_db, SI_SDR_CAP_DB);
        assert!(m.si_sdr_capped);
        let ok = SourceMetrics::from_raw(12.0, 3.0, 0.0, 0.0, 0.0);
        assert!(!ok.si_sdr_capped);
    }

    #[test]
    fn report_json_round_trips() {
        let mut report = EvalReport::new(serde_json::json!({"seed": 7}));
        report.push_record(record("s", "m", 9.0, false));
        report.push_failure(SceneFailure {
            scene_id: "t".into(),
            method: "m".into(),
            error: "boom".into(),
        });
        report.finalize();
        let text = report.to_json_string();
        let back: EvalReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }
}

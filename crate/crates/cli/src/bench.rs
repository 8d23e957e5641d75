//! Benchmark sweeps: run a method x estimator grid over a scene set and
//! aggregate the results into a deterministic report.

use std::path::Path;

use rayon::prelude::*;
use serde_json::json;
use trigphase::metrics::{EvalReport, SceneFailure};
use trigphase::scenes::{realize_scene, ManifestEntry, MixtureScene};

use crate::config::{Estimator, GdSource, Method, RunConfig, StartPhase};
use crate::pipeline::run_scene;
use crate::{CliError, CliResult};

/// The grid a benchmark explores.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub methods: Vec<Method>,
    pub estimators: Vec<Estimator>,
    pub gd_sources: Vec<GdSource>,
    pub start_phases: Vec<StartPhase>,
}

impl SweepSpec {
    pub fn single(base: RunConfig) -> Self {
        SweepSpec {
            methods: vec![base.method],
            estimators: vec![base.estimator],
            gd_sources: vec![base.gd_source],
            start_phases: vec![base.start_phase],
            base,
        }
    }
}

/// Expand the grid into concrete run configurations, skipping dimensions a
/// method does not consult (so no duplicate work or duplicate labels).
pub fn expand_combos(spec: &SweepSpec) -> Vec<RunConfig> {
    let mut combos = Vec::new();
    for &method in &spec.methods {
        for &estimator in &spec.estimators {
            let starts: &[StartPhase] = if method == Method::Misi {
                &spec.start_phases
            } else {
                &[StartPhase::Mixture]
            };
            for &start_phase in starts {
                let probe = RunConfig { method, estimator, start_phase, ..spec.base.clone() };
                let gds: &[GdSource] =
                    if probe.uses_gd() { &spec.gd_sources } else { &[GdSource::Oracle] };
                for &gd_source in gds {
                    combos.push(RunConfig { gd_source, ..probe.clone() });
                }
            }
        }
    }
    combos
}

/// Resolved configuration embedded into every report for auditability.
pub fn config_json(spec: &SweepSpec, scenes: &[ManifestEntry], scene_source: &str) -> serde_json::Value {
    json!({
        "stft": spec.base.stft,
        "methods": spec.methods.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
        "estimators": spec.estimators.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        "gd_sources": spec.gd_sources.iter().map(|g| g.to_string()).collect::<Vec<_>>(),
        "start_phases": spec.start_phases.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "misi_k": spec.base.misi_k,
        "seed": spec.base.seed,
        "scene_source": scene_source,
        "scene_count": scenes.len(),
    })
}

/// Run every combo over every scene. Failures are recorded per
/// (scene, combo) and do not abort the sweep.
pub fn run_bench(
    entries: &[ManifestEntry],
    spec: &SweepSpec,
    jobs: usize,
    config: serde_json::Value,
) -> CliResult<EvalReport> {
    let combos = expand_combos(spec);
    let mut report = EvalReport::new(config);

    // realize scenes up front so a bad manifest entry fails once, not per
    // combo
    let mut scenes: Vec<MixtureScene> = Vec::with_capacity(entries.len());
    for entry in entries {
        match realize_scene(entry, spec.base.stft.sample_rate_hz) {
            Ok(scene) => scenes.push(scene),
            Err(e) => report.push_failure(SceneFailure {
                scene_id: entry.id.clone(),
                method: "(scene)".into(),
                error: e.to_string(),
            }),
        }
    }

    let work: Vec<(&MixtureScene, &RunConfig)> = scenes
        .iter()
        .flat_map(|s| combos.iter().map(move |c| (s, c)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<trigphase::metrics::UtteranceRecord, SceneFailure>> =
        pool.install(|| {
            work.par_iter()
                .map(|(scene, cfg)| match run_scene(scene, cfg) {
                    Ok(run) => Ok(run.record),
                    Err(e) => Err(SceneFailure {
                        scene_id: scene.id().to_string(),
                        method: cfg.method_label(),
                        error: e.to_string(),
                    }),
                })
                .collect()
        });

    for outcome in outcomes {
        match outcome {
            Ok(record) => report.push_record(record),
            Err(failure) => report.push_failure(failure),
        }
    }
    report.finalize();
    Ok(report)
}

/// Flat per-source CSV projection of a report.
pub fn write_csv(report: &EvalReport, path: &Path) -> CliResult<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    writer
        .write_record([
            "scene_id",
            "method",
            "source",
            "si_sdr_db",
            "si_sdri_db",
            "si_sdr_capped",
            "phase_error",
            "gd_error",
            "magnitude_l1",
        ])
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    for record in &report.records {
        for (c, s) in record.per_source.iter().enumerate() {
            writer
                .write_record([
                    record.scene_id.as_str(),
                    record.method.as_str(),
                    &c.to_string(),
                    &format!("{}", s.si_sdr_db),
                    &format!("{}", s.si_sdri_db),
                    &format!("{}", s.si_sdr_capped),
                    &format!("{}", s.phase_error),
                    &format!("{}", s.gd_error),
                    &format!("{}", s.magnitude_l1),
                ])
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
    }
    writer.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

/// Mean SI-SDRi of the aggregate with the given method label.
pub fn mean_si_sdri(report: &EvalReport, label: &str) -> Option<f64> {
    report
        .aggregates
        .iter()
        .find(|a| a.method == label)
        .map(|a| a.mean_si_sdri_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use trigphase::scenes::synthetic_manifest;

    #[test]
    fn combo_expansion_prunes_irrelevant_dimensions() {
        let spec = SweepSpec {
            base: RunConfig::default(),
            methods: vec![Method::MixturePhase, Method::Misi, Method::GdViterbi],
            estimators: vec![Estimator::Oracle, Estimator::IrmApplied],
            gd_sources: vec![GdSource::Oracle, GdSource::Perturbed { spread_rad: 0.4 }],
            start_phases: vec![StartPhase::Mixture, StartPhase::GdViterbi],
        };
        let combos = expand_combos(&spec);
        // mixture_phase: 2 estimators
        // misi: 2 est x (mixture start + gd start x 2 gd) = 2 x 3
        // gd_viterbi: 2 est x 2 gd = 4
        assert_eq!(combos.len(), 2 + 6 + 4);
        let labels: Vec<String> = combos.iter().map(|c| c.method_label()).collect();
        let mut dedup = labels.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), labels.len(), "duplicate combos: {labels:?}");
    }

    #[test]
    fn one_method_one_scene_yields_one_record() {
        let entries = synthetic_manifest(1, 3);
        let spec = SweepSpec::single(RunConfig::default());
        let report =
            run_bench(&entries, &spec, 1, config_json(&spec, &entries, "test")).unwrap();
        assert_eq!(report.records.len(), 1);
        assert!(report.failures.is_empty());
        assert_eq!(report.aggregates.len(), 1);
        assert!(report.aggregates_consistent());
    }

    #[test]
    fn bench_reruns_are_identical_even_in_parallel() {
        let entries = synthetic_manifest(4, 9);
        let spec = SweepSpec {
            base: RunConfig { seed: 11, ..RunConfig::default() },
            methods: vec![Method::MixturePhase, Method::Misi],
            estimators: vec![Estimator::Oracle, Estimator::Perturbed { noise_db: 2.0 }],
            gd_sources: vec![GdSource::Oracle],
            start_phases: vec![StartPhase::Mixture],
        };
        let cfg = config_json(&spec, &entries, "test");
        let a = run_bench(&entries, &spec, 1, cfg.clone()).unwrap();
        let b = run_bench(&entries, &spec, 4, cfg).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());
    }
}

//! Subcommand implementations. Each returns the process exit code:
//! 0 for success, 1 when some scenes failed; invalid configuration or
//! manifests surface as [`CliError::Invalid`] (exit code 2).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trigphase::metrics::{EvalReport, SourceMetrics, UtteranceRecord};
use trigphase::scenes::{
    load_manifest, realize_scene, read_wav, write_wav, ManifestEntry, MixtureScene,
};
use trigphase::spectral::Waveform;

use crate::bench::{config_json, run_bench, write_csv, SweepSpec};
use crate::config::RunConfig;
use crate::pipeline::run_scene;
use crate::{CliError, CliResult};

/// Sidecar metadata written next to each mixed scene so later commands can
/// recover the id and seed.
#[derive(Debug, Serialize, Deserialize)]
pub struct SceneMeta {
    pub id: String,
    pub snr_db: f64,
    pub seed: u64,
}

/// Realize a manifest into per-scene WAV directories plus an index file
/// that is itself a valid manifest referencing the written sources.
pub fn cmd_mix(manifest_path: &Path, out_dir: &Path, sample_rate_hz: u32) -> CliResult<i32> {
    let entries = load_manifest(manifest_path).map_err(|e| CliError::Invalid(e.to_string()))?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut index = String::new();
    let mut failures = 0usize;
    for entry in &entries {
        match mix_one(entry, out_dir, sample_rate_hz) {
            Ok(line) => index.push_str(&line),
            Err(e) => {
                failures += 1;
                eprintln!("scene {}: {e}", entry.id);
            }
        }
    }
    fs::write(out_dir.join("index.txt"), index).map_err(|e| CliError::Runtime(e.to_string()))?;
    println!(
        "mixed {}/{} scenes into {}",
        entries.len() - failures,
        entries.len(),
        out_dir.display()
    );
    Ok(if failures > 0 { 1 } else { 0 })
}

fn mix_one(entry: &ManifestEntry, out_dir: &Path, sample_rate_hz: u32) -> CliResult<String> {
    let scene = realize_scene(entry, sample_rate_hz)?;
    let dir = out_dir.join(scene.id());
    fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_wav(dir.join("mixture.wav"), scene.mixture())?;
    for (c, source) in scene.sources().iter().enumerate() {
        write_wav(dir.join(format!("s{}.wav", c + 1)), source)?;
    }
    let meta = SceneMeta { id: scene.id().to_string(), snr_db: scene.snr_db(), seed: scene.seed() };
    fs::write(
        dir.join("scene.json"),
        serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n",
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(format!(
        "{}, {}, {}, {}, {}\n",
        scene.id(),
        dir.join("s1.wav").display(),
        dir.join("s2.wav").display(),
        scene.snr_db(),
        scene.seed()
    ))
}

/// Load a scene directory produced by `mix` (or assembled by hand).
///
/// The mixture is rebuilt as the exact sum of the source files so the
/// geometric constraint holds despite 16-bit quantization of the
/// individual WAVs.
pub fn load_scene_dir(dir: &Path, fallback_seed: u64) -> CliResult<MixtureScene> {
    if !dir.is_dir() {
        return Err(CliError::Invalid(format!("{}: not a directory", dir.display())));
    }
    let mut sources: Vec<Waveform> = Vec::new();
    for c in 1.. {
        let path = dir.join(format!("s{c}.wav"));
        if !path.exists() {
            break;
        }
        sources.push(read_wav(&path)?);
    }
    if sources.len() < 2 {
        return Err(CliError::Invalid(format!(
            "{}: found {} source WAVs; reconstruction methods need the ground-truth \
             sources (s1.wav, s2.wav, ...) to drive their oracle estimators",
            dir.display(),
            sources.len()
        )));
    }
    let meta: Option<SceneMeta> = fs::read_to_string(dir.join("scene.json"))
        .ok()
        .and_then(|text| serde_json::from_str(&text).ok());
    let id = meta
        .as_ref()
        .map(|m| m.id.clone())
        .or_else(|| dir.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "scene".to_string());
    let seed = meta.as_ref().map(|m| m.seed).unwrap_or(fallback_seed);
    Ok(MixtureScene::from_sources(id, sources, seed)
        .map_err(|e| CliError::Invalid(e.to_string()))?)
}

/// Reconstruct the sources of one scene directory and write the separated
/// WAVs plus a JSON record.
pub fn cmd_reconstruct(scene_dir: &Path, cfg: &RunConfig, out_dir: &Path) -> CliResult<i32> {
    let scene = load_scene_dir(scene_dir, cfg.seed)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::Runtime(e.to_string()))?;
    let run = match run_scene(&scene, cfg) {
        Ok(run) => run,
        Err(e) => {
            eprintln!("scene {}: {e}", scene.id());
            return Ok(1);
        }
    };
    for (c, wave) in run.waveforms.iter().enumerate() {
        write_wav(out_dir.join(format!("{}.est{}.wav", scene.id(), c + 1)), wave)?;
    }
    let record_path = out_dir.join(format!("{}.record.json", scene.id()));
    let payload = serde_json::json!({
        "schema": trigphase::metrics::REPORT_SCHEMA_VERSION,
        "config": cfg,
        "record": run.record,
    });
    fs::write(
        &record_path,
        serde_json::to_string_pretty(&payload).expect("record serializes") + "\n",
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    for (c, s) in run.record.per_source.iter().enumerate() {
        println!(
            "{} source {}: si_sdr {:.2} dB (improvement {:+.2} dB)",
            run.record.method,
            c + 1,
            s.si_sdr_db,
            s.si_sdri_db
        );
    }
    println!("wrote {}", record_path.display());
    Ok(0)
}

/// Scene input for `bench`: a manifest file or a generated synthetic set.
pub enum BenchScenes {
    Manifest(PathBuf),
    Synthetic(usize),
}

/// Run the sweep and write `report.json` and `report.csv` under `out_dir`.
pub fn cmd_bench(
    scenes: &BenchScenes,
    spec: &SweepSpec,
    jobs: usize,
    out_dir: &Path,
) -> CliResult<i32> {
    let (entries, source_label) = match scenes {
        BenchScenes::Manifest(path) => (
            load_manifest(path).map_err(|e| CliError::Invalid(e.to_string()))?,
            format!("manifest:{}", path.display()),
        ),
        BenchScenes::Synthetic(count) => (
            trigphase::scenes::synthetic_manifest(*count, spec.base.seed),
            format!("synthetic:{count}"),
        ),
    };
    let config = config_json(spec, &entries, &source_label);
    let report = run_bench(&entries, spec, jobs, config)?;

    fs::create_dir_all(out_dir).map_err(|e| CliError::Runtime(e.to_string()))?;
    let json_path = out_dir.join("report.json");
    fs::write(&json_path, report.to_json_string())
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    write_csv(&report, &out_dir.join("report.csv"))?;

    for agg in &report.aggregates {
        println!(
            "{:60} mean si_sdri {:+7.2} dB  (n={}, capped={})",
            agg.method, agg.mean_si_sdri_db, agg.values, agg.capped_excluded
        );
    }
    if !report.failures.is_empty() {
        eprintln!("{} scene failures (see {})", report.failures.len(), json_path.display());
        return Ok(1);
    }
    println!("wrote {}", json_path.display());
    Ok(0)
}

/// Evaluate externally produced estimates against reference sources.
pub fn cmd_eval(
    mixture: &Path,
    references: &[PathBuf],
    estimates: &[PathBuf],
    out: Option<&Path>,
) -> CliResult<i32> {
    if references.len() != estimates.len() || references.is_empty() {
        return Err(CliError::Invalid(format!(
            "need matching non-empty reference/estimate lists, got {} and {}",
            references.len(),
            estimates.len()
        )));
    }
    let mixture_wave = read_wav(mixture)?;
    let mut per_source = Vec::new();
    for (r, e) in references.iter().zip(estimates) {
        let reference = read_wav(r)?;
        let estimate = read_wav(e)?;
        let sdr = trigphase::metrics::si_sdr(&estimate, &reference)?;
        let sdri = trigphase::metrics::si_sdri(&estimate, &reference, &mixture_wave)?;
        per_source.push(SourceMetrics::from_raw(sdr, sdri, 0.0, 0.0, 0.0));
    }
    let record = UtteranceRecord {
        scene_id: mixture.display().to_string(),
        method: "external".into(),
        per_source,
        misi_residuals: vec![],
        cheating_oracle: false,
        viterbi_tie_frames: 0,
    };
    let mut report = EvalReport::new(serde_json::json!({
        "mixture": mixture.display().to_string(),
        "references": references.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "estimates": estimates.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    }));
    report.push_record(record);
    report.finalize();
    let text = report.to_json_string();
    match out {
        Some(path) => {
            fs::write(path, &text).map_err(|e| CliError::Runtime(e.to_string()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(0)
}

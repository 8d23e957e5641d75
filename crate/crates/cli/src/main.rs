//! `trigphase` — phase reconstruction benchmark driver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trigphase_cli::bench::SweepSpec;
use trigphase_cli::commands::{cmd_bench, cmd_eval, cmd_mix, cmd_reconstruct, BenchScenes};
use trigphase_cli::config::{parse_list, FileConfig, RunConfig};
use trigphase_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "trigphase",
    about = "STFT-domain phase reconstruction for source separation: \
             mixing, reconstruction, and benchmark sweeps",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command that builds a RunConfig.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// JSON config file; explicit flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reconstruction method (bench accepts a comma-separated list)
    #[arg(long)]
    method: Option<String>,
    /// Iteration count for the iterative method
    #[arg(long)]
    misi_k: Option<usize>,
    /// Starting phases for the iterative method (bench: comma-separated)
    #[arg(long)]
    start_phase: Option<String>,
    /// Magnitude estimator (bench: comma-separated)
    #[arg(long)]
    estimator: Option<String>,
    /// Group-delay source (bench: comma-separated)
    #[arg(long)]
    gd: Option<String>,
    /// Base seed; falls back to $TRIGPHASE_SEED, then 0
    #[arg(long)]
    seed: Option<u64>,
    /// Sample rate in Hz
    #[arg(long)]
    sample_rate: Option<u32>,
    /// Analysis window length in samples
    #[arg(long)]
    win_len: Option<usize>,
    /// Hop size in samples
    #[arg(long)]
    hop: Option<usize>,
    /// DFT size in samples
    #[arg(long)]
    fft_size: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Realize a scene manifest into mixture and source WAV files
    Mix {
        /// Manifest: one scene per line, `id, source1, source2, snr_db, seed`
        manifest: PathBuf,
        /// Output directory
        #[arg(long, default_value = "scenes")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Reconstruct the sources of one mixed scene directory
    Reconstruct {
        /// Scene directory containing mixture.wav and s1.wav, s2.wav, ...
        scene: PathBuf,
        /// Output directory for separated WAVs and the JSON record
        #[arg(long, default_value = "reconstructed")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run a method x estimator sweep and write a JSON/CSV report
    Bench {
        /// Scene manifest to benchmark
        #[arg(long, conflicts_with = "synthetic")]
        manifest: Option<PathBuf>,
        /// Use a generated synthetic set of this many scenes instead
        #[arg(long)]
        synthetic: Option<usize>,
        /// Parallel scene jobs
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory for report.json and report.csv
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate externally produced estimates against references
    Eval {
        /// Mixture WAV (for the improvement baseline)
        #[arg(long)]
        mixture: PathBuf,
        /// Reference source WAVs, in source order
        #[arg(long = "reference", required = true)]
        references: Vec<PathBuf>,
        /// Estimated source WAVs, matching the reference order
        #[arg(long = "estimate", required = true)]
        estimates: Vec<PathBuf>,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var("TRIGPHASE_SEED") {
        Ok(v) => v
            .parse::<u64>()
            .map(Some)
            .map_err(|_| CliError::Invalid(format!("TRIGPHASE_SEED: not an integer: {v:?}"))),
        Err(_) => Ok(None),
    }
}

/// defaults <- config file <- explicit flags
fn resolve_config(args: &ConfigArgs) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        FileConfig::load(path)?.apply(&mut cfg)?;
    }
    let mut stft = cfg.stft;
    if let Some(v) = args.sample_rate {
        stft.sample_rate_hz = v;
    }
    if let Some(v) = args.win_len {
        stft.win_len = v;
    }
    if let Some(v) = args.hop {
        stft.hop = v;
    }
    if let Some(v) = args.fft_size {
        stft.fft_size = v;
    }
    stft.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
    cfg.stft = stft;
    if let Some(v) = &args.method {
        cfg.method = v.parse().map_err(CliError::Invalid)?;
    }
    if let Some(v) = args.misi_k {
        cfg.misi_k = v;
    }
    if let Some(v) = &args.start_phase {
        cfg.start_phase = v.parse().map_err(CliError::Invalid)?;
    }
    if let Some(v) = &args.estimator {
        cfg.estimator = v.parse().map_err(CliError::Invalid)?;
    }
    if let Some(v) = &args.gd {
        cfg.gd_source = v.parse().map_err(CliError::Invalid)?;
    }
    cfg.seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(cfg.seed),
    };
    Ok(cfg)
}

/// Like [`resolve_config`] but the method/estimator/gd/start flags may be
/// comma-separated lists; every other flag stays scalar.
fn resolve_sweep(args: &ConfigArgs) -> CliResult<SweepSpec> {
    let scalar = ConfigArgs {
        config: args.config.clone(),
        method: None,
        misi_k: args.misi_k,
        start_phase: None,
        estimator: None,
        gd: None,
        seed: args.seed,
        sample_rate: args.sample_rate,
        win_len: args.win_len,
        hop: args.hop,
        fft_size: args.fft_size,
    };
    let base = resolve_config(&scalar)?;
    let mut spec = SweepSpec::single(base);
    if let Some(v) = &args.method {
        spec.methods = parse_list(v, "method")?;
    }
    if let Some(v) = &args.estimator {
        spec.estimators = parse_list(v, "estimator")?;
    }
    if let Some(v) = &args.gd {
        spec.gd_sources = parse_list(v, "gd")?;
    }
    if let Some(v) = &args.start_phase {
        spec.start_phases = parse_list(v, "start_phase")?;
    }
    Ok(spec)
}

fn run(cli: Cli) -> CliResult<i32> {
    match &cli.command {
        Command::Mix { manifest, out, config } => {
            let cfg = resolve_config(config)?;
            cmd_mix(manifest, out, cfg.stft.sample_rate_hz)
        }
        Command::Reconstruct { scene, out, config } => {
            let cfg = resolve_config(config)?;
            cmd_reconstruct(scene, &cfg, out)
        }
        Command::Bench { manifest, synthetic, jobs, out, config } => {
            let spec = resolve_sweep(config)?;
            let scenes = match (manifest, synthetic) {
                (Some(path), None) => BenchScenes::Manifest(path.clone()),
                (None, Some(count)) => BenchScenes::Synthetic(*count),
                (None, None) => {
                    return Err(CliError::Invalid(
                        "bench needs --manifest <path> or --synthetic <count>".into(),
                    ))
                }
                (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
            };
            cmd_bench(&scenes, &spec, *jobs, out)
        }
        Command::Eval { mixture, references, estimates, out } => {
            cmd_eval(mixture, references, estimates, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

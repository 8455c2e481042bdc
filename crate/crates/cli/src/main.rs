use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use estune_cli::commands;
use estune_cli::config::{ExperimentConfig, HePreset, RunBackend};

#[derive(Parser)]
#[command(
    name = "estune",
    about = "Privacy-preserving PID tuning via encrypted extremum seeking",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Experiment config (JSON). Mutually exclusive with --preset.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset: g1-paper | g2-paper | g3-paper.
    #[arg(long)]
    preset: Option<String>,
    /// Override the seed list.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Override the backend: plaintext | reference | rlwe.
    #[arg(long)]
    backend: Option<RunBackend>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), None) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => anyhow::bail!("pass --config FILE or --preset NAME"),
            (Some(_), Some(_)) => unreachable!("clap enforces exclusivity"),
        };
        if !self.seed.is_empty() {
            cfg.seeds = self.seed.clone();
        }
        if let Some(b) = self.backend {
            cfg.backend = b;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a tuning experiment for each configured seed.
    Tune {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also record protocol transcripts (encrypted backends only).
        #[arg(long)]
        transcript: bool,
    },
    /// All three benchmark plants, noise-free and noisy, five seeds each.
    BenchPaper {
        #[arg(long, default_value = "out/bench-paper")]
        out: PathBuf,
        #[arg(long, default_value = "plaintext")]
        backend: RunBackend,
    },
    /// Rerun a tuning with the sample horizon N reduced by percentages.
    NSweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated percentages, e.g. 50,70.
        #[arg(long, value_delimiter = ',', required = true)]
        reductions: Vec<f64>,
    },
    /// Measure encrypt/decrypt/per-sample latency on the RLWE backend.
    Timing {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Generate key material and write it with owner-only permissions.
    Keygen {
        /// HE preset: paper | test.
        #[arg(long, default_value = "paper")]
        preset: HePreset,
        /// reference | rlwe.
        #[arg(long, default_value = "rlwe")]
        backend: RunBackend,
        #[arg(long)]
        out: PathBuf,
        /// Deterministic key generation (default: OS entropy).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-execute the cloud role against a transcript and verify it.
    Replay {
        transcript: PathBuf,
        /// Key file (needed to rebuild the RLWE evaluation key).
        #[arg(long)]
        keys: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Tune { config, transcript } => {
            let cfg = config.resolve()?;
            let report = commands::cmd_tune(&cfg, transcript)?;
            println!(
                "{} runs: median cost reduction {:.1}%, all costs decreased: {}, report at {}",
                report.summary.runs,
                100.0 * report.summary.median_reduction,
                report.summary.all_costs_decreased,
                cfg.out_dir.join("report.json").display()
            );
        }
        Command::BenchPaper { out, backend } => {
            commands::cmd_bench_paper(&out, backend)?;
        }
        Command::NSweep { config, reductions } => {
            let cfg = config.resolve()?;
            commands::cmd_n_sweep(&cfg, &reductions)?;
        }
        Command::Timing { config } => {
            let mut cfg = match (&config.config, &config.preset) {
                (None, None) => {
                    // timing defaults to the shortest-horizon paper preset
                    let mut c = ExperimentConfig::preset("g2-paper")?;
                    c.backend = RunBackend::Rlwe;
                    c
                }
                _ => config.resolve()?,
            };
            if let Some(b) = config.backend {
                cfg.backend = b;
            }
            let out = config.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
            commands::cmd_timing(&cfg, Some(&out))?;
        }
        Command::Keygen {
            preset,
            backend,
            out,
            seed,
        } => {
            commands::cmd_keygen(preset, backend, &out, seed)?;
        }
        Command::Replay { transcript, keys } => {
            commands::cmd_replay(&transcript, keys.as_deref())?;
        }
    }
    Ok(())
}

//! `arlab`: train small feed-forward classifiers under interchangeable
//! attractive-repulsive losses, sweep the mixing weight, export latent spaces,
//! and measure their clusterability.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::SplitName;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "arlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Seed list override, e.g. --seed 1,2,3.
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-field overrides as dotted.path=json, e.g. --set loss.lambda=0.2
    /// (flags win over file content).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> arlab::Result<RunConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(seeds) = &self.seed {
            let list = seeds
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(",");
            overrides.push(format!("seeds=[{list}]"));
        }
        if let Some(out) = &self.out {
            overrides.push(format!("out_dir={}", serde_json::to_string(out)?));
        }
        RunConfig::load(&self.config, &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one run per seed and aggregate test accuracy.
    Train(ConfigArgs),
    /// Train across a lambda grid and report the best lambda.
    SweepLambda {
        #[command(flatten)]
        config: ConfigArgs,
        /// Explicit grid, e.g. --grid 0.1,0.5,0.9.
        #[arg(long, value_delimiter = ',', conflicts_with = "grid_points")]
        grid: Option<Vec<f64>>,
        /// Evenly spaced grid of this many points in (0, 1].
        #[arg(long, default_value_t = 20)]
        grid_points: usize,
    },
    /// Map a split through a trained checkpoint; write latent + PCA CSVs.
    ExportLatents {
        #[command(flatten)]
        config: ConfigArgs,
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitName,
        /// Dataset seed; defaults to the first configured seed.
        #[arg(long)]
        dataset_seed: Option<u64>,
    },
    /// Cluster an exported latent CSV and score it against its labels.
    Cluster {
        /// Latent CSV as written by export-latents.
        #[arg(long)]
        latents: PathBuf,
        /// Cluster count; defaults to the label count in the file.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run() -> arlab::Result<()> {
    match Cli::parse().command {
        Command::Train(args) => commands::cmd_train(&args.load()?),
        Command::SweepLambda {
            config,
            grid,
            grid_points,
        } => {
            let grid = grid.unwrap_or_else(|| commands::lambda_grid(grid_points));
            commands::cmd_sweep_lambda(&config.load()?, &grid)
        }
        Command::ExportLatents {
            config,
            checkpoint,
            split,
            dataset_seed,
        } => {
            let cfg = config.load()?;
            let out = config.out.clone();
            commands::cmd_export_latents(&cfg, &checkpoint, split, dataset_seed, out.as_deref())
        }
        Command::Cluster {
            latents,
            k,
            seed,
            out,
        } => commands::cmd_cluster(&latents, k, seed, &out),
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

//! The four pipelines behind the subcommands: train, sweep-lambda,
//! export-latents, and cluster.

use std::path::{Path, PathBuf};

use serde::Serialize;

use arlab::cluster::evaluate_latents;
use arlab::data::read_labeled_csv;
use arlab::linalg::{pca_project, Rng};
use arlab::network::{Checkpoint, NetworkState};
use arlab::optim::{latents, split_accuracy, train, TrainReport};
use arlab::{digest, Error, Result};

use crate::artifacts::{
    mean_and_sample_std, write_json, write_labeled_csv, write_sweep_csv, AggregateReport,
    ClusterArtifact, RunReport, SweepRow, SweepSummary,
};
use crate::config::RunConfig;

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn layer_sizes(config: &RunConfig, input_dim: usize) -> Vec<usize> {
    let mut sizes = vec![input_dim];
    sizes.extend(&config.network.hidden_sizes);
    sizes
}

/// Trains one (config, seed) pair. Dataset construction, weight init, and the
/// whole optimization draw from a single `Rng::new(seed)` stream.
fn run_one_seed(config: &RunConfig, seed: u64) -> Result<(TrainReport, f64)> {
    let ds = config.build_dataset(seed)?;
    let loss_cfg = config.loss.to_loss_config();
    loss_cfg.validate_for(ds.k)?;
    let mut rng = Rng::new(seed);
    let net = NetworkState::init(
        &layer_sizes(config, ds.x.cols()),
        config.network.negative_slope,
        config.network.dropout,
        &mut rng,
    );
    let report = train(&ds, net, &loss_cfg, &config.train.to_settings(), &mut rng)?;
    let test_accuracy = split_accuracy(
        &report.checkpoint.network,
        &report.checkpoint.output_weights,
        &loss_cfg,
        &ds,
        &ds.split.test,
    );
    Ok((report, test_accuracy))
}

/// Validates the whole pipeline cheaply (config, dataset, loss/class-count
/// compatibility) before any artifact is written.
fn preflight(config: &RunConfig) -> Result<()> {
    let seed = config.sorted_seeds()[0];
    let ds = config.build_dataset(seed)?;
    config.loss.to_loss_config().validate_for(ds.k)
}

/// One training run per seed; per-seed reports plus a mean/std aggregate.
pub fn cmd_train(config: &RunConfig) -> Result<()> {
    preflight(config)?;
    let seeds = config.sorted_seeds();

    let mut runs: Vec<(u64, TrainReport, f64)> = Vec::new();
    for &seed in &seeds {
        let (report, test_accuracy) = run_one_seed(config, seed)?;
        eprintln!(
            "seed {seed}: best val {:.4} (epoch {:?}), test {:.4}",
            report.best_val_accuracy, report.best_epoch, test_accuracy
        );
        runs.push((seed, report, test_accuracy));
    }

    ensure_out_dir(&config.out_dir)?;
    let mut accuracies = Vec::new();
    for (seed, report, test_accuracy) in &runs {
        report
            .checkpoint
            .save(&config.out_dir.join(format!("checkpoint_seed{seed}.json")))?;
        let artifact = RunReport {
            config: config.clone(),
            seed: *seed,
            test_accuracy: *test_accuracy,
            report: report.clone(),
        };
        write_json(
            &config.out_dir.join(format!("train_seed{seed}.json")),
            &artifact,
        )?;
        accuracies.push(*test_accuracy);
    }
    let (mean, std) = mean_and_sample_std(&accuracies);
    let aggregate = AggregateReport {
        config: config.clone(),
        config_digest: digest(serde_json::to_string(config)?.as_bytes()),
        seeds,
        test_accuracies: accuracies,
        mean_test_accuracy: mean,
        std_test_accuracy: std,
    };
    write_json(&config.out_dir.join("train_aggregate.json"), &aggregate)?;
    println!("test accuracy {mean:.4} +/- {std:.4} over {} seed(s)", aggregate.seeds.len());
    Ok(())
}

/// Evenly spaced lambda grid `(0, 1]`: `i / points` for `i = 1..=points`.
pub fn lambda_grid(points: usize) -> Vec<f64> {
    (1..=points).map(|i| i as f64 / points as f64).collect()
}

/// One training run per (lambda, seed); emits the lambda-vs-accuracy CSV and a
/// summary naming the argmax lambda.
pub fn cmd_sweep_lambda(config: &RunConfig, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    if grid.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
        return Err(Error::Config("lambda grid must lie in (0, 1]".into()));
    }
    preflight(config)?;

    let seeds = config.sorted_seeds();
    let mut rows: Vec<SweepRow> = Vec::new();
    for &lambda in &grid {
        let mut lambda_config = config.clone();
        lambda_config.loss.lambda = lambda;
        for &seed in &seeds {
            let (report, _) = run_one_seed(&lambda_config, seed)?;
            eprintln!(
                "lambda {lambda:.3} seed {seed}: best val {:.4}",
                report.best_val_accuracy
            );
            rows.push(SweepRow {
                lambda,
                seed,
                best_val_accuracy: report.best_val_accuracy,
            });
        }
    }

    let mean_by_lambda: Vec<f64> = grid
        .iter()
        .map(|&l| {
            let accs: Vec<f64> = rows
                .iter()
                .filter(|r| r.lambda == l)
                .map(|r| r.best_val_accuracy)
                .collect();
            mean_and_sample_std(&accs).0
        })
        .collect();
    // Argmax over the grid; ties keep the lowest lambda.
    let mut best_idx = 0;
    for (i, &m) in mean_by_lambda.iter().enumerate() {
        if m > mean_by_lambda[best_idx] {
            best_idx = i;
        }
    }

    ensure_out_dir(&config.out_dir)?;
    let config_json = serde_json::to_string(config)?;
    write_sweep_csv(&config.out_dir.join("sweep_lambda.csv"), &config_json, &rows)?;
    let summary = SweepSummary {
        config: config.clone(),
        grid: grid.clone(),
        rows,
        mean_by_lambda: mean_by_lambda.clone(),
        best_lambda: grid[best_idx],
        best_mean_val_accuracy: mean_by_lambda[best_idx],
    };
    write_json(&config.out_dir.join("sweep_summary.json"), &summary)?;
    println!(
        "best lambda {:.3} with mean val accuracy {:.4}",
        summary.best_lambda, summary.best_mean_val_accuracy
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Serialize)]
struct ExportConfig {
    config: RunConfig,
    checkpoint: PathBuf,
    split: SplitName,
    seed: u64,
}

/// Maps one split through a checkpointed network and writes the latent CSV
/// plus its 2-component PCA projection for plotting.
pub fn cmd_export_latents(
    config: &RunConfig,
    checkpoint_path: &Path,
    split: SplitName,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<()> {
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let seed = seed.unwrap_or_else(|| config.sorted_seeds()[0]);
    let ds = config.build_dataset(seed)?;
    if checkpoint.network.input_dim() != ds.x.cols() {
        return Err(Error::Config(format!(
            "checkpoint expects {}-dimensional inputs but the dataset is {}-dimensional",
            checkpoint.network.input_dim(),
            ds.x.cols()
        )));
    }
    let indices = match split {
        SplitName::Train => &ds.split.train,
        SplitName::Validation => &ds.split.validation,
        SplitName::Test => &ds.split.test,
    };
    if indices.is_empty() {
        return Err(Error::Split(format!("{split:?} split is empty")));
    }

    let (latent, labels) = latents(&checkpoint.network, &ds, indices);
    let projection = pca_project(&latent, 2.min(latent.cols()))?;

    let out_dir = out_dir.unwrap_or(&config.out_dir);
    ensure_out_dir(out_dir)?;
    let echo = serde_json::to_string(&ExportConfig {
        config: config.clone(),
        checkpoint: checkpoint_path.to_path_buf(),
        split,
        seed,
    })?;
    let tag = match split {
        SplitName::Train => "train",
        SplitName::Validation => "validation",
        SplitName::Test => "test",
    };
    write_labeled_csv(
        &out_dir.join(format!("latents_{tag}.csv")),
        &echo,
        "f",
        &latent,
        &labels,
    )?;
    write_labeled_csv(
        &out_dir.join(format!("latents_{tag}_pca.csv")),
        &echo,
        "pc",
        &projection.projected,
        &labels,
    )?;
    println!(
        "exported {} x {} latents ({} PCA components)",
        latent.rows(),
        latent.cols(),
        projection.components.rows()
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct ClusterConfig {
    latents: PathBuf,
    k: usize,
    seed: u64,
}

/// Clusters a latent CSV with both algorithms and writes their reports.
pub fn cmd_cluster(latents_path: &Path, k: Option<usize>, seed: u64, out_dir: &Path) -> Result<()> {
    let (x, labels) = read_labeled_csv(latents_path, true)?;
    let k = k.unwrap_or_else(|| labels.iter().max().unwrap() + 1);
    if k < 2 {
        return Err(Error::Config(format!("need k >= 2 clusters, got {k}")));
    }
    let mut rng = Rng::new(seed);
    let (kmeans_report, gmm_report) = evaluate_latents(&x, &labels, k, &mut rng)?;

    ensure_out_dir(out_dir)?;
    let artifact = ClusterArtifact {
        config: ClusterConfig {
            latents: latents_path.to_path_buf(),
            k,
            seed,
        },
        kmeans: kmeans_report,
        gmm: gmm_report,
    };
    write_json(&out_dir.join("cluster_report.json"), &artifact)?;
    println!(
        "kmeans acc {:.4} ari {:.4} vm {:.4} sil {:.4} | gmm acc {:.4} ari {:.4} vm {:.4} sil {:.4}",
        artifact.kmeans.aligned_accuracy,
        artifact.kmeans.ari,
        artifact.kmeans.v_measure,
        artifact.kmeans.silhouette,
        artifact.gmm.aligned_accuracy,
        artifact.gmm.ari,
        artifact.gmm.v_measure,
        artifact.gmm.silhouette,
    );
    Ok(())
}

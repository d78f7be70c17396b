//! Output artifacts. JSON files embed the fully resolved config; CSV files
//! carry it as a leading `# config: {...}` comment line above the pinned
//! header row, so any artifact can be regenerated from its own content.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use arlab::cluster::ClusterReport;
use arlab::linalg::Matrix;
use arlab::optim::TrainReport;
use arlab::{format_f64, Error, Result};

use crate::config::RunConfig;

/// Per-seed training artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub seed: u64,
    /// Accuracy on the test split at the best-validation parameters.
    pub test_accuracy: f64,
    pub report: TrainReport,
}

/// Multi-seed aggregate: mean and sample standard deviation of the per-seed
/// test accuracies, matching the "mean +/- std over runs" convention.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateReport {
    pub config: RunConfig,
    pub config_digest: String,
    pub seeds: Vec<u64>,
    pub test_accuracies: Vec<f64>,
    pub mean_test_accuracy: f64,
    pub std_test_accuracy: f64,
}

pub fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty());
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One row of the lambda sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub seed: u64,
    pub best_val_accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub config: RunConfig,
    pub grid: Vec<f64>,
    pub rows: Vec<SweepRow>,
    /// Mean best-validation accuracy per grid point, in grid order.
    pub mean_by_lambda: Vec<f64>,
    pub best_lambda: f64,
    pub best_mean_val_accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterArtifact<C: Serialize> {
    pub config: C,
    pub kmeans: ClusterReport,
    pub gmm: ClusterReport,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes a labeled float matrix as CSV: `# config:` comment, header
/// `f0..f{D-1},label`, then one row per sample with 17-significant-digit
/// floats for lossless round-trips.
pub fn write_labeled_csv(
    path: &Path,
    config_json: &str,
    column_prefix: &str,
    x: &Matrix,
    labels: &[usize],
) -> Result<()> {
    assert_eq!(x.rows(), labels.len(), "one label per row required");
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut emit = |line: &str| -> Result<()> {
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))
    };
    emit(&format!("# config: {config_json}"))?;
    let header: Vec<String> = (0..x.cols())
        .map(|j| format!("{column_prefix}{j}"))
        .chain(std::iter::once("label".to_string()))
        .collect();
    emit(&header.join(","))?;
    for i in 0..x.rows() {
        let mut fields: Vec<String> = x.row(i).iter().map(|&v| format_f64(v)).collect();
        fields.push(labels[i].to_string());
        emit(&fields.join(","))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Writes the lambda sweep CSV: config comment, `lambda,seed,best_val_accuracy`
/// header, rows sorted by lambda then seed.
pub fn write_sweep_csv(path: &Path, config_json: &str, rows: &[SweepRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "# config: {config_json}").map_err(|e| Error::io(path, e))?;
    writeln!(out, "lambda,seed,best_val_accuracy").map_err(|e| Error::io(path, e))?;
    for row in rows {
        writeln!(
            out,
            "{},{},{}",
            format_f64(row.lambda),
            row.seed,
            format_f64(row.best_val_accuracy)
        )
        .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_std() {
        let (m, s) = mean_and_sample_std(&[0.5]);
        assert_eq!((m, s), (0.5, 0.0));
        let (m, s) = mean_and_sample_std(&[1.0, 2.0, 3.0]);
        assert!((m - 2.0).abs() < 1e-15);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn labeled_csv_round_trips_through_the_data_module() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("latents.csv");
        let x = Matrix::from_rows(&[vec![0.1, -2.5e-7], vec![1.0 / 3.0, 42.0]]);
        let labels = vec![3, 0];
        write_labeled_csv(&path, "{\"k\":2}", "f", &x, &labels).unwrap();
        let (back_x, back_y) = arlab::data::read_labeled_csv(&path, true).unwrap();
        assert_eq!(back_x, x);
        assert_eq!(back_y, labels);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# config: {\"k\":2}\nf0,f1,label\n"));
    }
}

//! Run configuration: a flat JSON file with `--set key=value` flag overrides
//! (flags win). Unknown keys are rejected, and the fully resolved config is
//! echoed into every output artifact.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use arlab::data::{self, Dataset, IdxPaths};
use arlab::linalg::Rng;
use arlab::losses::{LossConfig, LossVariant, Reduction};
use arlab::optim::TrainSettings;
use arlab::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub loss: LossSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs/out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// IDX image/label file pairs in the canonical MNIST layout.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    /// Labeled CSV, last column the integer label.
    Csv {
        path: PathBuf,
        #[serde(default)]
        has_header: bool,
        #[serde(default = "default_fraction")]
        val_fraction: f64,
        #[serde(default = "default_fraction")]
        test_fraction: f64,
    },
    /// Synthetic Gaussian blobs.
    Blobs {
        k: usize,
        n_per_class: usize,
        dim: usize,
        center_spread: f64,
        noise_sigma: f64,
        #[serde(default = "default_fraction")]
        val_fraction: f64,
        #[serde(default = "default_fraction")]
        test_fraction: f64,
    },
}

fn default_fraction() -> f64 {
    0.15
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    #[serde(default = "default_variant")]
    pub variant: LossVariant,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_reduction")]
    pub reduction: Reduction,
    #[serde(default = "default_eps_norm")]
    pub eps_norm: f64,
}

fn default_variant() -> LossVariant {
    LossVariant::Cce
}
fn default_lambda() -> f64 {
    0.5
}
fn default_gamma() -> f64 {
    0.5
}
fn default_alpha() -> f64 {
    0.25
}
fn default_reduction() -> Reduction {
    Reduction::Mean
}
fn default_eps_norm() -> f64 {
    1e-12
}

impl Default for LossSection {
    fn default() -> Self {
        LossSection {
            variant: default_variant(),
            lambda: default_lambda(),
            gamma: default_gamma(),
            alpha: default_alpha(),
            reduction: default_reduction(),
            eps_norm: default_eps_norm(),
        }
    }
}

impl LossSection {
    pub fn to_loss_config(&self) -> LossConfig {
        LossConfig {
            variant: self.variant,
            lambda: self.lambda,
            gamma: self.gamma,
            alpha: self.alpha,
            reduction: self.reduction,
            eps_norm: self.eps_norm,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default = "default_hidden")]
    pub hidden_sizes: Vec<usize>,
    #[serde(default = "default_slope")]
    pub negative_slope: f64,
    #[serde(default)]
    pub dropout: f64,
}

fn default_hidden() -> Vec<usize> {
    vec![128, 128]
}
fn default_slope() -> f64 {
    0.1
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            hidden_sizes: default_hidden(),
            negative_slope: default_slope(),
            dropout: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Optional cap on the number of training samples (desk-scale runs).
    #[serde(default)]
    pub train_subset: Option<usize>,
}

fn default_epochs() -> usize {
    20
}
fn default_batch() -> usize {
    128
}
fn default_lr() -> f64 {
    1e-4
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            epochs: default_epochs(),
            batch_size: default_batch(),
            learning_rate: default_lr(),
            train_subset: None,
        }
    }
}

impl TrainSection {
    pub fn to_settings(&self) -> TrainSettings {
        TrainSettings {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
        }
    }
}

impl RunConfig {
    /// Loads a config file and applies `key.path=value` overrides on the raw
    /// JSON before deserialization, so overrides are validated exactly like
    /// file content.
    pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut value: serde_json::Value = serde_json::from_str(&text)?;
        for entry in overrides {
            apply_override(&mut value, entry)?;
        }
        let config: RunConfig = serde_json::from_value(value)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("duplicate seeds".into()));
        }
        if self.network.hidden_sizes.is_empty() {
            return Err(Error::Config("at least one hidden layer is required".into()));
        }
        if !(0.0..1.0).contains(&self.network.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0, 1), got {}",
                self.network.dropout
            )));
        }
        Ok(())
    }

    /// Seeds sorted ascending; multi-seed artifacts are collected in this
    /// order.
    pub fn sorted_seeds(&self) -> Vec<u64> {
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds
    }

    /// Builds the dataset for one seed. Every stochastic choice (blob
    /// sampling, split shuffling, the IDX validation carve-out) draws from
    /// `Rng::new(seed)`, so a (config, seed) pair names the dataset exactly.
    pub fn build_dataset(&self, seed: u64) -> Result<Dataset> {
        let mut rng = Rng::new(seed);
        let ds = match &self.dataset {
            DatasetConfig::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => data::load_idx_dataset(
                &IdxPaths {
                    train_images: train_images.clone(),
                    train_labels: train_labels.clone(),
                    test_images: test_images.clone(),
                    test_labels: test_labels.clone(),
                },
                &mut rng,
            )?,
            DatasetConfig::Csv {
                path,
                has_header,
                val_fraction,
                test_fraction,
            } => {
                let full = data::load_csv(path, *has_header)?;
                data::split(&full, *val_fraction, *test_fraction, &mut rng)?
            }
            DatasetConfig::Blobs {
                k,
                n_per_class,
                dim,
                center_spread,
                noise_sigma,
                val_fraction,
                test_fraction,
            } => {
                let full = data::make_blobs(
                    *k,
                    *n_per_class,
                    *dim,
                    *center_spread,
                    *noise_sigma,
                    &mut rng,
                )?;
                data::split(&full, *val_fraction, *test_fraction, &mut rng)?
            }
        };
        match self.train.train_subset {
            Some(n) => data::restrict_train(&ds, n),
            None => Ok(ds),
        }
    }
}

/// Applies one `dotted.path=json_value` override to a JSON tree, creating
/// intermediate objects as needed. Values that fail to parse as JSON are
/// treated as strings.
fn apply_override(root: &mut serde_json::Value, entry: &str) -> Result<()> {
    let (path, raw) = entry.split_once('=').ok_or_else(|| {
        Error::Config(format!("override {entry:?} is not of the form key=value"))
    })?;
    let value: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        if segment.is_empty() {
            return Err(Error::Config(format!("override {entry:?} has an empty path segment")));
        }
        let obj = cursor.as_object_mut().ok_or_else(|| {
            Error::Config(format!("override path {path:?} crosses a non-object"))
        })?;
        if i + 1 == segments.len() {
            obj.insert((*segment).to_string(), value);
            return Ok(());
        }
        cursor = obj
            .entry((*segment).to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    unreachable!("loop always returns on the last segment")
}

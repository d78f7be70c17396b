//! Adam and the training loop: seeded shuffling, mini-batches, per-epoch
//! validation, and best-validation checkpoint selection.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::linalg::{Matrix, Rng};
use crate::losses::{self, apply_center_deltas, ClassParams, LossConfig, LossVariant};
use crate::network::{Checkpoint, NetworkState};
use crate::{digest, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second-moment buffers mirroring a fixed list of parameter tensors.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(param_lens: &[usize], config: AdamConfig) -> Self {
        AdamState {
            config,
            t: 0,
            m: param_lens.iter().map(|&l| vec![0.0; l]).collect(),
            v: param_lens.iter().map(|&l| vec![0.0; l]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update over every parameter buffer. Non-finite
    /// gradients abort the step before anything is mutated.
    pub fn adam_step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        assert_eq!(params.len(), self.m.len(), "parameter buffer count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient buffer count changed");
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            assert_eq!(p.len(), self.m[i].len(), "buffer {i} length changed");
            assert_eq!(g.len(), self.m[i].len(), "gradient {i} length mismatch");
        }
        for (i, g) in grads.iter().enumerate() {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    what: format!("parameter buffer {i} at step {}", self.t + 1),
                });
            }
        }

        self.t += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for j in 0..p.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-sample training loss over the epoch's batches.
    pub train_loss: f64,
    /// Accuracy of the training-mode batch predictions seen during the epoch.
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    /// Max validation accuracy over epochs; 0 when no epoch ran.
    pub best_val_accuracy: f64,
    /// Parameters of the best-validation epoch (initial parameters when no
    /// epoch completed).
    pub checkpoint: Checkpoint,
    pub seed: u64,
    pub config_digest: String,
    pub diverged: bool,
    pub halt_reason: Option<String>,
    /// Cosine norm-floor hits observed across all training batches.
    pub norm_floor_events: u64,
}

fn checkpoint_of(net: &NetworkState, params: &ClassParams, variant: LossVariant) -> Checkpoint {
    let centers = (variant == LossVariant::Center).then(|| params.centers.clone());
    Checkpoint::new(net.clone(), params.weights.clone(), centers)
}

/// Accuracy of the most-similar-class prediction over one split, evaluated in
/// deterministic eval mode.
pub fn split_accuracy(
    net: &NetworkState,
    weights: &Matrix,
    cfg: &LossConfig,
    ds: &Dataset,
    indices: &[usize],
) -> f64 {
    if indices.is_empty() {
        return 0.0;
    }
    let mut correct = 0usize;
    for chunk in indices.chunks(2048) {
        let (x, y) = ds.gather(chunk);
        let latent = net.infer(&x);
        let preds = losses::predict(&latent, weights, cfg.variant, cfg.gamma, cfg.eps_norm);
        correct += preds.iter().zip(&y).filter(|(p, t)| p == t).count();
    }
    correct as f64 / indices.len() as f64
}

/// Eval-mode latents for one split, gathered in split order.
pub fn latents(net: &NetworkState, ds: &Dataset, indices: &[usize]) -> (Matrix, Vec<usize>) {
    let mut out = Matrix::zeros(indices.len(), net.latent_dim());
    let mut labels = Vec::with_capacity(indices.len());
    let mut row = 0;
    for chunk in indices.chunks(2048) {
        let (x, y) = ds.gather(chunk);
        let latent = net.infer(&x);
        for i in 0..latent.rows() {
            out.row_mut(row).copy_from_slice(latent.row(i));
            row += 1;
        }
        labels.extend(y);
    }
    (out, labels)
}

/// Trains the network and class parameters with Adam.
///
/// Per epoch: seeded shuffle of the train split, mini-batch forward/loss/
/// backward, one Adam step over every layer and the class weight matrix, and
/// (for center loss) the running-center update at rate alpha. Validation
/// accuracy is evaluated after each epoch and the best-validation parameters
/// are retained. The whole procedure is a deterministic function of
/// `(dataset, net, cfg, settings, rng seed)`.
pub fn train(
    ds: &Dataset,
    mut net: NetworkState,
    cfg: &LossConfig,
    settings: &TrainSettings,
    rng: &mut Rng,
) -> Result<TrainReport> {
    cfg.validate_for(ds.k)?;
    if settings.batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    if !(settings.learning_rate > 0.0) {
        return Err(Error::Config("learning_rate must be positive".into()));
    }
    if net.input_dim() != ds.x.cols() {
        return Err(Error::Config(format!(
            "network expects {}-dimensional inputs but the dataset is {}-dimensional",
            net.input_dim(),
            ds.x.cols()
        )));
    }
    if ds.split.train.is_empty() {
        return Err(Error::Split("empty train split".into()));
    }
    if settings.epochs > 0 && ds.split.validation.is_empty() {
        return Err(Error::Split(
            "empty validation split with a nonzero epoch count".into(),
        ));
    }

    let config_digest = digest(
        serde_json::to_string(&(cfg, settings, net.layer_sizes(), ds.k))
            .expect("config serializes")
            .as_bytes(),
    );
    let seed = rng.seed();

    let mut params = ClassParams::init(ds.k, net.latent_dim(), rng);
    let mut param_lens: Vec<usize> = Vec::new();
    for layer in &net.layers {
        param_lens.push(layer.weight.data().len());
        param_lens.push(layer.bias.len());
    }
    param_lens.push(params.weights.data().len());
    let mut adam = AdamState::new(
        &param_lens,
        AdamConfig {
            learning_rate: settings.learning_rate,
            ..AdamConfig::default()
        },
    );

    let n_train = ds.split.train.len();
    let mut order = ds.split.train.clone();
    let mut history: Vec<EpochStats> = Vec::new();
    let mut best: Option<(usize, f64, Checkpoint)> = None;
    let mut diverged = false;
    let mut halt_reason = None;
    let mut norm_floor_events = 0u64;

    'epochs: for epoch in 0..settings.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;

        for batch in order.chunks(settings.batch_size) {
            let (x, y) = ds.gather(batch);
            let trace = net.forward(&x, true, rng);
            let out = losses::evaluate(cfg, &trace.latent, &y, &params);
            norm_floor_events += out.norm_floor_events as u64;
            if !out.loss.is_finite() {
                diverged = true;
                halt_reason = Some(format!("loss became non-finite in epoch {epoch}"));
                break 'epochs;
            }
            loss_sum += match cfg.reduction {
                losses::Reduction::Mean => out.loss * batch.len() as f64,
                losses::Reduction::Sum => out.loss,
            };
            correct += out.predictions.iter().zip(&y).filter(|(p, t)| p == t).count();

            let grads = net.backward(&trace, &out.dh);
            let mut param_slices: Vec<&mut [f64]> = Vec::with_capacity(param_lens.len());
            for layer in net.layers.iter_mut() {
                param_slices.push(layer.weight.data_mut());
                param_slices.push(layer.bias.as_mut_slice());
            }
            param_slices.push(params.weights.data_mut());
            let mut grad_slices: Vec<&[f64]> = Vec::with_capacity(param_lens.len());
            for (dw, db) in &grads.layers {
                grad_slices.push(dw.data());
                grad_slices.push(db.as_slice());
            }
            grad_slices.push(out.dw.data());

            if let Err(e) = adam.adam_step(&mut param_slices, &grad_slices) {
                diverged = true;
                halt_reason = Some(e.to_string());
                break 'epochs;
            }
            if let Some(deltas) = &out.center_deltas {
                apply_center_deltas(&mut params.centers, deltas, cfg.alpha);
            }
        }

        let val_accuracy = split_accuracy(&net, &params.weights, cfg, ds, &ds.split.validation);
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / n_train as f64,
            train_accuracy: correct as f64 / n_train as f64,
            val_accuracy,
        });
        let improved = best.as_ref().is_none_or(|(_, acc, _)| val_accuracy > *acc);
        if improved {
            best = Some((epoch, val_accuracy, checkpoint_of(&net, &params, cfg.variant)));
        }
    }

    let (best_epoch, best_val_accuracy, checkpoint) = match best {
        Some((e, acc, ckpt)) => (Some(e), acc, ckpt),
        None => (None, 0.0, checkpoint_of(&net, &params, cfg.variant)),
    };

    Ok(TrainReport {
        history,
        best_epoch,
        best_val_accuracy,
        checkpoint,
        seed,
        config_digest,
        diverged,
        halt_reason,
        norm_floor_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_blobs, split};
    use crate::losses::Reduction;

    fn blob_dataset(seed: u64, sigma: f64) -> Dataset {
        let mut rng = Rng::new(seed);
        let ds = make_blobs(4, 60, 5, 10.0, sigma, &mut rng).unwrap();
        split(&ds, 0.15, 0.15, &mut rng).unwrap()
    }

    #[test]
    fn adam_zero_gradient_leaves_params_unchanged() {
        let mut adam = AdamState::new(&[3], AdamConfig::default());
        let mut p = vec![1.0, -2.0, 0.5];
        let before = p.clone();
        adam.adam_step(&mut [&mut p], &[&[0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn adam_first_step_with_unit_gradient_moves_by_lr() {
        let cfg = AdamConfig {
            learning_rate: 1e-3,
            ..AdamConfig::default()
        };
        let mut adam = AdamState::new(&[1], cfg);
        let mut p = vec![5.0];
        adam.adam_step(&mut [&mut p], &[&[1.0]]).unwrap();
        let moved = 5.0 - p[0];
        assert!((moved - 1e-3).abs() < 1e-9, "moved {moved}");
    }

    #[test]
    fn adam_matches_hand_stepped_trace_on_quadratic() {
        let cfg = AdamConfig {
            learning_rate: 0.05,
            ..AdamConfig::default()
        };
        let mut adam = AdamState::new(&[1], cfg);
        let mut p = vec![1.0];

        // Independent scalar re-implementation of the update rule.
        let (mut xm, mut xv, mut x) = (0.0f64, 0.0f64, 1.0f64);
        for t in 1..=10u32 {
            let g = 2.0 * x; // d/dx x^2
            xm = 0.9 * xm + 0.1 * g;
            xv = 0.999 * xv + 0.001 * g * g;
            let m_hat = xm / (1.0 - 0.9f64.powi(t as i32));
            let v_hat = xv / (1.0 - 0.999f64.powi(t as i32));
            x -= 0.05 * m_hat / (v_hat.sqrt() + 1e-8);

            let g_impl = 2.0 * p[0];
            adam.adam_step(&mut [&mut p], &[&[g_impl]]).unwrap();
            assert!((p[0] - x).abs() < 1e-12, "step {t}: {} vs {x}", p[0]);
        }
    }

    #[test]
    fn adam_is_pure_in_state_and_inputs() {
        let mut a = AdamState::new(&[2], AdamConfig::default());
        let mut b = a.clone();
        let mut pa = vec![0.3, -0.8];
        let mut pb = pa.clone();
        for _ in 0..5 {
            a.adam_step(&mut [&mut pa], &[&[0.1, -0.2]]).unwrap();
            b.adam_step(&mut [&mut pb], &[&[0.1, -0.2]]).unwrap();
        }
        assert_eq!(pa, pb);
        assert_eq!(a.t, b.t);
    }

    #[test]
    fn adam_rejects_nan_gradients_without_mutation() {
        let mut adam = AdamState::new(&[2], AdamConfig::default());
        let mut p = vec![1.0, 2.0];
        let err = adam.adam_step(&mut [&mut p], &[&[f64::NAN, 0.0]]);
        assert!(matches!(err, Err(Error::NonFiniteGradient { .. })));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn train_reaches_high_accuracy_on_easy_blobs() {
        let ds = blob_dataset(17, 0.1);
        for variant in [
            LossVariant::Cce,
            LossVariant::Center,
            LossVariant::CosineCorel,
            LossVariant::GaussianCorel,
        ] {
            let mut rng = Rng::new(17);
            let net = NetworkState::init(&[5, 16, 8], 0.1, 0.0, &mut rng);
            let cfg = LossConfig::new(variant);
            let settings = TrainSettings {
                epochs: 30,
                batch_size: 32,
                learning_rate: 5e-3,
            };
            let report = train(&ds, net, &cfg, &settings, &mut rng).unwrap();
            assert!(
                report.best_val_accuracy >= 0.99,
                "{}: best val accuracy {}",
                variant.name(),
                report.best_val_accuracy
            );
            assert!(!report.diverged);
        }
    }

    #[test]
    fn train_zero_epochs_reports_initial_state() {
        let ds = blob_dataset(3, 0.5);
        let mut rng = Rng::new(3);
        let net = NetworkState::init(&[5, 8, 6], 0.1, 0.0, &mut rng);
        let net_clone = net.clone();
        let cfg = LossConfig::new(LossVariant::Cce);
        let settings = TrainSettings {
            epochs: 0,
            batch_size: 16,
            learning_rate: 1e-4,
        };
        let report = train(&ds, net, &cfg, &settings, &mut rng).unwrap();
        assert!(report.history.is_empty());
        assert_eq!(report.best_epoch, None);
        assert_eq!(report.checkpoint.network, net_clone);
    }

    #[test]
    fn train_is_deterministic_under_seed() {
        let ds = blob_dataset(9, 0.4);
        let run = || {
            let mut rng = Rng::new(123);
            let net = NetworkState::init(&[5, 12, 6], 0.1, 0.1, &mut rng);
            let cfg = LossConfig::new(LossVariant::GaussianCorel);
            let settings = TrainSettings {
                epochs: 5,
                batch_size: 16,
                learning_rate: 1e-3,
            };
            train(&ds, net, &cfg, &settings, &mut rng).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn best_val_accuracy_is_max_over_epochs() {
        let ds = blob_dataset(21, 1.0);
        let mut rng = Rng::new(21);
        let net = NetworkState::init(&[5, 8], 0.1, 0.0, &mut rng);
        let cfg = LossConfig::new(LossVariant::Cce);
        let settings = TrainSettings {
            epochs: 8,
            batch_size: 16,
            learning_rate: 2e-3,
        };
        let report = train(&ds, net, &cfg, &settings, &mut rng).unwrap();
        let max = report
            .history
            .iter()
            .map(|e| e.val_accuracy)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(report.best_val_accuracy, max);
        let first_best = report
            .history
            .iter()
            .find(|e| e.val_accuracy == max)
            .unwrap()
            .epoch;
        assert_eq!(report.best_epoch, Some(first_best));
    }

    #[test]
    fn fixed_batch_loss_non_increasing_for_all_variants() {
        let mut rng = Rng::new(31);
        let ds = make_blobs(3, 10, 4, 8.0, 0.5, &mut rng).unwrap();
        let (x, y) = ds.gather(&ds.split.train);
        for variant in [
            LossVariant::Cce,
            LossVariant::Center,
            LossVariant::CosineCorel,
            LossVariant::GaussianCorel,
        ] {
            let mut rng = Rng::new(31);
            let mut net = NetworkState::init(&[4, 10, 6], 0.1, 0.0, &mut rng);
            let mut params = ClassParams::init(3, 6, &mut rng);
            let cfg = LossConfig {
                reduction: Reduction::Mean,
                ..LossConfig::new(variant)
            };
            let mut lens: Vec<usize> = Vec::new();
            for layer in &net.layers {
                lens.push(layer.weight.data().len());
                lens.push(layer.bias.len());
            }
            lens.push(params.weights.data().len());
            let mut adam = AdamState::new(&lens, AdamConfig::default());

            let mut prev = f64::INFINITY;
            for step in 0..20 {
                let trace = net.forward(&x, false, &mut rng);
                let out = losses::evaluate(&cfg, &trace.latent, &y, &params);
                assert!(
                    out.loss <= prev + 1e-12,
                    "{} step {step}: {} -> {}",
                    variant.name(),
                    prev,
                    out.loss
                );
                prev = out.loss;
                let grads = net.backward(&trace, &out.dh);
                let mut param_slices: Vec<&mut [f64]> = Vec::new();
                for layer in net.layers.iter_mut() {
                    param_slices.push(layer.weight.data_mut());
                    param_slices.push(layer.bias.as_mut_slice());
                }
                param_slices.push(params.weights.data_mut());
                let mut grad_slices: Vec<&[f64]> = Vec::new();
                for (dw, db) in &grads.layers {
                    grad_slices.push(dw.data());
                    grad_slices.push(db.as_slice());
                }
                grad_slices.push(out.dw.data());
                adam.adam_step(&mut param_slices, &grad_slices).unwrap();
                if let Some(deltas) = &out.center_deltas {
                    apply_center_deltas(&mut params.centers, deltas, cfg.alpha);
                }
            }
        }
    }

    #[test]
    fn checkpoint_restore_reproduces_test_accuracy_exactly() {
        let ds = blob_dataset(5, 0.6);
        let mut rng = Rng::new(5);
        let net = NetworkState::init(&[5, 10, 6], 0.1, 0.0, &mut rng);
        let cfg = LossConfig::new(LossVariant::GaussianCorel);
        let settings = TrainSettings {
            epochs: 10,
            batch_size: 16,
            learning_rate: 2e-3,
        };
        let report = train(&ds, net, &cfg, &settings, &mut rng).unwrap();
        let acc = split_accuracy(
            &report.checkpoint.network,
            &report.checkpoint.output_weights,
            &cfg,
            &ds,
            &ds.split.test,
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        report.checkpoint.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        let acc2 = split_accuracy(&loaded.network, &loaded.output_weights, &cfg, &ds, &ds.split.test);
        assert_eq!(acc, acc2);
    }
}

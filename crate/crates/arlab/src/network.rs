//! The representation mapping: a feed-forward network with LeakyReLU
//! activations and optional inverted dropout, with exact manual
//! backpropagation producing gradients for every parameter given the loss
//! gradient at the latent batch.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::{Matrix, Rng};
use crate::{Error, Result};

/// One fully-connected layer: `weight` is `(out x in)`, bias has length `out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Parameters of the representation mapping. The latent space is the
/// activation of the final layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub layers: Vec<Layer>,
    pub negative_slope: f64,
    pub dropout_rate: f64,
}

/// Cached intermediates from one forward pass, consumed by [`NetworkState::backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input actually fed to each layer (after any dropout mask).
    layer_inputs: Vec<Matrix>,
    /// Affine outputs per layer, before the activation.
    pre_activations: Vec<Matrix>,
    /// Masks applied to hidden activations between layers (training only).
    hidden_masks: Vec<Option<Matrix>>,
    /// Final hidden activation, the latent batch.
    pub latent: Matrix,
    training: bool,
}

impl NetworkState {
    /// Glorot-uniform weights, zero biases. `layer_sizes` includes the input
    /// dimension, e.g. `[784, 128, 128]` is two hidden layers of width 128.
    pub fn init(layer_sizes: &[usize], negative_slope: f64, dropout_rate: f64, rng: &mut Rng) -> Self {
        assert!(layer_sizes.len() >= 2, "need at least one layer");
        assert!(layer_sizes.iter().all(|&s| s > 0), "layer sizes must be positive");
        assert!(
            (0.0..1.0).contains(&dropout_rate),
            "dropout rate must be in [0, 1)"
        );
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    weight: Matrix::from_fn(fan_out, fan_in, |_, _| rng.uniform(-bound, bound)),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        NetworkState {
            layers,
            negative_slope,
            dropout_rate,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn latent_dim(&self) -> usize {
        self.layers.last().unwrap().weight.rows()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.weight.rows()));
        sizes
    }

    fn leaky(&self, z: f64) -> f64 {
        if z > 0.0 {
            z
        } else {
            self.negative_slope * z
        }
    }

    fn leaky_grad(&self, z: f64) -> f64 {
        if z > 0.0 {
            1.0
        } else {
            self.negative_slope
        }
    }

    fn dropout_mask(&self, rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        let keep = 1.0 - self.dropout_rate;
        Matrix::from_fn(rows, cols, |_, _| {
            if rng.next_f64() < self.dropout_rate {
                0.0
            } else {
                1.0 / keep
            }
        })
    }

    /// Runs the batch through every layer: affine, LeakyReLU, and (in training
    /// mode with a nonzero rate) inverted dropout after the input and between
    /// layers. The latent batch is the last activation and is never masked.
    pub fn forward(&self, x: &Matrix, training: bool, rng: &mut Rng) -> ForwardTrace {
        assert_eq!(
            x.cols(),
            self.input_dim(),
            "input width {} does not match first layer fan-in {}",
            x.cols(),
            self.input_dim()
        );
        let use_dropout = training && self.dropout_rate > 0.0;
        let n_layers = self.layers.len();

        let mut layer_inputs = Vec::with_capacity(n_layers);
        let mut pre_activations = Vec::with_capacity(n_layers);
        let mut hidden_masks = Vec::with_capacity(n_layers);

        let mut current = if use_dropout {
            x.hadamard(&self.dropout_mask(x.rows(), x.cols(), rng))
        } else {
            x.clone()
        };

        let mut latent = None;
        for (idx, layer) in self.layers.iter().enumerate() {
            let z = current.matmul_nt(&layer.weight).add_row_broadcast(&layer.bias);
            let act = z.map(|v| self.leaky(v));
            pre_activations.push(z);
            layer_inputs.push(current);

            let is_last = idx + 1 == n_layers;
            if is_last {
                hidden_masks.push(None);
                latent = Some(act.clone());
                current = act;
            } else if use_dropout {
                let mask = self.dropout_mask(act.rows(), act.cols(), rng);
                current = act.hadamard(&mask);
                hidden_masks.push(Some(mask));
            } else {
                hidden_masks.push(None);
                current = act;
            }
        }

        ForwardTrace {
            layer_inputs,
            pre_activations,
            hidden_masks,
            latent: latent.expect("at least one layer"),
            training,
        }
    }

    /// Deterministic eval-mode latent batch.
    pub fn infer(&self, x: &Matrix) -> Matrix {
        let mut unused = Rng::new(0);
        self.forward(x, false, &mut unused).latent
    }

    /// Exact gradients of the scalar loss with respect to every weight and
    /// bias, given `dl_dh` from the loss at the latent batch. Dropout masks
    /// are replayed from the trace.
    pub fn backward(&self, trace: &ForwardTrace, dl_dh: &Matrix) -> NetworkGradients {
        assert_eq!(
            dl_dh.shape(),
            trace.latent.shape(),
            "latent gradient shape mismatch"
        );
        assert_eq!(
            trace.layer_inputs.len(),
            self.layers.len(),
            "trace does not match network depth"
        );

        let mut grads = vec![None; self.layers.len()];
        // Gradient with respect to the (post-mask) output of the current layer.
        let mut g = dl_dh.clone();
        for idx in (0..self.layers.len()).rev() {
            let z = &trace.pre_activations[idx];
            let gz = Matrix::from_fn(g.rows(), g.cols(), |i, j| {
                g.get(i, j) * self.leaky_grad(z.get(i, j))
            });
            let dw = gz.matmul_tn(&trace.layer_inputs[idx]);
            let db = gz.col_sums();
            grads[idx] = Some((dw, db));
            if idx > 0 {
                g = gz.matmul(&self.layers[idx].weight);
                if let Some(mask) = &trace.hidden_masks[idx - 1] {
                    g = g.hadamard(mask);
                }
            }
        }

        NetworkGradients {
            layers: grads.into_iter().map(|g| g.unwrap()).collect(),
        }
    }
}

/// Per-layer `(dL/dW, dL/db)` in layer order.
#[derive(Debug, Clone)]
pub struct NetworkGradients {
    pub layers: Vec<(Matrix, Vec<f64>)>,
}

impl ForwardTrace {
    pub fn training(&self) -> bool {
        self.training
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned container for a trained model: the representation mapping plus
/// the class weight matrix (and running centers when center loss was used).
/// JSON round-trips bit-exactly: floats are written with shortest-exact
/// formatting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub network: NetworkState,
    pub output_weights: Matrix,
    pub centers: Option<Matrix>,
}

impl Checkpoint {
    pub fn new(network: NetworkState, output_weights: Matrix, centers: Option<Matrix>) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            network,
            output_weights,
            centers,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (want {CHECKPOINT_VERSION})",
                ckpt.format_version
            )));
        }
        if ckpt.output_weights.cols() != ckpt.network.latent_dim() {
            return Err(Error::Checkpoint(format!(
                "output weights are {}-dimensional but the latent space is {}-dimensional",
                ckpt.output_weights.cols(),
                ckpt.network.latent_dim()
            )));
        }
        Ok(ckpt)
    }
}

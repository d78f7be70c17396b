//! Similarity functions, their attractive/repulsive loss variants, and exact
//! gradients with respect to the latent batch, the class weight matrix, and
//! (for center loss) the running class centers.
//!
//! All four variants share one shape convention: latents `h` are `(N x H)`,
//! class weights `W` are `(K x H)` with one row per class, labels index into
//! `[0, K)`. Per-sample losses follow the attractive-repulsive form
//! `-lambda * attract + (1 - lambda) * repulse`; plain cross-entropy is the
//! unweighted dot-product instance of the same decomposition.

use serde::{Deserialize, Serialize};

use crate::linalg::{argmax, dot, log_sum_exp, sq_dist, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    Cce,
    Center,
    CosineCorel,
    GaussianCorel,
}

impl LossVariant {
    pub fn name(self) -> &'static str {
        match self {
            LossVariant::Cce => "cce",
            LossVariant::Center => "center",
            LossVariant::CosineCorel => "cosine_corel",
            LossVariant::GaussianCorel => "gaussian_corel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    Mean,
    Sum,
}

/// Loss variant plus every knob the variants read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub variant: LossVariant,
    /// Attractive/repulsive mixing weight.
    pub lambda: f64,
    /// Gaussian similarity width (1 / (2 sigma^2)).
    pub gamma: f64,
    /// Center update rate for the center-loss running means.
    pub alpha: f64,
    pub reduction: Reduction,
    /// Norm floor protecting cosine similarity against dead latents.
    pub eps_norm: f64,
}

impl LossConfig {
    pub fn new(variant: LossVariant) -> Self {
        LossConfig {
            variant,
            lambda: 0.5,
            gamma: 0.5,
            alpha: 0.25,
            reduction: Reduction::Mean,
            eps_norm: 1e-12,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    /// Validates the hyperparameters against a class count.
    pub fn validate_for(&self, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::Config("class count must be positive".into()));
        }
        match self.variant {
            LossVariant::Cce => {}
            LossVariant::Center => {
                if self.lambda < 0.0 {
                    return Err(Error::Config(format!(
                        "center loss needs lambda >= 0, got {}",
                        self.lambda
                    )));
                }
                if !(self.alpha > 0.0 && self.alpha <= 1.0) {
                    return Err(Error::Config(format!(
                        "center update rate alpha must be in (0, 1], got {}",
                        self.alpha
                    )));
                }
            }
            LossVariant::CosineCorel => {
                if !(self.lambda > 0.0 && self.lambda <= 1.0) {
                    return Err(Error::Config(format!(
                        "lambda must be in (0, 1], got {}",
                        self.lambda
                    )));
                }
                if k < 2 {
                    return Err(Error::Config(
                        "cosine repulsion is undefined with a single class".into(),
                    ));
                }
            }
            LossVariant::GaussianCorel => {
                if !(self.lambda > 0.0 && self.lambda <= 1.0) {
                    return Err(Error::Config(format!(
                        "lambda must be in (0, 1], got {}",
                        self.lambda
                    )));
                }
                if !(self.gamma > 0.0) {
                    return Err(Error::Config(format!(
                        "gamma must be positive, got {}",
                        self.gamma
                    )));
                }
            }
        }
        if !(self.eps_norm > 0.0) {
            return Err(Error::Config("eps_norm must be positive".into()));
        }
        Ok(())
    }
}

/// Class weight matrix `W` (one row per class) plus the running centers used
/// only by the center-loss variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    pub weights: Matrix,
    pub centers: Matrix,
}

impl ClassParams {
    /// Glorot-uniform `W`, zero centers.
    pub fn init(k: usize, latent_dim: usize, rng: &mut crate::linalg::Rng) -> Self {
        let bound = (6.0 / (k + latent_dim) as f64).sqrt();
        ClassParams {
            weights: Matrix::from_fn(k, latent_dim, |_, _| rng.uniform(-bound, bound)),
            centers: Matrix::zeros(k, latent_dim),
        }
    }

    pub fn k(&self) -> usize {
        self.weights.rows()
    }
}

/// Scalar loss plus every gradient a training step needs.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    /// `dL/dh`, same shape as the latent batch.
    pub dh: Matrix,
    /// `dL/dW`, same shape as the class weight matrix.
    pub dw: Matrix,
    /// Center-loss update directions, applied by the caller at rate alpha;
    /// `None` for the other variants.
    pub center_deltas: Option<Matrix>,
    /// Per-sample predicted class under the variant's similarity.
    pub predictions: Vec<usize>,
    /// How many vectors hit the cosine norm floor during this evaluation.
    pub norm_floor_events: usize,
}

/// Inner-product similarity.
pub fn sim_dot(h: &[f64], w: &[f64]) -> f64 {
    dot(h, w)
}

/// Cosine of the angle between two vectors, clamped to `[-1, 1]` against
/// rounding. Norms below `eps_norm` are floored, not rejected.
pub fn sim_cos(h: &[f64], w: &[f64], eps_norm: f64) -> f64 {
    let nh = dot(h, h).sqrt().max(eps_norm);
    let nw = dot(w, w).sqrt().max(eps_norm);
    let c = (dot(h, w) / (nh * nw)).clamp(-1.0, 1.0);
    debug_assert!((-1.0..=1.0).contains(&c));
    c
}

/// Negative scaled squared Euclidean distance; zero iff the vectors coincide.
pub fn sim_gauss(h: &[f64], w: &[f64], gamma: f64) -> f64 {
    assert!(gamma > 0.0, "gamma must be positive");
    let s = -gamma * sq_dist(h, w);
    debug_assert!(s <= 0.0);
    s
}

/// Upper bound on the softmax probability mass any class can receive when the
/// logits are cosine similarities: `e^2 / (e^2 + K - 1)`. Documents why the
/// cosine variant does not use a softmax repulsion.
pub fn cosine_softmax_ceiling(k: usize) -> f64 {
    assert!(k >= 2, "ceiling needs at least two classes");
    let e2 = std::f64::consts::E * std::f64::consts::E;
    e2 / (e2 + (k - 1) as f64)
}

fn check_batch(h: &Matrix, labels: &[usize], w: &Matrix) {
    assert_eq!(h.rows(), labels.len(), "one label per latent row required");
    assert_eq!(
        h.cols(),
        w.cols(),
        "latent dim {} does not match class weight dim {}",
        h.cols(),
        w.cols()
    );
    assert!(h.rows() > 0, "empty batch");
    let k = w.rows();
    assert!(
        labels.iter().all(|&y| y < k),
        "label out of range for K={k}"
    );
}

fn reduce_in_place(loss: &mut f64, dh: &mut Matrix, dw: &mut Matrix, n: usize, reduction: Reduction) {
    if reduction == Reduction::Mean {
        let inv = 1.0 / n as f64;
        *loss *= inv;
        for v in dh.data_mut() {
            *v *= inv;
        }
        for v in dw.data_mut() {
            *v *= inv;
        }
    }
}

/// Cross-entropy in its similarity form: per sample,
/// `-w_y.h + log sum_k exp(w_k.h)`, with the stable log-sum-exp.
pub fn loss_cce(h: &Matrix, labels: &[usize], w: &Matrix, reduction: Reduction) -> LossOutput {
    check_batch(h, labels, w);
    let (n, _) = h.shape();
    let logits = h.matmul_nt(w);
    let lse = logits.row_log_sum_exp();
    let predictions = logits.row_argmax();

    let mut loss = 0.0;
    // softmax residual p - onehot(y), the shared factor of both gradients
    let mut residual = Matrix::zeros(n, w.rows());
    for i in 0..n {
        loss += -logits.get(i, labels[i]) + lse[i];
        for kk in 0..w.rows() {
            let p = (logits.get(i, kk) - lse[i]).exp();
            residual.set(i, kk, p - if kk == labels[i] { 1.0 } else { 0.0 });
        }
    }
    let mut dh = residual.matmul(w);
    let mut dw = residual.matmul_tn(h);
    reduce_in_place(&mut loss, &mut dh, &mut dw, n, reduction);

    LossOutput {
        loss,
        dh,
        dw,
        center_deltas: None,
        predictions,
        norm_floor_events: 0,
    }
}

/// Cosine-COREL: attraction toward the own-class weight direction, repulsion
/// from the squared-cosine-maximal wrong class (hardmax). Gradients flow only
/// through the own class and the selected wrong class.
pub fn loss_cosine_corel(
    h: &Matrix,
    labels: &[usize],
    w: &Matrix,
    lambda: f64,
    reduction: Reduction,
    eps_norm: f64,
) -> LossOutput {
    check_batch(h, labels, w);
    let k = w.rows();
    assert!(k >= 2, "cosine repulsion needs at least two classes");
    assert!(lambda > 0.0 && lambda <= 1.0, "lambda must be in (0, 1]");
    let (n, dim) = h.shape();

    let mut floor_events = 0usize;
    let mut norm_of = |v: &[f64]| -> (f64, bool) {
        let raw = dot(v, v).sqrt();
        if raw < eps_norm {
            floor_events += 1;
            (eps_norm, true)
        } else {
            (raw, false)
        }
    };
    let w_norms: Vec<(f64, bool)> = (0..k).map(|kk| norm_of(w.row(kk))).collect();
    let h_norms: Vec<(f64, bool)> = (0..n).map(|i| norm_of(h.row(i))).collect();

    let mut loss = 0.0;
    let mut dh = Matrix::zeros(n, dim);
    let mut dw = Matrix::zeros(k, dim);
    let mut predictions = Vec::with_capacity(n);

    // d cos / d first-argument, honoring a floored norm (a floored norm is a
    // constant, so its direction term drops out).
    let grad_wrt = |a: &[f64], (na, floored): (f64, bool), b: &[f64], nb: f64, c: f64, out: &mut [f64], scale: f64| {
        for (o, (&ai, &bi)) in out.iter_mut().zip(a.iter().zip(b)) {
            let mut g = bi / (na * nb);
            if !floored {
                g -= c * ai / (na * na);
            }
            *o += scale * g;
        }
    };

    for i in 0..n {
        let hi = h.row(i);
        let y = labels[i];
        let cos: Vec<f64> = (0..k)
            .map(|kk| (dot(hi, w.row(kk)) / (h_norms[i].0 * w_norms[kk].0)).clamp(-1.0, 1.0))
            .collect();
        debug_assert!(cos.iter().all(|c| (-1.0..=1.0).contains(c)));
        predictions.push(argmax(&cos));

        // Hardmax over the squared cosine of wrong classes, lowest index wins ties.
        let mut m = usize::MAX;
        for kk in 0..k {
            if kk != y && (m == usize::MAX || cos[kk] * cos[kk] > cos[m] * cos[m]) {
                m = kk;
            }
        }

        loss += -lambda * cos[y] + (1.0 - lambda) * cos[m] * cos[m];

        // Attraction through h and w_y.
        grad_wrt(hi, h_norms[i], w.row(y), w_norms[y].0, cos[y], dh.row_mut(i), -lambda);
        grad_wrt(w.row(y), w_norms[y], hi, h_norms[i].0, cos[y], dw.row_mut(y), -lambda);
        // Repulsion through h and the selected wrong class only.
        let rep = (1.0 - lambda) * 2.0 * cos[m];
        grad_wrt(hi, h_norms[i], w.row(m), w_norms[m].0, cos[m], dh.row_mut(i), rep);
        grad_wrt(w.row(m), w_norms[m], hi, h_norms[i].0, cos[m], dw.row_mut(m), rep);
    }

    reduce_in_place(&mut loss, &mut dh, &mut dw, n, reduction);
    LossOutput {
        loss,
        dh,
        dw,
        center_deltas: None,
        predictions,
        norm_floor_events: floor_events,
    }
}

/// Gaussian-COREL: attraction is the negative scaled squared distance to the
/// own class, repulsion the log-sum-exp of the similarities to every class.
pub fn loss_gaussian_corel(
    h: &Matrix,
    labels: &[usize],
    w: &Matrix,
    lambda: f64,
    gamma: f64,
    reduction: Reduction,
) -> LossOutput {
    check_batch(h, labels, w);
    assert!(lambda > 0.0 && lambda <= 1.0, "lambda must be in (0, 1]");
    assert!(gamma > 0.0, "gamma must be positive");
    let (n, dim) = h.shape();
    let k = w.rows();

    let mut loss = 0.0;
    let mut dh = Matrix::zeros(n, dim);
    let mut dw = Matrix::zeros(k, dim);
    let mut predictions = Vec::with_capacity(n);
    let mut sims = vec![0.0; k];

    for i in 0..n {
        let hi = h.row(i);
        let y = labels[i];
        for (kk, s) in sims.iter_mut().enumerate() {
            *s = -gamma * sq_dist(hi, w.row(kk));
        }
        debug_assert!(sims.iter().all(|&s| s <= 0.0));
        predictions.push(argmax(&sims));
        let lse = log_sum_exp(&sims);
        loss += -lambda * sims[y] + (1.0 - lambda) * lse;

        for kk in 0..k {
            let q = (sims[kk] - lse).exp(); // softmax responsibility
            let attract = if kk == y { -lambda } else { 0.0 };
            let coeff = 2.0 * gamma * (attract + (1.0 - lambda) * q);
            // d s_k / d w_k = 2 gamma (h - w_k); d s_k / d h is its negation.
            let wk = w.row(kk);
            let dw_row = dw.row_mut(kk);
            for j in 0..dim {
                let diff = hi[j] - wk[j];
                dw_row[j] += coeff * diff;
            }
            let dh_row = dh.row_mut(i);
            for j in 0..dim {
                let diff = hi[j] - wk[j];
                dh_row[j] -= coeff * diff;
            }
        }
    }

    reduce_in_place(&mut loss, &mut dh, &mut dw, n, reduction);
    LossOutput {
        loss,
        dh,
        dw,
        center_deltas: None,
        predictions,
        norm_floor_events: 0,
    }
}

/// Center loss: cross-entropy plus a squared-distance pull toward per-class
/// running centers. The centers are not trained by the optimizer; the output
/// carries per-class deltas and the caller applies
/// `mu_k <- mu_k - alpha * delta_k`.
pub fn loss_center(
    h: &Matrix,
    labels: &[usize],
    w: &Matrix,
    centers: &Matrix,
    lambda: f64,
    reduction: Reduction,
) -> LossOutput {
    check_batch(h, labels, w);
    assert!(lambda >= 0.0, "center loss needs lambda >= 0");
    assert_eq!(
        centers.shape(),
        w.shape(),
        "centers must be one row per class"
    );
    let (n, dim) = h.shape();
    let k = w.rows();

    // Cross-entropy part, kept unreduced until the end.
    let mut out = loss_cce(h, labels, w, Reduction::Sum);

    let mut class_counts = vec![0usize; k];
    let mut deltas = Matrix::zeros(k, dim);
    for i in 0..n {
        let y = labels[i];
        let hi = h.row(i);
        let mu = centers.row(y);
        out.loss += 0.5 * lambda * sq_dist(hi, mu);
        let dh_row = out.dh.row_mut(i);
        let delta_row = deltas.row_mut(y);
        for j in 0..dim {
            let diff = hi[j] - mu[j];
            dh_row[j] += lambda * diff;
            delta_row[j] -= diff; // accumulates mu_y - h_i
        }
        class_counts[y] += 1;
    }
    for kk in 0..k {
        let denom = 1.0 + class_counts[kk] as f64;
        for v in deltas.row_mut(kk) {
            *v /= denom;
        }
    }

    let mut loss = out.loss;
    let mut dh = out.dh;
    let mut dw = out.dw;
    reduce_in_place(&mut loss, &mut dh, &mut dw, n, reduction);
    LossOutput {
        loss,
        dh,
        dw,
        center_deltas: Some(deltas),
        predictions: out.predictions,
        norm_floor_events: 0,
    }
}

/// `mu_k <- mu_k - alpha * delta_k`.
pub fn apply_center_deltas(centers: &mut Matrix, deltas: &Matrix, alpha: f64) {
    assert_eq!(centers.shape(), deltas.shape(), "center delta shape mismatch");
    for (c, &d) in centers.data_mut().iter_mut().zip(deltas.data()) {
        *c -= alpha * d;
    }
}

/// Most-similar-class prediction under the variant's similarity; ties break
/// to the lowest class index.
pub fn predict(
    h: &Matrix,
    w: &Matrix,
    variant: LossVariant,
    gamma: f64,
    eps_norm: f64,
) -> Vec<usize> {
    assert_eq!(h.cols(), w.cols(), "latent/weight dimension mismatch");
    let k = w.rows();
    match variant {
        LossVariant::Cce | LossVariant::Center => h.matmul_nt(w).row_argmax(),
        LossVariant::CosineCorel => (0..h.rows())
            .map(|i| {
                let sims: Vec<f64> = (0..k)
                    .map(|kk| sim_cos(h.row(i), w.row(kk), eps_norm))
                    .collect();
                argmax(&sims)
            })
            .collect(),
        LossVariant::GaussianCorel => (0..h.rows())
            .map(|i| {
                let sims: Vec<f64> = (0..k)
                    .map(|kk| sim_gauss(h.row(i), w.row(kk), gamma))
                    .collect();
                argmax(&sims)
            })
            .collect(),
    }
}

/// Dispatches to the configured variant.
pub fn evaluate(
    cfg: &LossConfig,
    h: &Matrix,
    labels: &[usize],
    params: &ClassParams,
) -> LossOutput {
    match cfg.variant {
        LossVariant::Cce => loss_cce(h, labels, &params.weights, cfg.reduction),
        LossVariant::Center => loss_center(
            h,
            labels,
            &params.weights,
            &params.centers,
            cfg.lambda,
            cfg.reduction,
        ),
        LossVariant::CosineCorel => loss_cosine_corel(
            h,
            labels,
            &params.weights,
            cfg.lambda,
            cfg.reduction,
            cfg.eps_norm,
        ),
        LossVariant::GaussianCorel => loss_gaussian_corel(
            h,
            labels,
            &params.weights,
            cfg.lambda,
            cfg.gamma,
            cfg.reduction,
        ),
    }
}

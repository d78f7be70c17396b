//! Central finite-difference oracle for the analytic gradients: every weight,
//! bias, and class-weight entry, for all four loss variants composed with the
//! network, at three seeds.

use arlab::linalg::{Matrix, Rng};
use arlab::losses::{self, ClassParams, LossConfig, LossVariant, Reduction};
use arlab::network::NetworkState;

const EPSILON: f64 = 1e-5;
const REL_TOL: f64 = 1e-5;
/// Below this magnitude the relative criterion degenerates; compare
/// absolutely at REL_TOL * FLOOR instead.
const FLOOR: f64 = 1e-4;

fn scalar_loss(
    net: &NetworkState,
    cfg: &LossConfig,
    x: &Matrix,
    y: &[usize],
    params: &ClassParams,
) -> f64 {
    let latent = net.infer(x);
    losses::evaluate(cfg, &latent, y, params).loss
}

fn assert_close(analytic: f64, numeric: f64, what: &str) {
    let scale = analytic.abs().max(numeric.abs());
    let diff = (analytic - numeric).abs();
    if scale >= FLOOR {
        assert!(
            diff / scale < REL_TOL,
            "{what}: analytic {analytic} vs numeric {numeric} (rel {})",
            diff / scale
        );
    } else {
        assert!(
            diff < REL_TOL * FLOOR,
            "{what}: analytic {analytic} vs numeric {numeric} (abs {diff})"
        );
    }
}

fn config_for(variant: LossVariant) -> LossConfig {
    LossConfig {
        variant,
        lambda: 0.5,
        gamma: 0.5,
        alpha: 0.25,
        reduction: Reduction::Mean,
        eps_norm: 1e-12,
    }
}

fn check_variant(variant: LossVariant, seed: u64) {
    let k = 4;
    let mut rng = Rng::new(seed);
    let net = NetworkState::init(&[8, 6, 5], 0.1, 0.0, &mut rng);
    let x = Matrix::from_fn(5, 8, |_, _| rng.uniform(-1.0, 1.0));
    let y: Vec<usize> = (0..5).map(|_| rng.index(k)).collect();
    let mut params = ClassParams::init(k, 5, &mut rng);
    params.centers = Matrix::from_fn(k, 5, |_, _| rng.uniform(-1.0, 1.0));
    let cfg = config_for(variant);

    let latent = net.infer(&x);
    let out = losses::evaluate(&cfg, &latent, &y, &params);
    let trace = net.forward(&x, false, &mut Rng::new(0));
    let grads = net.backward(&trace, &out.dh);

    // Network weights and biases.
    for (l, (dw, db)) in grads.layers.iter().enumerate() {
        let (rows, cols) = net.layers[l].weight.shape();
        for i in 0..rows {
            for j in 0..cols {
                let mut plus = net.clone();
                let mut minus = net.clone();
                let v = net.layers[l].weight.get(i, j);
                plus.layers[l].weight.set(i, j, v + EPSILON);
                minus.layers[l].weight.set(i, j, v - EPSILON);
                let numeric = (scalar_loss(&plus, &cfg, &x, &y, &params)
                    - scalar_loss(&minus, &cfg, &x, &y, &params))
                    / (2.0 * EPSILON);
                assert_close(
                    dw.get(i, j),
                    numeric,
                    &format!("{} seed {seed} layer {l} weight ({i},{j})", variant.name()),
                );
            }
            let mut plus = net.clone();
            let mut minus = net.clone();
            plus.layers[l].bias[i] += EPSILON;
            minus.layers[l].bias[i] -= EPSILON;
            let numeric = (scalar_loss(&plus, &cfg, &x, &y, &params)
                - scalar_loss(&minus, &cfg, &x, &y, &params))
                / (2.0 * EPSILON);
            assert_close(
                db[i],
                numeric,
                &format!("{} seed {seed} layer {l} bias {i}", variant.name()),
            );
        }
    }

    // Class weights.
    for i in 0..k {
        for j in 0..5 {
            let mut plus = params.clone();
            let mut minus = params.clone();
            let v = params.weights.get(i, j);
            plus.weights.set(i, j, v + EPSILON);
            minus.weights.set(i, j, v - EPSILON);
            let numeric = (scalar_loss(&net, &cfg, &x, &y, &plus)
                - scalar_loss(&net, &cfg, &x, &y, &minus))
                / (2.0 * EPSILON);
            assert_close(
                out.dw.get(i, j),
                numeric,
                &format!("{} seed {seed} class weight ({i},{j})", variant.name()),
            );
        }
    }
}

#[test]
fn cce_gradients_match_finite_differences() {
    for seed in [11, 22, 33] {
        check_variant(LossVariant::Cce, seed);
    }
}

#[test]
fn center_gradients_match_finite_differences() {
    for seed in [11, 22, 33] {
        check_variant(LossVariant::Center, seed);
    }
}

#[test]
fn cosine_gradients_match_finite_differences() {
    for seed in [11, 22, 33] {
        check_variant(LossVariant::CosineCorel, seed);
    }
}

#[test]
fn gaussian_gradients_match_finite_differences() {
    for seed in [11, 22, 33] {
        check_variant(LossVariant::GaussianCorel, seed);
    }
}

/// Sum reduction must scale gradients consistently too.
#[test]
fn sum_reduction_gradients_match_finite_differences() {
    let mut rng = Rng::new(99);
    let k = 3;
    let net = NetworkState::init(&[6, 5, 4], 0.1, 0.0, &mut rng);
    let x = Matrix::from_fn(4, 6, |_, _| rng.uniform(-1.0, 1.0));
    let y: Vec<usize> = (0..4).map(|_| rng.index(k)).collect();
    let params = ClassParams::init(k, 4, &mut rng);
    let cfg = LossConfig {
        reduction: Reduction::Sum,
        ..config_for(LossVariant::GaussianCorel)
    };
    let latent = net.infer(&x);
    let out = losses::evaluate(&cfg, &latent, &y, &params);
    for i in 0..k {
        for j in 0..4 {
            let mut plus = params.clone();
            let mut minus = params.clone();
            let v = params.weights.get(i, j);
            plus.weights.set(i, j, v + EPSILON);
            minus.weights.set(i, j, v - EPSILON);
            let numeric = (scalar_loss(&net, &cfg, &x, &y, &plus)
                - scalar_loss(&net, &cfg, &x, &y, &minus))
                / (2.0 * EPSILON);
            assert_close(out.dw.get(i, j), numeric, &format!("sum-mode W ({i},{j})"));
        }
    }
}

/// Perturbing a wrong class that the cosine hardmax did not select must leave
/// the loss unchanged, as long as the perturbation keeps the selection.
#[test]
fn cosine_non_selected_class_has_zero_gradient() {
    let mut rng = Rng::new(7);
    let k = 5;
    let h = Matrix::from_fn(3, 4, |_, _| rng.uniform(-1.0, 1.0));
    let y = vec![0, 1, 2];
    let w = Matrix::from_fn(k, 4, |_, _| rng.uniform(-1.0, 1.0));
    let out = losses::loss_cosine_corel(&h, &y, &w, 0.5, Reduction::Mean, 1e-12);

    // Identify, per sample, the selected wrong class; classes never selected
    // and never the own class must carry zero gradient.
    let mut touched = vec![false; k];
    for i in 0..3 {
        touched[y[i]] = true;
        let mut best = usize::MAX;
        let mut best_sq = f64::NEG_INFINITY;
        for kk in 0..k {
            if kk == y[i] {
                continue;
            }
            let c = losses::sim_cos(h.row(i), w.row(kk), 1e-12);
            if c * c > best_sq {
                best_sq = c * c;
                best = kk;
            }
        }
        touched[best] = true;
    }
    for kk in 0..k {
        if !touched[kk] {
            assert!(
                out.dw.row(kk).iter().all(|&v| v == 0.0),
                "class {kk} should have zero gradient"
            );
            // And a small perturbation of that row leaves the loss unchanged.
            let mut w2 = w.clone();
            for j in 0..4 {
                w2.set(kk, j, w2.get(kk, j) + 1e-7);
            }
            let out2 = losses::loss_cosine_corel(&h, &y, &w2, 0.5, Reduction::Mean, 1e-12);
            assert_eq!(out.loss, out2.loss);
        }
    }
}

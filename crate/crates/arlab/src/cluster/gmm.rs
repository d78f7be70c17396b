//! Diagonal-covariance Gaussian mixture fit by expectation-maximization, with
//! all responsibilities computed in log space.

use crate::cluster::kmeans::kmeans;
use crate::linalg::{log_sum_exp, Matrix, Rng};
use crate::{Error, Result};

const VARIANCE_FLOOR: f64 = 1e-6;
const COLLAPSE_WEIGHT: f64 = 1e-8;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone)]
pub struct GmmOutcome {
    pub assignments: Vec<usize>,
    pub weights: Vec<f64>,
    pub means: Matrix,
    /// Per-component, per-dimension variances (diagonal covariance).
    pub variances: Matrix,
    /// Mean log-likelihood per sample at the final parameters.
    pub avg_log_likelihood: f64,
    /// Mean log-likelihood after every E step; non-decreasing.
    pub ll_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Components re-spread after their weight collapsed.
    pub respread_events: usize,
}

struct Model {
    weights: Vec<f64>,
    means: Matrix,
    variances: Matrix,
}

fn global_variance(x: &Matrix) -> Vec<f64> {
    let n = x.rows() as f64;
    let mean = x.col_means();
    let mut var = vec![0.0; x.cols()];
    for i in 0..x.rows() {
        for (v, (&xv, &m)) in var.iter_mut().zip(x.row(i).iter().zip(&mean)) {
            let d = xv - m;
            *v += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v = (*v / n).max(VARIANCE_FLOOR));
    var
}

/// Log responsibilities and the mean per-sample log-likelihood.
fn e_step(x: &Matrix, model: &Model) -> (Matrix, f64) {
    let (n, d) = x.shape();
    let k = model.weights.len();
    // Per-component constants: log w_k - 0.5 sum_d log(2 pi v_kd).
    let consts: Vec<f64> = (0..k)
        .map(|c| {
            let log_det: f64 = model.variances.row(c).iter().map(|v| LN_2PI + v.ln()).sum();
            model.weights[c].ln() - 0.5 * log_det
        })
        .collect();

    let mut resp = Matrix::zeros(n, k);
    let mut total_ll = 0.0;
    let mut log_p = vec![0.0; k];
    for i in 0..n {
        let xi = x.row(i);
        for c in 0..k {
            let mu = model.means.row(c);
            let var = model.variances.row(c);
            let mut maha = 0.0;
            for j in 0..d {
                let diff = xi[j] - mu[j];
                maha += diff * diff / var[j];
            }
            log_p[c] = consts[c] - 0.5 * maha;
        }
        let lse = log_sum_exp(&log_p);
        total_ll += lse;
        let row = resp.row_mut(i);
        for c in 0..k {
            row[c] = (log_p[c] - lse).exp();
        }
    }
    (resp, total_ll / n as f64)
}

/// Weighted-mean update; collapsed components are re-spread from the data.
fn m_step(x: &Matrix, resp: &Matrix, model: &mut Model, rng: &mut Rng, respreads: &mut usize) {
    let (n, d) = x.shape();
    let k = model.weights.len();
    let global_var = global_variance(x);

    for c in 0..k {
        let nk: f64 = (0..n).map(|i| resp.get(i, c)).sum();
        if nk / (n as f64) < COLLAPSE_WEIGHT {
            let pick = rng.index(n);
            model.means.row_mut(c).copy_from_slice(x.row(pick));
            model.variances.row_mut(c).copy_from_slice(&global_var);
            model.weights[c] = 1.0 / n as f64;
            *respreads += 1;
            continue;
        }
        model.weights[c] = nk / n as f64;
        let mean_row: Vec<f64> = (0..d)
            .map(|j| (0..n).map(|i| resp.get(i, c) * x.get(i, j)).sum::<f64>() / nk)
            .collect();
        model.means.row_mut(c).copy_from_slice(&mean_row);
        for j in 0..d {
            let mut acc = 0.0;
            for i in 0..n {
                let diff = x.get(i, j) - mean_row[j];
                acc += resp.get(i, c) * diff * diff;
            }
            model.variances.set(c, j, (acc / nk).max(VARIANCE_FLOOR));
        }
    }
    // Renormalize in case a re-spread perturbed the total.
    let total: f64 = model.weights.iter().sum();
    model.weights.iter_mut().for_each(|w| *w /= total);
}

/// EM from explicit initial means (weights uniform, variances global).
pub fn gmm_em_with_init(
    x: &Matrix,
    k: usize,
    init_means: &Matrix,
    rng: &mut Rng,
    max_iter: usize,
    tol: f64,
) -> Result<GmmOutcome> {
    let n = x.rows();
    if k == 0 || n <= k {
        return Err(Error::Cluster(format!(
            "gmm needs more points than components, got N={n} k={k}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::Cluster("max_iter must be at least 1".into()));
    }
    assert_eq!(init_means.shape(), (k, x.cols()), "bad init means shape");

    let global_var = global_variance(x);
    let mut variances = Matrix::zeros(k, x.cols());
    for c in 0..k {
        variances.row_mut(c).copy_from_slice(&global_var);
    }
    let mut model = Model {
        weights: vec![1.0 / k as f64; k],
        means: init_means.clone(),
        variances,
    };

    let mut ll_history = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut respread_events = 0;
    let mut resp = Matrix::zeros(n, k);

    for round in 0..max_iter {
        let (r, avg_ll) = e_step(x, &model);
        resp = r;
        ll_history.push(avg_ll);
        if round > 0 && avg_ll - prev_ll < tol {
            converged = true;
            break;
        }
        prev_ll = avg_ll;
        m_step(x, &resp, &mut model, rng, &mut respread_events);
        iterations += 1;
    }
    if !converged {
        // Make assignments consistent with the final parameters.
        let (r, avg_ll) = e_step(x, &model);
        resp = r;
        ll_history.push(avg_ll);
    }

    let assignments = resp.row_argmax();
    Ok(GmmOutcome {
        assignments,
        weights: model.weights,
        means: model.means,
        variances: model.variances,
        avg_log_likelihood: *ll_history.last().unwrap(),
        ll_history,
        iterations,
        converged,
        respread_events,
    })
}

/// EM initialized from an internal k-means run.
pub fn gmm_em(x: &Matrix, k: usize, rng: &mut Rng, max_iter: usize, tol: f64) -> Result<GmmOutcome> {
    let n = x.rows();
    if k == 0 || n <= k {
        return Err(Error::Cluster(format!(
            "gmm needs more points than components, got N={n} k={k}"
        )));
    }
    let init = kmeans(x, k, rng, 50, 1e-6)?;
    gmm_em_with_init(x, k, &init.centroids, rng, max_iter, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::hungarian_align;

    fn two_gaussians(rng: &mut Rng, n_per: usize) -> (Matrix, Vec<usize>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n_per {
            rows.push(vec![rng.normal(-5.0, 1.0), rng.normal(0.0, 1.0)]);
            labels.push(0);
        }
        for _ in 0..n_per {
            rows.push(vec![rng.normal(5.0, 1.0), rng.normal(1.0, 1.0)]);
            labels.push(1);
        }
        (Matrix::from_rows(&rows), labels)
    }

    #[test]
    fn recovers_two_separated_gaussians() {
        let mut rng = Rng::new(15);
        let (x, labels) = two_gaussians(&mut rng, 150);
        let out = gmm_em(&x, 2, &mut rng, 100, 1e-9).unwrap();
        let (_, acc) = hungarian_align(&out.assignments, &labels);
        assert!(acc > 0.98, "aligned accuracy {acc}");
    }

    #[test]
    fn k_one_closed_form() {
        let mut rng = Rng::new(8);
        let x = Matrix::from_fn(40, 3, |_, _| rng.uniform(-2.0, 2.0));
        let out = gmm_em(&x, 1, &mut rng, 50, 1e-12).unwrap();
        let mean = x.col_means();
        let n = x.rows() as f64;
        for j in 0..3 {
            assert!((out.means.get(0, j) - mean[j]).abs() < 1e-9);
            let var: f64 = (0..x.rows())
                .map(|i| (x.get(i, j) - mean[j]).powi(2))
                .sum::<f64>()
                / n;
            assert!((out.variances.get(0, j) - var).abs() < 1e-9);
        }
        assert!((out.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_non_decreasing() {
        let mut rng = Rng::new(19);
        let (x, _) = two_gaussians(&mut rng, 80);
        let out = gmm_em(&x, 3, &mut rng, 60, 0.0).unwrap();
        for w in out.ll_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "ll fell: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let mut rng = Rng::new(25);
        let (x, _) = two_gaussians(&mut rng, 50);
        let a = gmm_em(&x, 2, &mut Rng::new(7), 50, 1e-9).unwrap();
        let b = gmm_em(&x, 2, &mut Rng::new(7), 50, 1e-9).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.ll_history, b.ll_history);
    }

    #[test]
    fn rejects_too_few_points() {
        let x = Matrix::zeros(3, 2);
        let mut rng = Rng::new(1);
        assert!(gmm_em(&x, 3, &mut rng, 10, 1e-9).is_err());
    }
}

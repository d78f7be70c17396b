use super::{dot, Matrix, Rng};
use crate::{Error, Result};

/// Principal component analysis of a sample matrix.
///
/// `components` holds one unit-norm principal axis per row; `projected` is the
/// mean-centered data expressed in those axes. When the covariance rank is
/// lower than the number of requested components, the available components are
/// returned and `degenerate` is set.
#[derive(Debug, Clone)]
pub struct Pca {
    pub projected: Matrix,
    pub components: Matrix,
    pub mean: Vec<f64>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub requested_components: usize,
    pub degenerate: bool,
}

impl Pca {
    /// Maps the projection back to the original space (exact for data whose
    /// rank does not exceed the number of kept components).
    pub fn reconstruct(&self) -> Matrix {
        self.projected
            .matmul(&self.components)
            .add_row_broadcast(&self.mean)
    }
}

const MAX_POWER_ITERS: usize = 1000;
const DIRECTION_TOL: f64 = 1e-13;
const RANK_TOL: f64 = 1e-12;

/// Projects `x` onto its top `n_components` principal axes.
///
/// Eigenvectors of the sample covariance are extracted by the iterated power
/// method with deflation. Column signs are canonicalized so each component's
/// largest-magnitude loading is positive, which makes the projection
/// deterministic.
pub fn pca_project(x: &Matrix, n_components: usize) -> Result<Pca> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::Config(format!("pca needs at least 2 rows, got {n}")));
    }
    if n_components == 0 || n_components > n.min(d) {
        return Err(Error::Config(format!(
            "pca n_components {n_components} out of range for {n}x{d} data"
        )));
    }

    let mean = x.col_means();
    let centered = {
        let neg: Vec<f64> = mean.iter().map(|m| -m).collect();
        x.add_row_broadcast(&neg)
    };
    let cov = centered.matmul_tn(&centered).scale(1.0 / (n - 1) as f64);
    let total_variance: f64 = (0..d).map(|i| cov.get(i, i)).sum();

    let mut axes: Vec<Vec<f64>> = Vec::new();
    let mut eigenvalues: Vec<f64> = Vec::new();
    let mut degenerate = false;
    // Fixed-seed start vectors keep the whole decomposition deterministic.
    let mut start_rng = Rng::new(0x9c91_2a34);

    for _ in 0..n_components {
        let mut v: Vec<f64> = (0..d).map(|_| start_rng.uniform(-1.0, 1.0)).collect();
        normalize(&mut v);
        let mut lambda = 0.0;
        let mut rank_exhausted = false;

        for _ in 0..MAX_POWER_ITERS {
            let w = apply_deflated(&cov, &axes, &eigenvalues, &v);
            lambda = dot(&v, &w);
            let norm = dot(&w, &w).sqrt();
            if norm <= RANK_TOL * total_variance.max(1e-300) {
                rank_exhausted = true;
                break;
            }
            let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
            let drift = direction_change(&v, &next);
            v = next;
            if drift < DIRECTION_TOL {
                break;
            }
        }

        if rank_exhausted || lambda <= RANK_TOL * total_variance.max(1e-300) {
            degenerate = true;
            break;
        }

        canonicalize_sign(&mut v);
        axes.push(v);
        eigenvalues.push(lambda);
    }

    if axes.is_empty() {
        return Err(Error::Config(
            "pca found no component with positive variance".into(),
        ));
    }

    let components = Matrix::from_rows(&axes);
    let projected = centered.matmul_nt(&components);
    let ratio: Vec<f64> = eigenvalues
        .iter()
        .map(|l| if total_variance > 0.0 { l / total_variance } else { 0.0 })
        .collect();

    Ok(Pca {
        projected,
        components,
        mean,
        explained_variance: eigenvalues,
        explained_variance_ratio: ratio,
        requested_components: n_components,
        degenerate,
    })
}

/// `(cov - sum_i lambda_i u_i u_i^T) v`, applied without forming the deflated
/// matrix.
fn apply_deflated(cov: &Matrix, axes: &[Vec<f64>], eigenvalues: &[f64], v: &[f64]) -> Vec<f64> {
    let d = cov.rows();
    let mut w = vec![0.0; d];
    for i in 0..d {
        w[i] = dot(cov.row(i), v);
    }
    for (axis, &lambda) in axes.iter().zip(eigenvalues) {
        let proj = lambda * dot(axis, v);
        for (wi, &ai) in w.iter_mut().zip(axis) {
            *wi -= proj * ai;
        }
    }
    w
}

fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    assert!(norm > 0.0, "cannot normalize a zero vector");
    for x in v.iter_mut() {
        *x /= norm;
    }
}

/// Change in direction between successive unit iterates, sign-insensitive.
fn direction_change(prev: &[f64], next: &[f64]) -> f64 {
    let mut same = 0.0;
    let mut flip = 0.0;
    for (&p, &n) in prev.iter().zip(next) {
        same += (n - p) * (n - p);
        flip += (n + p) * (n + p);
    }
    same.min(flip).sqrt()
}

fn canonicalize_sign(v: &mut [f64]) {
    let mut idx = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form eigenvalues of a symmetric 2x2 matrix, descending.
    fn eig2(a: f64, b: f64, c: f64) -> (f64, f64) {
        let tr = a + c;
        let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
        ((tr + disc) / 2.0, (tr - disc) / 2.0)
    }

    #[test]
    fn line_in_5d_is_rank_one() {
        let mut rng = Rng::new(2);
        let dir = [0.3, -1.0, 0.5, 2.0, 0.1];
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| {
                let t = rng.uniform(-3.0, 3.0);
                dir.iter().map(|d| d * t + 0.7).collect()
            })
            .collect();
        let pca = pca_project(&Matrix::from_rows(&rows), 1).unwrap();
        assert!(pca.explained_variance_ratio[0] > 0.999);
        assert!(!pca.degenerate);
    }

    #[test]
    fn isotropic_2d_ratio_matches_closed_form_oracle() {
        let mut rng = Rng::new(13);
        let rows: Vec<Vec<f64>> = (0..2000)
            .map(|_| vec![rng.normal(0.0, 1.0), rng.normal(0.0, 1.0)])
            .collect();
        let x = Matrix::from_rows(&rows);
        let pca = pca_project(&x, 1).unwrap();

        // Oracle: full eigendecomposition of the 2x2 sample covariance.
        let mean = x.col_means();
        let mut cov = [0.0; 3]; // a, b, c
        for i in 0..x.rows() {
            let dx = x.get(i, 0) - mean[0];
            let dy = x.get(i, 1) - mean[1];
            cov[0] += dx * dx;
            cov[1] += dx * dy;
            cov[2] += dy * dy;
        }
        let denom = (x.rows() - 1) as f64;
        let (l1, l2) = eig2(cov[0] / denom, cov[1] / denom, cov[2] / denom);
        let oracle_ratio = l1 / (l1 + l2);

        assert!((pca.explained_variance_ratio[0] - oracle_ratio).abs() < 1e-6);
        assert!((oracle_ratio - 0.5).abs() < 0.05);
    }

    #[test]
    fn low_rank_reconstruction_is_lossless() {
        let mut rng = Rng::new(4);
        // Rank-2 data in 6 dimensions.
        let a = [1.0, 0.0, 2.0, -1.0, 0.5, 0.0];
        let b = [0.0, 1.0, -1.0, 0.5, 0.0, 2.0];
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let s = rng.uniform(-2.0, 2.0);
                let t = rng.uniform(-2.0, 2.0);
                a.iter().zip(&b).map(|(x, y)| s * x + t * y + 3.0).collect()
            })
            .collect();
        let x = Matrix::from_rows(&rows);
        let pca = pca_project(&x, 2).unwrap();
        let err = pca.reconstruct().sub(&x).max_abs();
        assert!(err < 1e-8, "reconstruction error {err}");
    }

    #[test]
    fn degenerate_rank_is_flagged() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let pca = pca_project(&Matrix::from_rows(&rows), 2).unwrap();
        assert!(pca.degenerate);
        assert_eq!(pca.components.rows(), 1);
    }

    #[test]
    fn sign_canonicalization_largest_loading_positive() {
        let mut rng = Rng::new(8);
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|_| {
                let t = rng.uniform(-1.0, 1.0);
                vec![-2.0 * t, 0.3 * t, t * 0.1]
            })
            .collect();
        let pca = pca_project(&Matrix::from_rows(&rows), 1).unwrap();
        let axis = pca.components.row(0);
        let max_idx = (0..3).max_by(|&a, &b| axis[a].abs().total_cmp(&axis[b].abs())).unwrap();
        assert!(axis[max_idx] > 0.0);
    }

    #[test]
    fn preconditions_rejected() {
        let x = Matrix::zeros(1, 3);
        assert!(pca_project(&x, 1).is_err());
        let x = Matrix::zeros(5, 3);
        assert!(pca_project(&x, 4).is_err());
    }
}

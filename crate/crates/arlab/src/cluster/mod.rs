//! Latent-space clusterability evaluation: k-means and a Gaussian mixture,
//! scored by Hungarian-aligned accuracy, adjusted Rand index, V-measure, and
//! the silhouette coefficient.

mod gmm;
mod hungarian;
mod kmeans;
mod metrics;

pub use gmm::{gmm_em, gmm_em_with_init, GmmOutcome};
pub use hungarian::hungarian_align;
pub use kmeans::{kmeans, kmeans_restarts, KmeansOutcome};
pub use metrics::{ari, silhouette, v_measure};

use serde::{Deserialize, Serialize};

use crate::linalg::{Matrix, Rng};
use crate::{Error, Result};

/// Number of independently seeded k-means restarts used by
/// [`evaluate_latents`].
pub const KMEANS_RESTARTS: usize = 10;
const MAX_ITER: usize = 100;
const TOL: f64 = 1e-6;

/// One clustering algorithm's assignments and the four quality metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub algorithm: String,
    pub assignments: Vec<usize>,
    pub aligned_accuracy: f64,
    pub ari: f64,
    pub v_measure: f64,
    pub silhouette: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ClusterReport {
    fn build(
        algorithm: &str,
        assignments: Vec<usize>,
        labels: &[usize],
        x: &Matrix,
        iterations: usize,
        converged: bool,
    ) -> Result<Self> {
        let (_, aligned_accuracy) = hungarian_align(&assignments, labels);
        let ari = ari(&assignments, labels);
        let v = v_measure(&assignments, labels);
        let sil = silhouette(x, &assignments)?;
        debug_assert!((0.0..=1.0).contains(&aligned_accuracy));
        debug_assert!((-1.0..=1.0 + 1e-12).contains(&ari));
        debug_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        debug_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&sil));
        Ok(ClusterReport {
            algorithm: algorithm.to_string(),
            assignments,
            aligned_accuracy,
            ari,
            v_measure: v,
            silhouette: sil,
            iterations,
            converged,
        })
    }
}

/// Runs both clustering algorithms on a latent matrix and scores each against
/// the true labels: k-means as the best of [`KMEANS_RESTARTS`] seeded restarts
/// by objective, then the mixture model initialized from the winning k-means
/// centroids.
pub fn evaluate_latents(
    latents: &Matrix,
    labels: &[usize],
    k: usize,
    rng: &mut Rng,
) -> Result<(ClusterReport, ClusterReport)> {
    if labels.len() != latents.rows() {
        return Err(Error::Cluster(format!(
            "{} labels for {} latent rows",
            labels.len(),
            latents.rows()
        )));
    }
    if k < 2 {
        return Err(Error::Cluster(format!("need k >= 2 clusters, got {k}")));
    }

    let km = kmeans_restarts(latents, k, rng, KMEANS_RESTARTS, MAX_ITER, TOL)?;
    let gm = gmm_em_with_init(latents, k, &km.centroids, rng, MAX_ITER, TOL)?;

    let km_report = ClusterReport::build(
        "kmeans",
        km.assignments,
        labels,
        latents,
        km.iterations,
        km.converged,
    )?;
    let gm_report = ClusterReport::build(
        "gmm",
        gm.assignments,
        labels,
        latents,
        gm.iterations,
        gm.converged,
    )?;
    Ok((km_report, gm_report))
}

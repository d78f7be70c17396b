//! Lloyd's algorithm with k-means++ seeding.

use crate::linalg::{sq_dist, Matrix, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct KmeansOutcome {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    /// Within-cluster sum of squares at the final assignment.
    pub inertia: f64,
    /// Objective after every assignment step; non-increasing.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Non-empty clusters at the final assignment; fewer than `k` flags a
    /// degenerate run (e.g. fewer distinct points than clusters).
    pub effective_clusters: usize,
    /// Times an empty cluster was re-seeded to the farthest point.
    pub reseed_events: usize,
}

fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = sq_dist(point, centroids.row(0));
    for c in 1..centroids.rows() {
        let d = sq_dist(point, centroids.row(c));
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

fn assign(x: &Matrix, centroids: &Matrix) -> (Vec<usize>, f64) {
    let mut assignments = Vec::with_capacity(x.rows());
    let mut inertia = 0.0;
    for i in 0..x.rows() {
        let (c, d) = nearest(x.row(i), centroids);
        assignments.push(c);
        inertia += d;
    }
    (assignments, inertia)
}

/// D^2-weighted k-means++ seeding.
fn seed_centroids(x: &Matrix, k: usize, rng: &mut Rng) -> Matrix {
    let n = x.rows();
    let mut centroids = Matrix::zeros(k, x.cols());
    let first = rng.index(n);
    centroids.row_mut(0).copy_from_slice(x.row(first));

    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut target = rng.next_f64() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            // All points coincide with an existing centroid.
            rng.index(n)
        };
        centroids.row_mut(c).copy_from_slice(x.row(chosen));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), centroids.row(c)));
        }
    }
    centroids
}

/// Runs k-means++ seeding followed by Lloyd iterations, stopping when the
/// largest centroid shift drops below `tol` or after `max_iter` rounds. Empty
/// clusters are re-seeded to the farthest point from their previous centroid.
pub fn kmeans(x: &Matrix, k: usize, rng: &mut Rng, max_iter: usize, tol: f64) -> Result<KmeansOutcome> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(Error::Cluster(format!("k={k} out of range for {n} points")));
    }
    if max_iter == 0 {
        return Err(Error::Cluster("max_iter must be at least 1".into()));
    }

    let mut centroids = seed_centroids(x, k, rng);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut reseed_events = 0;

    for _ in 0..max_iter {
        iterations += 1;
        let (assignments, inertia) = assign(x, &centroids);
        history.push(inertia);

        // Mean update.
        let mut sums = Matrix::zeros(k, x.cols());
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            let row = sums.row_mut(c);
            for (s, &v) in row.iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let mut new_centroids = Matrix::zeros(k, x.cols());
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                let dst = new_centroids.row_mut(c);
                for (d, &s) in dst.iter_mut().zip(sums.row(c)) {
                    *d = s * inv;
                }
            } else {
                // Re-seed to the farthest point from this cluster's previous
                // centroid, skipping points already claimed this round.
                let mut far = usize::MAX;
                let mut far_d = f64::NEG_INFINITY;
                for i in 0..n {
                    if taken.contains(&i) {
                        continue;
                    }
                    let d = sq_dist(x.row(i), centroids.row(c));
                    if d > far_d {
                        far_d = d;
                        far = i;
                    }
                }
                new_centroids.row_mut(c).copy_from_slice(x.row(far));
                taken.push(far);
                reseed_events += 1;
            }
        }

        let shift = (0..k)
            .map(|c| sq_dist(centroids.row(c), new_centroids.row(c)).sqrt())
            .fold(0.0f64, f64::max);
        centroids = new_centroids;
        if shift < tol {
            converged = true;
            break;
        }
    }

    // Final assignment consistent with the final centroids.
    let (assignments, inertia) = assign(x, &centroids);
    history.push(inertia);
    let mut seen = vec![false; k];
    for &c in &assignments {
        seen[c] = true;
    }
    let effective_clusters = seen.iter().filter(|&&s| s).count();

    Ok(KmeansOutcome {
        assignments,
        centroids,
        inertia,
        objective_history: history,
        iterations,
        converged,
        effective_clusters,
        reseed_events,
    })
}

/// Best of `restarts` independently seeded runs, by objective; ties keep the
/// lowest restart index.
pub fn kmeans_restarts(
    x: &Matrix,
    k: usize,
    rng: &mut Rng,
    restarts: usize,
    max_iter: usize,
    tol: f64,
) -> Result<KmeansOutcome> {
    assert!(restarts >= 1, "need at least one restart");
    let seeds: Vec<u64> = (0..restarts).map(|_| rng.next_u64()).collect();
    let mut best: Option<KmeansOutcome> = None;
    for seed in seeds {
        let outcome = kmeans(x, k, &mut Rng::new(seed), max_iter, tol)?;
        let better = best.as_ref().is_none_or(|b| outcome.inertia < b.inertia);
        if better {
            best = Some(outcome);
        }
    }
    Ok(best.expect("at least one restart ran"))
}

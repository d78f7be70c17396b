//! Partition-comparison metrics: adjusted Rand index, V-measure, and the
//! silhouette coefficient.

use crate::linalg::{sq_dist, Matrix};
use crate::{Error, Result};

struct Contingency {
    counts: Vec<Vec<usize>>,
    row_sums: Vec<usize>,
    col_sums: Vec<usize>,
    n: usize,
}

fn contingency(pred: &[usize], labels: &[usize]) -> Contingency {
    assert_eq!(pred.len(), labels.len(), "labeling length mismatch");
    assert!(!pred.is_empty(), "empty labelings");
    let kp = pred.iter().max().unwrap() + 1;
    let kt = labels.iter().max().unwrap() + 1;
    let mut counts = vec![vec![0usize; kt]; kp];
    for (&p, &t) in pred.iter().zip(labels) {
        counts[p][t] += 1;
    }
    let row_sums: Vec<usize> = counts.iter().map(|r| r.iter().sum()).collect();
    let mut col_sums = vec![0usize; kt];
    for row in &counts {
        for (c, &v) in col_sums.iter_mut().zip(row) {
            *c += v;
        }
    }
    Contingency {
        counts,
        row_sums,
        col_sums,
        n: pred.len(),
    }
}

fn comb2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Whether two labelings induce the same partition (up to renaming).
fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let table = contingency(a, b);
    table.counts.iter().all(|row| row.iter().filter(|&&v| v > 0).count() <= 1)
        && (0..table.col_sums.len()).all(|j| {
            table.counts.iter().filter(|row| row[j] > 0).count() <= 1
        })
}

/// Adjusted Rand index via the pair-counting contingency formula. The
/// degenerate zero-denominator case (both partitions single-block or both
/// all-singletons) returns 1 when the partitions coincide, 0 otherwise.
pub fn ari(pred: &[usize], labels: &[usize]) -> f64 {
    let table = contingency(pred, labels);
    let index: f64 = table
        .counts
        .iter()
        .flat_map(|row| row.iter())
        .map(|&v| comb2(v))
        .sum();
    let sum_a: f64 = table.row_sums.iter().map(|&v| comb2(v)).sum();
    let sum_b: f64 = table.col_sums.iter().map(|&v| comb2(v)).sum();
    let pairs = comb2(table.n);
    if pairs == 0.0 {
        return 1.0;
    }
    let expected = sum_a * sum_b / pairs;
    let max_index = (sum_a + sum_b) / 2.0;
    let denom = max_index - expected;
    if denom == 0.0 {
        return if same_partition(pred, labels) { 1.0 } else { 0.0 };
    }
    (index - expected) / denom
}

/// Entropy of a partition from its block sizes, natural log, 0 ln 0 := 0.
fn entropy(sizes: &[usize], n: usize) -> f64 {
    let n = n as f64;
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// V-measure: harmonic mean of entropy-based homogeneity and completeness.
/// A partition with zero entropy counts as perfectly homogeneous (resp.
/// complete), so two single-block partitions score 1.
pub fn v_measure(pred: &[usize], labels: &[usize]) -> f64 {
    let table = contingency(pred, labels);
    let n = table.n as f64;
    let h_classes = entropy(&table.col_sums, table.n);
    let h_clusters = entropy(&table.row_sums, table.n);

    // H(classes | clusters)
    let mut h_c_given_k = 0.0;
    for (row, &row_sum) in table.counts.iter().zip(&table.row_sums) {
        if row_sum == 0 {
            continue;
        }
        for &v in row {
            if v > 0 {
                let joint = v as f64 / n;
                h_c_given_k -= joint * ((v as f64 / row_sum as f64).ln());
            }
        }
    }
    // H(clusters | classes)
    let mut h_k_given_c = 0.0;
    for j in 0..table.col_sums.len() {
        let col_sum = table.col_sums[j];
        if col_sum == 0 {
            continue;
        }
        for row in &table.counts {
            let v = row[j];
            if v > 0 {
                let joint = v as f64 / n;
                h_k_given_c -= joint * ((v as f64 / col_sum as f64).ln());
            }
        }
    }

    let homogeneity = if h_classes == 0.0 {
        1.0
    } else {
        1.0 - h_c_given_k / h_classes
    };
    let completeness = if h_clusters == 0.0 {
        1.0
    } else {
        1.0 - h_k_given_c / h_clusters
    };
    if homogeneity + completeness == 0.0 {
        0.0
    } else {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    }
}

/// Mean silhouette coefficient under Euclidean distance: per sample,
/// `(b - a) / max(a, b)` with `a` the mean intra-cluster distance (excluding
/// self) and `b` the smallest mean distance to another cluster. Points in
/// singleton clusters contribute 0. Errors when fewer than two clusters are
/// present.
pub fn silhouette(x: &Matrix, pred: &[usize]) -> Result<f64> {
    let n = x.rows();
    assert_eq!(n, pred.len(), "one cluster index per row required");
    let k = pred.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &c in pred {
        sizes[c] += 1;
    }
    let occupied = sizes.iter().filter(|&&s| s > 0).count();
    if occupied < 2 {
        return Err(Error::Cluster(
            "silhouette needs at least two non-empty clusters".into(),
        ));
    }

    // dist_sums[i][c] = sum of distances from point i to cluster c.
    let mut dist_sums = vec![0.0f64; n * k];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sq_dist(x.row(i), x.row(j)).sqrt();
            dist_sums[i * k + pred[j]] += d;
            dist_sums[j * k + pred[i]] += d;
        }
    }

    let mut total = 0.0;
    for i in 0..n {
        let own = pred[i];
        if sizes[own] == 1 {
            continue; // contributes 0
        }
        let a = dist_sums[i * k + own] / (sizes[own] - 1) as f64;
        let mut b = f64::INFINITY;
        for c in 0..k {
            if c != own && sizes[c] > 0 {
                b = b.min(dist_sums[i * k + c] / sizes[c] as f64);
            }
        }
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

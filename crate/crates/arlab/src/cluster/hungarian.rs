//! Kuhn-Munkres assignment in O(n^3), used to align cluster indices with
//! class labels.

/// Minimum-cost perfect assignment on a square cost matrix. Returns the
/// column assigned to each row and the total cost.
pub(crate) fn min_cost_assignment(cost: &[Vec<i64>]) -> (Vec<usize>, i64) {
    let n = cost.len();
    assert!(n > 0, "empty cost matrix");
    assert!(cost.iter().all(|r| r.len() == n), "cost matrix must be square");
    const INF: i64 = i64::MAX / 4;

    // Potentials over rows (u) and columns (v); p[j] is the row matched to
    // column j, with index 0 used as a virtual root.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    let total = (0..n).map(|i| cost[i][assignment[i]]).sum();
    (assignment, total)
}

/// Contingency counts between two labelings, zero-padded to a square matrix.
pub(crate) fn square_contingency(pred: &[usize], labels: &[usize]) -> Vec<Vec<i64>> {
    assert_eq!(pred.len(), labels.len(), "labeling length mismatch");
    assert!(!pred.is_empty(), "empty labelings");
    let kp = pred.iter().max().unwrap() + 1;
    let kt = labels.iter().max().unwrap() + 1;
    let n = kp.max(kt);
    let mut counts = vec![vec![0i64; n]; n];
    for (&p, &t) in pred.iter().zip(labels) {
        counts[p][t] += 1;
    }
    counts
}

/// Aligns cluster indices to class labels by maximum-agreement assignment.
/// Returns the class matched to each cluster (padded square, so clusters
/// beyond the class count map to dummy classes) and the aligned accuracy.
pub fn hungarian_align(pred: &[usize], labels: &[usize]) -> (Vec<usize>, f64) {
    let counts = square_contingency(pred, labels);
    let negated: Vec<Vec<i64>> = counts
        .iter()
        .map(|row| row.iter().map(|&c| -c).collect())
        .collect();
    let (assignment, neg_total) = min_cost_assignment(&negated);
    let accuracy = (-neg_total) as f64 / pred.len() as f64;
    (assignment, accuracy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    /// Max agreement by trying every permutation; usable up to n ~ 8.
    pub(crate) fn brute_force_max_agreement(counts: &[Vec<i64>]) -> i64 {
        let n = counts.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = i64::MIN;
        permute(&mut perm, 0, &mut |p| {
            let score: i64 = (0..n).map(|i| counts[i][p[i]]).sum();
            if score > best {
                best = score;
            }
        });
        best
    }

    fn permute(perm: &mut Vec<usize>, at: usize, f: &mut impl FnMut(&[usize])) {
        if at == perm.len() {
            f(perm);
            return;
        }
        for i in at..perm.len() {
            perm.swap(at, i);
            permute(perm, at + 1, f);
            perm.swap(at, i);
        }
    }

    #[test]
    fn permuted_labels_align_perfectly() {
        let labels = vec![0, 0, 1, 1, 2, 2, 2];
        let pred: Vec<usize> = labels.iter().map(|&l| (l + 1) % 3).collect();
        let (mapping, acc) = hungarian_align(&pred, &labels);
        assert_eq!(acc, 1.0);
        for (&p, &l) in pred.iter().zip(&labels) {
            assert_eq!(mapping[p], l);
        }
    }

    #[test]
    fn random_3x3_matches_factorial_brute_force() {
        let mut rng = Rng::new(6);
        for _ in 0..50 {
            let n = 60;
            let pred: Vec<usize> = (0..n).map(|_| rng.index(3)).collect();
            let labels: Vec<usize> = (0..n).map(|_| rng.index(3)).collect();
            let counts = square_contingency(&pred, &labels);
            let best = brute_force_max_agreement(&counts);
            let (_, acc) = hungarian_align(&pred, &labels);
            assert_eq!((acc * n as f64).round() as i64, best);
        }
    }

    #[test]
    fn single_cluster_balanced_two_classes_is_half() {
        let pred = vec![0; 10];
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let (_, acc) = hungarian_align(&pred, &labels);
        assert!((acc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rectangular_contingencies_are_padded() {
        // 4 clusters against 2 classes.
        let pred = vec![0, 1, 2, 3, 0, 1];
        let labels = vec![0, 0, 1, 1, 0, 1];
        let (mapping, acc) = hungarian_align(&pred, &labels);
        assert_eq!(mapping.len(), 4);
        // Optimal: cluster0->class0 (2 hits) plus one of the size-1 clusters
        // on class1; the other two clusters land on dummy columns.
        assert!((acc - 3.0 / 6.0).abs() < 1e-12);
    }
}

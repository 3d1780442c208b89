//! Misclassification against a reference partition under the best matching
//! of cluster labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ClusterPartition;

/// Largest cluster count accepted by [`misclassified_bruteforce`].
pub const BRUTE_FORCE_MAX_K: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub correctly_classified: usize,
    pub misclassified: usize,
    /// For each truth cluster, the predicted cluster it is matched to.
    pub bijection: Vec<Option<usize>>,
}

/// `overlap[a][b] = |truth_a ∩ predicted_b|`.
pub fn overlap_matrix(
    predicted: &ClusterPartition,
    truth: &ClusterPartition,
) -> Result<Vec<Vec<usize>>> {
    if predicted.n() != truth.n() {
        return Err(Error::DimensionMismatch {
            expected: truth.n(),
            got: predicted.n(),
        });
    }
    let mut overlap = vec![vec![0usize; predicted.k()]; truth.k()];
    for (&t, &p) in truth.assignment().iter().zip(predicted.assignment()) {
        overlap[t][p] += 1;
    }
    Ok(overlap)
}

/// Minimum-cost perfect assignment on a square matrix (Hungarian method with
/// potentials). Returns `col_of_row`.
fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based arrays; index 0 is the virtual start column.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
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
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0; n];
    for j in 1..=n {
        col_of_row[row_of_col[j] - 1] = j - 1;
    }
    col_of_row
}

/// `n` minus the largest total overlap over injective matchings of clusters.
/// Clusters left unmatched (when the counts differ) contribute nothing.
pub fn misclassified_count(
    predicted: &ClusterPartition,
    truth: &ClusterPartition,
) -> Result<MatchResult> {
    let overlap = overlap_matrix(predicted, truth)?;
    let (kt, kp) = (truth.k(), predicted.k());
    let size = kt.max(kp);
    let cost: Vec<Vec<i64>> = (0..size)
        .map(|a| {
            (0..size)
                .map(|b| {
                    if a < kt && b < kp {
                        -(overlap[a][b] as i64)
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect();
    let assignment = hungarian(&cost);
    let bijection: Vec<Option<usize>> = (0..kt)
        .map(|a| Some(assignment[a]).filter(|&b| b < kp))
        .collect();
    let correct: usize = bijection
        .iter()
        .enumerate()
        .filter_map(|(a, b)| b.map(|b| overlap[a][b]))
        .sum();
    let result = MatchResult {
        correctly_classified: correct,
        misclassified: truth.n() - correct,
        bijection,
    };
    if cfg!(debug_assertions) && size <= BRUTE_FORCE_MAX_K {
        debug_assert_eq!(
            Some(result.misclassified),
            misclassified_bruteforce(predicted, truth).ok()
        );
    }
    Ok(result)
}

/// Exhaustive version of [`misclassified_count`] for at most six clusters on
/// either side.
pub fn misclassified_bruteforce(
    predicted: &ClusterPartition,
    truth: &ClusterPartition,
) -> Result<usize> {
    let overlap = overlap_matrix(predicted, truth)?;
    let (kt, kp) = (truth.k(), predicted.k());
    let largest = kt.max(kp);
    if largest > BRUTE_FORCE_MAX_K {
        return Err(Error::TooLarge {
            n: largest,
            limit: BRUTE_FORCE_MAX_K,
        });
    }
    // Inject the smaller side into the larger one.
    let weight = |small: usize, large: usize| {
        if kt <= kp {
            overlap[small][large]
        } else {
            overlap[large][small]
        }
    };
    fn best(
        depth: usize,
        small: usize,
        large: usize,
        used: &mut [bool],
        weight: &dyn Fn(usize, usize) -> usize,
    ) -> usize {
        if depth == small {
            return 0;
        }
        let mut top = 0;
        for l in 0..large {
            if !used[l] {
                used[l] = true;
                top = top.max(weight(depth, l) + best(depth + 1, small, large, used, weight));
                used[l] = false;
            }
        }
        top
    }
    let mut used = vec![false; largest];
    let correct = best(0, kt.min(kp), largest, &mut used, &weight);
    Ok(truth.n() - correct)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(k: usize, labels: &[usize]) -> ClusterPartition {
        ClusterPartition::new(k, labels.to_vec()).unwrap()
    }

    #[test]
    fn identical_and_relabelled() {
        let t = part(3, &[0, 0, 1, 1, 2, 2]);
        assert_eq!(misclassified_count(&t, &t).unwrap().misclassified, 0);
        let shifted = part(3, &[1, 1, 2, 2, 0, 0]);
        let r = misclassified_count(&shifted, &t).unwrap();
        assert_eq!(r.misclassified, 0);
        assert_eq!(r.bijection, vec![Some(1), Some(2), Some(0)]);
        assert_eq!(misclassified_bruteforce(&t, &t).unwrap(), 0);
    }

    #[test]
    fn six_item_example() {
        // truth {1,2,4},{3,5,6}; predicted {1,2,3},{4,5,6} (one-based items).
        let truth = part(2, &[0, 0, 1, 0, 1, 1]);
        let pred = part(2, &[0, 0, 0, 1, 1, 1]);
        let r = misclassified_count(&pred, &truth).unwrap();
        assert_eq!((r.correctly_classified, r.misclassified), (4, 2));
        assert_eq!(misclassified_bruteforce(&pred, &truth).unwrap(), 2);
    }

    #[test]
    fn unequal_counts_use_injections() {
        let truth = part(5, &[0, 1, 2, 3, 4]);
        let pred = part(2, &[0, 0, 1, 1, 1]);
        let r = misclassified_count(&pred, &truth).unwrap();
        assert_eq!(r.misclassified, 3);
        assert_eq!(r.bijection.iter().filter(|b| b.is_some()).count(), 2);
        assert_eq!(misclassified_bruteforce(&pred, &truth).unwrap(), 3);
        assert_eq!(misclassified_count(&truth, &pred).unwrap().misclassified, 3);
    }

    #[test]
    fn size_mismatch_and_limits() {
        let a = part(2, &[0, 1]);
        let b = part(2, &[0, 1, 1]);
        assert!(misclassified_count(&a, &b).is_err());
        let big = part(7, &[0, 1, 2, 3, 4, 5, 6]);
        assert!(matches!(
            misclassified_bruteforce(&big, &big),
            Err(Error::TooLarge { .. })
        ));
        assert_eq!(misclassified_count(&big, &big).unwrap().misclassified, 0);
    }

    #[test]
    fn hungarian_small_matrix() {
        let cost = vec![vec![4, 1, 3], vec![2, 0, 5], vec![3, 2, 2]];
        let a = hungarian(&cost);
        let total: i64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5);
    }
}

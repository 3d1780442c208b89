//! Planting an all-ones minor with balanced boundary columns (two clusters).
//!
//! With `S` holding `s` items from each cluster, every entry of `S x S` is set
//! to `+1` and each column outside `S` is flipped until it sums to zero over
//! `S`. The indicator of `S` is then an exact eigenvector with eigenvalue
//! `|S|`, unrelated to the planted partition.

use rand::seq::index::sample;

use super::{PairChange, Plan};
use crate::adversary::ledger::{PoisonInfo, StrategyInfo};
use crate::error::{Error, Result};
use crate::matrix::RealMatrix;
use crate::model::ClusterPartition;
use crate::rng::SimRng;

pub(super) fn plan(
    input: &RealMatrix,
    truth: &ClusterPartition,
    epsilon: f64,
    rng: &mut SimRng,
) -> Result<Plan> {
    let n = input.n();
    if truth.k() != 2 {
        return Err(Error::InvalidArgument(format!(
            "spectral poisoning needs k = 2, got {}",
            truth.k()
        )));
    }
    let per_cluster = (2.0 * epsilon * n as f64 - 1e-9).ceil().max(0.0) as usize;
    let size = 2 * per_cluster;
    if size < 2 || size >= n {
        return Err(Error::InvalidArgument(format!(
            "poisoned set of size {size} is degenerate for n = {n} (epsilon = {epsilon})"
        )));
    }
    let clusters = truth.clusters();
    let mut set = Vec::with_capacity(size);
    for members in &clusters {
        if members.len() < per_cluster {
            return Err(Error::InvalidArgument(format!(
                "cluster of size {} cannot supply {per_cluster} items",
                members.len()
            )));
        }
        set.extend(
            sample(rng, members.len(), per_cluster)
                .into_iter()
                .map(|t| members[t]),
        );
    }
    set.sort_unstable();
    let mut in_set = vec![false; n];
    for &i in &set {
        in_set[i] = true;
    }

    let mut changes = Vec::new();
    for (a, &i) in set.iter().enumerate() {
        for &j in &set[a + 1..] {
            if input.get(i, j) != 1.0 {
                changes.push(PairChange { i, j, new: 1.0 });
            }
        }
    }
    let minor_edits = 2 * changes.len();

    // Column sums over S are even because |S| is even; flip the surplus sign
    // starting from the lowest index.
    for j in (0..n).filter(|&j| !in_set[j]) {
        let sum: f64 = set.iter().map(|&i| input.get(i, j)).sum();
        let surplus = sum.round() as i64;
        let sign = if surplus > 0 { 1.0 } else { -1.0 };
        let flips = (surplus.unsigned_abs() / 2) as usize;
        for &i in set.iter().filter(|&&i| input.get(i, j) == sign).take(flips) {
            changes.push(PairChange { i, j, new: -sign });
        }
    }
    let balance_edits = 2 * changes.len() - minor_edits;

    let norm = 1.0 / (size as f64).sqrt();
    let vector = (0..n).map(|i| if in_set[i] { norm } else { 0.0 }).collect();
    Ok(Plan {
        changes,
        info: StrategyInfo::Poison(PoisonInfo {
            set,
            vector,
            minor_edits,
            balance_edits,
        }),
        notes: Vec::new(),
    })
}

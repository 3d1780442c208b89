//! Eigenvalue-ratio detection of `k`, tentative clusters from coordinate
//! closeness in the leading eigenvectors, and pivot sampling.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{top_eigenpairs_trailing_estimate, RealMatrix, Spectrum, DEFAULT_EIGEN_TOL};
use crate::model::ClusterPartition;
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralConfig {
    /// Coordinate threshold; `None` means `1 / (2 sqrt(2n))`.
    pub threshold_t: Option<f64>,
    pub ratio_cutoff: f64,
    /// Largest `k` tried; `None` means `min(n, 64)`.
    pub k_max: Option<usize>,
    /// Pivots tried per cluster; `None` means `n`.
    pub pivot_attempt_cap: Option<usize>,
    pub eigen_tol: f64,
    /// Relative change at which the trailing eigenvalue estimate is accepted.
    pub settle_tol: f64,
    pub eigen_max_iter: usize,
    /// `|lambda_k| < zero_guard * |lambda_1|` counts as an infinite ratio.
    pub zero_guard: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            threshold_t: None,
            ratio_cutoff: 2.0,
            k_max: None,
            pivot_attempt_cap: None,
            eigen_tol: DEFAULT_EIGEN_TOL,
            settle_tol: 1e-3,
            eigen_max_iter: 3000,
            zero_guard: 1e-12,
        }
    }
}

impl SpectralConfig {
    pub fn threshold(&self, n: usize) -> f64 {
        self.threshold_t
            .unwrap_or_else(|| 1.0 / (2.0 * (2.0 * n as f64).sqrt()))
    }

    pub fn k_max_for(&self, n: usize) -> usize {
        self.k_max.unwrap_or(64).min(n)
    }

    fn validate(&self) -> Result<()> {
        if let Some(t) = self.threshold_t {
            if !(t > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "threshold must be positive, got {t}"
                )));
            }
        }
        if !(self.ratio_cutoff > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ratio cutoff must exceed 1, got {}",
                self.ratio_cutoff
            )));
        }
        Ok(())
    }
}

/// Smallest `k >= 2` (up to `k_max` and the spectrum length) with
/// `|lambda_{k-1}| / |lambda_k| > ratio_cutoff`.
pub fn detect_k(spec: &Spectrum, cfg: &SpectralConfig) -> Result<usize> {
    let values = spec.values();
    let k_max = cfg.k_max.unwrap_or(64);
    let top = values.first().map_or(0.0, |v| v.abs());
    for k in 2..=k_max.min(values.len()) {
        if gap_at(&values, k, top, cfg) {
            return Ok(k);
        }
    }
    Err(Error::NoSpectralGap {
        available: values.len(),
        k_max,
    })
}

fn gap_at(values: &[f64], k: usize, top: f64, cfg: &SpectralConfig) -> bool {
    let prev = values[k - 2].abs();
    let cur = values[k - 1].abs();
    cur < cfg.zero_guard * top || prev > cfg.ratio_cutoff * cur
}

/// Items `j` with `|v_h[i] - v_h[j]| <= t` for every vector `v_h`.
fn close_to(
    vectors: &[Vec<f64>],
    i: usize,
    t: f64,
    candidates: impl Iterator<Item = usize>,
) -> Vec<usize> {
    candidates
        .filter(|&j| vectors.iter().all(|v| (v[i] - v[j]).abs() <= t))
        .collect()
}

/// Tentative cluster `S_i` of every item.
pub fn get_clusters(vectors: &[Vec<f64>], t: f64) -> Result<Vec<Vec<usize>>> {
    let n = vectors.first().map_or(0, Vec::len);
    if let Some(v) = vectors.iter().find(|v| v.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    Ok((0..n).map(|i| close_to(vectors, i, t, 0..n)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub partition: ClusterPartition,
    pub detected_k: usize,
    /// The eigenvalues used for detection, largest first.
    pub eigenvalues: Vec<f64>,
    pub pivot_attempts: usize,
}

/// Detects `k`, then carves off `k - 1` clusters around sampled pivots whose
/// tentative cluster keeps at least `n / (2k)` unassigned items. The rest
/// forms the last cluster.
pub fn spectral_cluster(
    mpp: &RealMatrix,
    cfg: &SpectralConfig,
    rng: &mut SimRng,
) -> Result<SpectralResult> {
    cfg.validate()?;
    mpp.check_sign_matrix()?;
    let n = mpp.n();
    let k_max = cfg.k_max_for(n);
    let mut found = None;
    for m in 2..=k_max {
        let spec = top_eigenpairs_trailing_estimate(
            mpp,
            m,
            cfg.eigen_tol,
            cfg.settle_tol,
            cfg.eigen_max_iter,
        )?;
        let values = spec.values();
        if gap_at(&values, m, values[0].abs(), cfg) {
            found = Some((m, spec));
            break;
        }
    }
    let (k, spec) = found.ok_or(Error::NoSpectralGap {
        available: k_max,
        k_max,
    })?;
    let vectors: Vec<Vec<f64>> = spec.pairs[..k - 1]
        .iter()
        .map(|p| p.vector.clone())
        .collect();
    let t = cfg.threshold(n);
    let cap = cfg.pivot_attempt_cap.unwrap_or(n);

    let mut unassigned = vec![true; n];
    let mut labels = vec![k - 1; n];
    let mut attempts_total = 0;
    for c in 0..k - 1 {
        let mut pool: Vec<usize> = (0..n).filter(|&i| unassigned[i]).collect();
        pool.shuffle(rng);
        let mut chosen = None;
        for &pivot in pool.iter().take(cap) {
            attempts_total += 1;
            let s = close_to(&vectors, pivot, t, (0..n).filter(|&j| unassigned[j]));
            if 2 * k * s.len() >= n {
                chosen = Some(s);
                break;
            }
        }
        let members = chosen.ok_or(Error::PivotSearchFailed {
            cluster: c,
            attempts: cap.min(pool.len()),
        })?;
        for j in members {
            unassigned[j] = false;
            labels[j] = c;
        }
    }
    if !unassigned.iter().any(|&u| u) {
        return Err(Error::EmptyCluster);
    }
    Ok(SpectralResult {
        partition: ClusterPartition::new(k, labels)?,
        detected_k: k,
        eigenvalues: spec.values(),
        pivot_attempts: attempts_total,
    })
}

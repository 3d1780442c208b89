//! Planted partitions, the sign matrix they induce, the noise channel, and
//! the recentred matrices fed to the SDP.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;
use crate::rng::{bernoulli, probability_threshold, SimRng};

/// Assignment of `n` items to `k` nonempty clusters labelled `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPartition {
    k: usize,
    assignment: Vec<usize>,
}

impl ClusterPartition {
    pub fn new(k: usize, assignment: Vec<usize>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::InvalidPartition("no items".into()));
        }
        let mut sizes = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            if c >= k {
                return Err(Error::InvalidPartition(format!(
                    "item {i} has label {c}, expected < {k}"
                )));
            }
            sizes[c] += 1;
        }
        if let Some(c) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidPartition(format!("cluster {c} is empty")));
        }
        Ok(Self { k, assignment })
    }

    /// Builds a partition from disjoint index sets covering `0..n`.
    pub fn from_clusters(n: usize, clusters: &[Vec<usize>]) -> Result<Self> {
        let mut assignment = vec![usize::MAX; n];
        for (c, set) in clusters.iter().enumerate() {
            for &i in set {
                if i >= n {
                    return Err(Error::IndexOutOfBounds { index: i, n });
                }
                if assignment[i] != usize::MAX {
                    return Err(Error::InvalidPartition(format!("item {i} appears twice")));
                }
                assignment[i] = c;
            }
        }
        if let Some(i) = assignment.iter().position(|&c| c == usize::MAX) {
            return Err(Error::InvalidPartition(format!("item {i} is unassigned")));
        }
        Self::new(clusters.len(), assignment)
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn label(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// Members of each cluster in increasing order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn same_cluster(&self, i: usize, j: usize) -> bool {
        self.assignment[i] == self.assignment[j]
    }

    pub fn is_equinumerous(&self) -> bool {
        self.n().is_multiple_of(self.k) && self.sizes().iter().all(|&s| s == self.n() / self.k)
    }

    /// Partition of the permuted items: item `perm[i]` of the result carries
    /// the label of item `i` here.
    pub fn permute_items(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: perm.len(),
            });
        }
        let mut assignment = vec![0; self.n()];
        for (i, &p) in perm.iter().enumerate() {
            assignment[p] = self.assignment[i];
        }
        Self::new(self.k, assignment)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.n(), self.k)?;
        let labels: Vec<String> = self.assignment.iter().map(ToString::to_string).collect();
        writeln!(w, "{}", labels.join(" "))?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let parse_err = |line: usize, msg: String| Error::Parse {
            line: line + 1,
            msg,
        };
        let (ln, header) = lines
            .next()
            .ok_or_else(|| parse_err(0, "missing header".into()))?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(ln, format!("expected `n k`, got `{header}`")));
        }
        let n: usize = fields[0]
            .parse()
            .map_err(|e| parse_err(ln, format!("bad n: {e}")))?;
        let k: usize = fields[1]
            .parse()
            .map_err(|e| parse_err(ln, format!("bad k: {e}")))?;
        let (ln, body) = lines
            .next()
            .ok_or_else(|| parse_err(ln + 1, "missing labels".into()))?;
        let labels = body?
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(ln, format!("bad label: {e}")))?;
        if labels.len() != n {
            return Err(parse_err(
                ln,
                format!("expected {n} labels, got {}", labels.len()),
            ));
        }
        Self::new(k, labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    Equal,
    /// Sizes within `slack` of `n/k`.
    NearEqual {
        slack: usize,
    },
}

/// `ceil(n^0.6) / k`.
pub fn default_slack(n: usize, k: usize) -> usize {
    ((n as f64).powf(0.6).ceil() as usize) / k
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub budget: usize,
    pub seed: u64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.k > self.n {
            return Err(Error::InvalidArgument(format!(
                "need 2 <= k <= n, got k = {}, n = {}",
                self.k, self.n
            )));
        }
        check_epsilon(self.epsilon)?;
        if self.budget > self.n * self.n {
            return Err(Error::InvalidArgument(format!(
                "budget {} exceeds n^2 = {}",
                self.budget,
                self.n * self.n
            )));
        }
        Ok(())
    }
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1/2], got {eps}"
        )))
    }
}

/// Random partition: a size template whose labels are shuffled uniformly.
pub fn make_partition(
    n: usize,
    k: usize,
    mode: PartitionMode,
    rng: &mut SimRng,
) -> Result<ClusterPartition> {
    if k < 2 || k > n {
        return Err(Error::InvalidPartition(format!(
            "need 2 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let sizes = match mode {
        PartitionMode::Equal => {
            if !n.is_multiple_of(k) {
                return Err(Error::InvalidPartition(format!(
                    "equal mode needs k | n, got n = {n}, k = {k}"
                )));
            }
            vec![n / k; k]
        }
        PartitionMode::NearEqual { slack } => near_equal_sizes(n, k, slack, rng)?,
    };
    let mut labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
        .collect();
    labels.shuffle(rng);
    ClusterPartition::new(k, labels)
}

fn near_equal_sizes(n: usize, k: usize, slack: usize, rng: &mut SimRng) -> Result<Vec<usize>> {
    let mean = n as f64 / k as f64;
    let floor = n / k;
    let ceil = n.div_ceil(k);
    let lo = ((mean - slack as f64).ceil().max(0.0) as usize).min(floor);
    let hi = ((mean + slack as f64).floor() as usize).max(ceil);
    if lo < 1 {
        return Err(Error::InvalidPartition(format!(
            "slack {slack} allows empty clusters for n = {n}, k = {k}"
        )));
    }
    let mut sizes: Vec<usize> = (0..k).map(|c| floor + usize::from(c < n % k)).collect();
    // Random unit transfers that respect the window.
    for _ in 0..4 * k * slack.max(1) {
        let a = rng.gen_range(0..k);
        let b = rng.gen_range(0..k);
        if a != b && sizes[a] > lo && sizes[b] < hi {
            sizes[a] -= 1;
            sizes[b] += 1;
        }
    }
    Ok(sizes)
}

/// `+1` within a cluster (diagonal included), `-1` across.
pub fn zero_error_matrix(p: &ClusterPartition) -> RealMatrix {
    RealMatrix::from_upper_fn(p.n(), |i, j| if p.same_cluster(i, j) { 1.0 } else { -1.0 })
}

/// Orthonormal basis `v_1..v_{k-1}` of the top eigenspace of the zero-error
/// matrix: `v_i` puts weight `1/sqrt(i^2+i)` on each of the first `i`
/// clusters and `-i/sqrt(i^2+i)` on cluster `i+1`, scaled by `sqrt(k/n)`.
pub fn orthogonal_basis(p: &ClusterPartition) -> Result<Vec<Vec<f64>>> {
    if !p.is_equinumerous() {
        return Err(Error::InvalidPartition(
            "basis requires equal cluster sizes".into(),
        ));
    }
    let k = p.k();
    let scale = (k as f64 / p.n() as f64).sqrt();
    Ok((1..k)
        .map(|i| {
            let norm = ((i * i + i) as f64).sqrt();
            p.assignment()
                .iter()
                .map(|&c| match c.cmp(&i) {
                    std::cmp::Ordering::Less => scale / norm,
                    std::cmp::Ordering::Equal => -scale * i as f64 / norm,
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect()
        })
        .collect())
}

/// Negates each off-diagonal unordered pair independently with probability
/// `1/2 - epsilon`. One 64-bit draw per pair, row-major over `i < j`.
pub fn apply_noise(m: &RealMatrix, epsilon: f64, rng: &mut SimRng) -> Result<RealMatrix> {
    m.check_sign_matrix()?;
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in [0, 1/2], got {epsilon}"
        )));
    }
    let threshold = probability_threshold(0.5 - epsilon);
    let mut out = m.clone();
    let n = m.n();
    for i in 0..n {
        for j in (i + 1)..n {
            if bernoulli(rng, threshold) {
                out.set_sym(i, j, -m.get(i, j));
            }
        }
    }
    Ok(out)
}

/// `1` within a cluster, `-1/(k-1)` across.
pub fn psd_zero_error(p: &ClusterPartition) -> RealMatrix {
    let off = -1.0 / (p.k() as f64 - 1.0);
    RealMatrix::from_upper_fn(p.n(), |i, j| if p.same_cluster(i, j) { 1.0 } else { off })
}

/// Replaces negative entries by `-1/(k-1)`.
pub fn clip_to_p(m: &RealMatrix, k: usize) -> RealMatrix {
    let off = -1.0 / (k as f64 - 1.0);
    m.map(|x| if x < 0.0 { off } else { x })
}

/// `P'' - (1/2 - epsilon)(1 - 1/(k-1))` on every entry.
pub fn build_q(ppp: &RealMatrix, epsilon: f64, k: usize) -> RealMatrix {
    let c = (0.5 - epsilon) * (1.0 - 1.0 / (k as f64 - 1.0));
    ppp.map(|x| x - c)
}

/// `k / (2(k-1)) * M''`; needs no knowledge of epsilon.
pub fn build_q_tilde(mpp: &RealMatrix, k: usize) -> RealMatrix {
    mpp.scale(k as f64 / (2.0 * (k as f64 - 1.0)))
}

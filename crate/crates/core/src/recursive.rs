//! Recursive SDP bisection: solve the SDP on the current set, round one
//! sampled eigenvector of its solution at a random threshold, fix the
//! cardinality of the lower side to a multiple of `n/k`, and recurse.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;
use crate::model::{build_q, build_q_tilde, clip_to_p, ClusterPartition};
use crate::rng::{split, SimRng};
use crate::sdp::{sample_eigenvector, solve_sdp_norm, solve_sdp_norm_zerosum, SdpOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpVariant {
    /// Recentred matrix built with the known epsilon.
    Eps,
    /// Scaled sign matrix with the zero-sum constraint; epsilon unused.
    EpsFree,
}

impl SdpVariant {
    pub fn name(self) -> &'static str {
        match self {
            SdpVariant::Eps => "eps",
            SdpVariant::EpsFree => "eps-free",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "eps" => Ok(SdpVariant::Eps),
            "eps-free" => Ok(SdpVariant::EpsFree),
            other => Err(Error::Config(format!("unknown SDP variant `{other}`"))),
        }
    }
}

/// A subproblem: items `set` believed to hold `k_prime` whole clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionFrame {
    pub set: Vec<usize>,
    pub k_prime: usize,
    pub f: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RecursionGlobals<'a> {
    pub n: usize,
    pub k: usize,
    pub q: &'a RealMatrix,
    /// Epsilon used in the `delta` and `f'` bookkeeping.
    pub epsilon: f64,
    /// Solve the zero-sum SDP in every frame.
    pub zero_sum: bool,
}

/// One non-leaf frame of a recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub depth: usize,
    pub set_size: usize,
    pub k_prime: usize,
    pub f: f64,
    pub gamma: f64,
    pub delta: f64,
    pub trim: usize,
    pub t: f64,
    pub s1_size: usize,
    pub k_double_prime: usize,
    pub sdp_value: f64,
    pub child_f: f64,
    pub child_gammas: (f64, f64),
}

/// Multiplies every negative entry by `gamma`.
pub fn rescale_negatives(a: &RealMatrix, gamma: f64) -> Result<RealMatrix> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    Ok(a.map(|x| if x < 0.0 { gamma * x } else { x }))
}

fn sorted_values(u: &[f64]) -> Vec<f64> {
    let mut s = u.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Uniform draw between the values of ranks `trim` and `len - trim` (1-based).
fn threshold_from_trim(u: &[f64], trim: usize, rng: &mut SimRng) -> Result<(f64, f64, f64)> {
    let len = u.len();
    if trim == 0 || 2 * trim > len {
        return Err(Error::DegenerateThreshold { trim, len });
    }
    let s = sorted_values(u);
    let (lo, hi) = (s[trim - 1], s[len - trim - 1]);
    let t = if hi > lo {
        lo + (hi - lo) * rng.gen::<f64>()
    } else {
        lo
    };
    Ok((t, lo, hi))
}

fn literal_trim(delta: f64, len: usize) -> usize {
    (delta.cbrt() * len as f64).ceil() as usize
}

/// Random threshold between the order statistics of rank
/// `ceil(delta^(1/3) len)` and `len - ceil(delta^(1/3) len)`.
pub fn get_threshold(u: &[f64], delta: f64, rng: &mut SimRng) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must be positive, got {delta}"
        )));
    }
    threshold_from_trim(u, literal_trim(delta, u.len()), rng).map(|(t, _, _)| t)
}

/// `4k sqrt(f / (eps n^2))`, with the root `n`.
pub fn delta_for(f: f64, g: &RecursionGlobals<'_>) -> f64 {
    4.0 * g.k as f64 * (f / (g.epsilon * (g.n * g.n) as f64)).sqrt()
}

/// Rank trimmed from each end: `ceil(delta^(1/3) len)` when it leaves a nonempty
/// window, otherwise `max(1, n / (2k))`.
pub fn effective_trim(delta: f64, len: usize, n: usize, k: usize) -> usize {
    let t = literal_trim(delta, len);
    if t >= 1 && 2 * t <= len {
        t
    } else {
        (n / (2 * k)).max(1)
    }
}

fn child_gamma(gamma: f64, k_prime: usize, k_child: usize) -> f64 {
    if k_child >= 2 {
        gamma * (k_prime - 1) as f64 / (k_child - 1) as f64
    } else {
        1.0
    }
}

/// Splits `frame.set` into `frame.k_prime` sets of size `n/k`.
pub fn recursive_clust(
    frame: &RecursionFrame,
    g: &RecursionGlobals<'_>,
    opts: &SdpOptions,
    rng: &mut SimRng,
    trace: &mut Vec<TraceEntry>,
) -> Result<Vec<Vec<usize>>> {
    recurse(frame, g, opts, rng, 0, trace)
}

fn recurse(
    frame: &RecursionFrame,
    g: &RecursionGlobals<'_>,
    opts: &SdpOptions,
    rng: &mut SimRng,
    depth: usize,
    trace: &mut Vec<TraceEntry>,
) -> Result<Vec<Vec<usize>>> {
    let size = g.n / g.k;
    let len = frame.set.len();
    if len != frame.k_prime * size {
        return Err(Error::InvalidArgument(format!(
            "frame of {len} items cannot hold {} clusters of {size}",
            frame.k_prime
        )));
    }
    if frame.k_prime == 1 {
        return Ok(vec![frame.set.clone()]);
    }
    let local = rescale_negatives(&g.q.principal_submatrix(&frame.set)?, frame.gamma)?;
    let sdp_opts = opts.clone().with_seed(rng.next_u64());
    let sol = if g.zero_sum {
        solve_sdp_norm_zerosum(&local, &sdp_opts)?
    } else {
        solve_sdp_norm(&local, &sdp_opts)?
    };
    let u = sample_eigenvector(&sol.x, rng)?;
    let delta = delta_for(frame.f, g);
    let trim = effective_trim(delta, len, g.n, g.k);
    let (t, _, _) = threshold_from_trim(&u, trim, rng)?;
    let s1_size = u.iter().filter(|&&x| x < t).count();
    let k2 = (s1_size as f64 / size as f64).round() as usize;
    if k2 == 0 || k2 >= frame.k_prime {
        return Err(Error::RecursionFailed {
            set_size: len,
            k_prime: frame.k_prime,
            k_double_prime: k2,
        });
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&a, &b| u[a].total_cmp(&u[b]).then(a.cmp(&b)));
    let cut = k2 * size;
    let mut lower: Vec<usize> = order[..cut].iter().map(|&p| frame.set[p]).collect();
    let mut upper: Vec<usize> = order[cut..].iter().map(|&p| frame.set[p]).collect();
    lower.sort_unstable();
    upper.sort_unstable();

    let k = g.k as f64;
    let child_f = k * frame.f + 4.0 * k * delta.cbrt() * g.epsilon * (len * len) as f64;
    let gammas = (
        child_gamma(frame.gamma, frame.k_prime, k2),
        child_gamma(frame.gamma, frame.k_prime, frame.k_prime - k2),
    );
    trace.push(TraceEntry {
        depth,
        set_size: len,
        k_prime: frame.k_prime,
        f: frame.f,
        gamma: frame.gamma,
        delta,
        trim,
        t,
        s1_size,
        k_double_prime: k2,
        sdp_value: sol.value,
        child_f,
        child_gammas: gammas,
    });
    let mut rng_lower = split(rng);
    let mut rng_upper = split(rng);
    let left = RecursionFrame {
        set: lower,
        k_prime: k2,
        f: child_f,
        gamma: gammas.0,
    };
    let right = RecursionFrame {
        set: upper,
        k_prime: frame.k_prime - k2,
        f: child_f,
        gamma: gammas.1,
    };
    let mut out = recurse(&left, g, opts, &mut rng_lower, depth + 1, trace)?;
    out.extend(recurse(&right, g, opts, &mut rng_upper, depth + 1, trace)?);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdpReconstructOptions {
    pub sdp: SdpOptions,
    /// Extra attempts after an aborted recursion.
    pub retries: usize,
}

impl Default for SdpReconstructOptions {
    fn default() -> Self {
        Self {
            sdp: SdpOptions::default(),
            retries: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpOutcome {
    pub partition: ClusterPartition,
    /// Attempts made, including the successful one.
    pub attempts: usize,
    /// Frames of the successful attempt.
    pub trace: Vec<TraceEntry>,
}

/// `16 n sqrt(n) + 2B`.
pub fn default_f0(n: usize, budget: usize) -> f64 {
    16.0 * n as f64 * (n as f64).sqrt() + 2.0 * budget as f64
}

/// Builds `Q` (or the epsilon-free matrix) from `mpp` and runs the recursion
/// from the full item set, retrying aborted recursions with fresh randomness.
pub fn sdp_reconstruct(
    mpp: &RealMatrix,
    k: usize,
    epsilon: f64,
    f0: f64,
    variant: SdpVariant,
    opts: &SdpReconstructOptions,
    rng: &mut SimRng,
) -> Result<SdpOutcome> {
    mpp.check_sign_matrix()?;
    let n = mpp.n();
    if k < 2 || !n.is_multiple_of(k) {
        return Err(Error::InvalidArgument(format!(
            "need k >= 2 dividing n, got n = {n}, k = {k}"
        )));
    }
    let (q, eps_book, zero_sum) = match variant {
        SdpVariant::Eps => {
            if !(epsilon > 0.0 && epsilon <= 0.5) {
                return Err(Error::InvalidArgument(format!(
                    "epsilon must lie in (0, 1/2], got {epsilon}"
                )));
            }
            (build_q(&clip_to_p(mpp, k), epsilon, k), epsilon, false)
        }
        SdpVariant::EpsFree => (build_q_tilde(mpp, k), 0.5, true),
    };
    let globals = RecursionGlobals {
        n,
        k,
        q: &q,
        epsilon: eps_book,
        zero_sum,
    };
    let root = RecursionFrame {
        set: (0..n).collect(),
        k_prime: k,
        f: f0,
        gamma: 1.0,
    };
    let mut last_err = None;
    for attempt in 0..=opts.retries {
        let mut attempt_rng = split(rng);
        let mut trace = Vec::new();
        match recursive_clust(&root, &globals, &opts.sdp, &mut attempt_rng, &mut trace) {
            Ok(sets) => {
                return Ok(SdpOutcome {
                    partition: ClusterPartition::from_clusters(n, &sets)?,
                    attempts: attempt + 1,
                    trace,
                })
            }
            Err(e @ (Error::RecursionFailed { .. } | Error::DegenerateThreshold { .. })) => {
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::full_eigendecomposition;
    use crate::model::{psd_zero_error, zero_error_matrix};
    use crate::rng::rng_from_seed;

    fn blocks(n: usize, k: usize) -> ClusterPartition {
        ClusterPartition::new(k, (0..n).map(|i| i / (n / k)).collect()).unwrap()
    }

    #[test]
    fn threshold_on_sorted_sequence() {
        let u: Vec<f64> = (1..=10).map(f64::from).collect();
        // ceil(delta^(1/3) * 10) = 1 -> ranks 1 and 9.
        let delta = 1e-6;
        let mut rng = rng_from_seed(0);
        for _ in 0..200 {
            let t = get_threshold(&u, delta, &mut rng).unwrap();
            assert!((1.0..=9.0).contains(&t));
        }
    }

    #[test]
    fn threshold_on_constant() {
        let t = get_threshold(&[0.25; 8], 1e-6, &mut rng_from_seed(1)).unwrap();
        assert_eq!(t, 0.25);
    }

    #[test]
    fn threshold_degenerate() {
        assert!(matches!(
            get_threshold(&[1.0, 2.0, 3.0], 1.0, &mut rng_from_seed(0)),
            Err(Error::DegenerateThreshold { .. })
        ));
        assert!(get_threshold(&[1.0, 2.0], 0.0, &mut rng_from_seed(0)).is_err());
        assert_eq!(effective_trim(30.0, 80, 120, 3), 20);
        assert_eq!(effective_trim(1.2e-3, 80, 120, 3), 9);
    }

    #[test]
    fn rescale_cases() {
        let p = psd_zero_error(&blocks(12, 3));
        assert_eq!(rescale_negatives(&p, 1.0).unwrap(), p);
        let two: Vec<usize> = (0..8).collect();
        let r = rescale_negatives(&p.principal_submatrix(&two).unwrap(), 2.0).unwrap();
        assert_eq!(r, zero_error_matrix(&blocks(8, 2)));
        let e = full_eigendecomposition(&r, 1e-10).unwrap();
        assert!(e.pairs.last().unwrap().value >= -1e-8);
        assert!(rescale_negatives(&p, 0.0).is_err());
    }

    #[test]
    fn rounding_is_closest_integer() {
        assert_eq!((33.0f64 / 25.0).round() as usize, 1);
        assert_eq!((2.5f64).round() as usize, 3);
    }

    #[test]
    fn base_case_returns_set() {
        let q = RealMatrix::identity(12);
        let g = RecursionGlobals {
            n: 12,
            k: 3,
            q: &q,
            epsilon: 0.25,
            zero_sum: false,
        };
        let frame = RecursionFrame {
            set: vec![1, 5, 7, 9],
            k_prime: 1,
            f: 1.0,
            gamma: 1.0,
        };
        let mut trace = Vec::new();
        let out = recursive_clust(
            &frame,
            &g,
            &SdpOptions::default(),
            &mut rng_from_seed(0),
            &mut trace,
        )
        .unwrap();
        assert_eq!(out, vec![vec![1, 5, 7, 9]]);
        assert!(trace.is_empty());
    }

    fn sorted_clusters(p: &ClusterPartition) -> Vec<Vec<usize>> {
        let mut c = p.clusters();
        c.sort();
        c
    }

    #[test]
    fn noiseless_recovery() {
        let p = blocks(12, 3);
        let m = zero_error_matrix(&p);
        for variant in [SdpVariant::Eps, SdpVariant::EpsFree] {
            for seed in 0..5 {
                let out = sdp_reconstruct(
                    &m,
                    3,
                    0.5,
                    default_f0(12, 0),
                    variant,
                    &SdpReconstructOptions::default(),
                    &mut rng_from_seed(seed),
                )
                .unwrap();
                assert_eq!(
                    sorted_clusters(&out.partition),
                    sorted_clusters(&p),
                    "{variant:?} {seed}"
                );
                assert_eq!(out.trace.len(), 2);
            }
        }
    }

    #[test]
    fn trace_bookkeeping() {
        let p = blocks(20, 4);
        let m = zero_error_matrix(&p);
        let out = sdp_reconstruct(
            &m,
            4,
            0.5,
            default_f0(20, 0),
            SdpVariant::Eps,
            &SdpReconstructOptions::default(),
            &mut rng_from_seed(7),
        )
        .unwrap();
        assert_eq!(out.trace.len(), 3);
        let root = &out.trace[0];
        assert_eq!(root.gamma, 1.0);
        let k2 = root.k_double_prime;
        let want = |kc: usize| if kc >= 2 { 3.0 / (kc - 1) as f64 } else { 1.0 };
        assert_eq!(root.child_gammas, (want(k2), want(4 - k2)));
        for e in &out.trace[1..] {
            assert_eq!(e.f, root.child_f);
            assert!((e.gamma - 3.0 / (e.k_prime - 1) as f64).abs() < 1e-12);
            assert_eq!(e.set_size, e.k_prime * 5);
        }
        assert_eq!(sorted_clusters(&out.partition), sorted_clusters(&p));
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = zero_error_matrix(&blocks(12, 3));
        let opts = SdpReconstructOptions::default();
        let mut rng = rng_from_seed(0);
        assert!(sdp_reconstruct(&m, 5, 0.3, 1.0, SdpVariant::Eps, &opts, &mut rng).is_err());
        assert!(sdp_reconstruct(&m, 3, 0.0, 1.0, SdpVariant::Eps, &opts, &mut rng).is_err());
        assert_eq!(SdpVariant::parse("eps-free").unwrap(), SdpVariant::EpsFree);
        assert!(SdpVariant::parse("x").is_err());
    }
}

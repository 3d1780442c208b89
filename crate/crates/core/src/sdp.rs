//! Low-rank solver for `max sum_ij Q_ij <x_i, x_j>` over unit vectors, its
//! zero-sum variant, eigenvector rounding, and the Grothendieck bracket.
//!
//! The factor `V` (one unit row per item) is improved one row at a time: with
//! every other row fixed the objective is linear in `v_i`, so the best unit
//! row is `g_i / |g_i|` with `g_i = sum_{j != i} Q_ij v_j`. Each update can only
//! raise the objective.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, frobenius_norm, full_eigendecomposition, RealMatrix};
use crate::rng::{substream, SimRng};

/// Upper bound used for the real Grothendieck constant.
pub const GROTHENDIECK_BOUND: f64 = 1.783;

/// `|X . 1|` allowed after the zero-sum solve, as a fraction of `n^2`.
pub const ZERO_SUM_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdpOptions {
    /// Columns of the factor; `None` means `ceil(sqrt(2n)) + 1`.
    pub rank: Option<usize>,
    /// Sweep cap per restart (and per penalty round).
    pub max_iters: usize,
    /// Relative objective change over `window` sweeps that counts as converged.
    pub convergence_tol: f64,
    pub window: usize,
    pub restarts: usize,
    /// Penalty weights for the zero-sum variant, in units of `|Q|_F / n`.
    pub penalty_schedule: Vec<f64>,
    pub seed: u64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            rank: None,
            max_iters: 2000,
            convergence_tol: 1e-7,
            window: 50,
            restarts: 3,
            penalty_schedule: vec![1.0, 10.0, 100.0],
            seed: 0,
        }
    }
}

impl SdpOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn rank_for(&self, n: usize) -> usize {
        self.rank
            .unwrap_or_else(|| (2.0 * n as f64).sqrt().ceil() as usize + 1)
            .clamp(1, n.max(1))
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if self.rank == Some(0) {
            return Err(Error::InvalidArgument("rank must be at least 1".into()));
        }
        if self.window == 0 || self.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "window and max_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    /// Gram matrix of the factor rows.
    pub x: RealMatrix,
    /// `Q . X` for the input `Q`.
    pub value: f64,
    /// `n x rank`, row-major, unit rows.
    pub factor: Vec<f64>,
    pub rank: usize,
    pub iterations: usize,
    pub converged: bool,
    pub restarts_used: usize,
    pub best_restart: usize,
    /// `X . 1`; only constrained in the zero-sum variant.
    pub total_sum: f64,
}

impl SdpSolution {
    pub fn factor_row(&self, i: usize) -> &[f64] {
        &self.factor[i * self.rank..(i + 1) * self.rank]
    }
}

struct Factor {
    n: usize,
    r: usize,
    v: Vec<f64>,
}

impl Factor {
    fn random(n: usize, r: usize, rng: &mut SimRng) -> Self {
        let mut v = vec![0.0; n * r];
        for row in v.chunks_mut(r) {
            loop {
                row.iter_mut().for_each(|x| *x = rng.gen::<f64>() - 0.5);
                let norm = dot(row, row).sqrt();
                if norm > 1e-8 {
                    row.iter_mut().for_each(|x| *x /= norm);
                    break;
                }
            }
        }
        Self { n, r, v }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.v[i * self.r..(i + 1) * self.r]
    }

    fn row_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.r];
        for row in self.v.chunks(self.r) {
            s.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        s
    }

    /// `sum_ij Q_ij <v_i, v_j>`.
    fn objective(&self, q: &RealMatrix) -> f64 {
        let mut total = 0.0;
        let mut h = vec![0.0; self.r];
        for i in 0..self.n {
            h.iter_mut().for_each(|x| *x = 0.0);
            for (j, &qij) in q.row(i).iter().enumerate() {
                if qij != 0.0 {
                    h.iter_mut()
                        .zip(self.row(j))
                        .for_each(|(a, b)| *a += qij * b);
                }
            }
            total += dot(&h, self.row(i));
        }
        total
    }

    fn gram(&self) -> RealMatrix {
        RealMatrix::from_upper_fn(self.n, |i, j| dot(self.row(i), self.row(j)))
    }

    /// One pass of exact row updates on `Q - mu * 1`, keeping the running
    /// row sum `s` in step with the factor.
    fn sweep(&mut self, q: &RealMatrix, mu: f64, s: &mut [f64]) {
        let r = self.r;
        let mut g = vec![0.0; r];
        for i in 0..self.n {
            g.iter_mut().for_each(|x| *x = 0.0);
            for (j, &qij) in q.row(i).iter().enumerate() {
                if j != i && qij != 0.0 {
                    let vj = &self.v[j * r..(j + 1) * r];
                    g.iter_mut().zip(vj).for_each(|(a, b)| *a += qij * b);
                }
            }
            let vi = &mut self.v[i * r..(i + 1) * r];
            if mu != 0.0 {
                for ((a, si), b) in g.iter_mut().zip(s.iter()).zip(vi.iter()) {
                    *a -= mu * (si - b);
                }
            }
            let norm = dot(&g, &g).sqrt();
            if norm > 1e-300 {
                for ((b, a), si) in vi.iter_mut().zip(&g).zip(s.iter_mut()) {
                    let new = a / norm;
                    *si += new - *b;
                    *b = new;
                }
            }
        }
    }
}

/// Sweeps until the penalised objective stalls. Returns (sweeps, converged).
fn ascend(f: &mut Factor, q: &RealMatrix, mu: f64, opts: &SdpOptions) -> (usize, bool) {
    let mut s = f.row_sum();
    let penalised = |f: &Factor, s: &[f64]| f.objective(q) - mu * dot(s, s);
    let mut history = vec![penalised(f, &s)];
    for it in 1..=opts.max_iters {
        f.sweep(q, mu, &mut s);
        // Refresh the running sum now and then to stop drift.
        if it % 64 == 0 {
            s = f.row_sum();
        }
        let obj = penalised(f, &s);
        history.push(obj);
        if it >= opts.window {
            let old = history[it - opts.window];
            if (obj - old).abs() <= opts.convergence_tol * obj.abs() {
                return (it, true);
            }
        }
    }
    (opts.max_iters, false)
}

fn finish(f: Factor, q: &RealMatrix, iterations: usize, converged: bool) -> SdpSolution {
    let x = f.gram();
    let value = q.frobenius_inner(&x);
    let total_sum = x.total_sum();
    SdpSolution {
        x,
        value,
        rank: f.r,
        factor: f.v,
        iterations,
        converged,
        restarts_used: 0,
        best_restart: 0,
        total_sum,
    }
}

fn pick_best(mut runs: Vec<SdpSolution>, restarts: usize) -> Result<SdpSolution> {
    let best_idx = runs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.value.total_cmp(&b.1.value).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .expect("at least one restart");
    let any_converged = runs.iter().any(|r| r.converged);
    let mut best = runs.swap_remove(best_idx);
    best.restarts_used = restarts;
    best.best_restart = best_idx;
    if any_converged {
        Ok(best)
    } else {
        Err(Error::SdpNotConverged {
            best: Box::new(best),
        })
    }
}

/// Maximises `Q . X` over `X = V V^T` with unit rows; best of the restarts.
pub fn solve_sdp_norm(q: &RealMatrix, opts: &SdpOptions) -> Result<SdpSolution> {
    opts.validate()?;
    let n = q.n();
    let r = opts.rank_for(n);
    let runs = (0..opts.restarts)
        .map(|restart| {
            let mut rng = substream(opts.seed, &[restart as u64]);
            let mut f = Factor::random(n, r, &mut rng);
            let (it, conv) = ascend(&mut f, q, 0.0, opts);
            finish(f, q, it, conv)
        })
        .collect();
    pick_best(runs, opts.restarts)
}

/// As [`solve_sdp_norm`] with `sum_ij X_ij = 0` imposed through the penalty
/// `mu |sum_i v_i|^2`, `mu` stepping through the schedule with warm starts.
/// Only restarts meeting `|X . 1| <= 1e-3 n^2` compete on value.
pub fn solve_sdp_norm_zerosum(qt: &RealMatrix, opts: &SdpOptions) -> Result<SdpSolution> {
    opts.validate()?;
    if opts.penalty_schedule.is_empty() {
        return Err(Error::InvalidArgument("empty penalty schedule".into()));
    }
    let n = qt.n();
    let r = opts.rank_for(n);
    let unit = (frobenius_norm(qt) / n as f64).max(1.0 / n as f64);
    let limit = ZERO_SUM_TOL * (n * n) as f64;
    let runs: Vec<SdpSolution> = (0..opts.restarts)
        .map(|restart| {
            let mut rng = substream(opts.seed, &[restart as u64]);
            let mut f = Factor::random(n, r, &mut rng);
            let mut total = 0;
            let mut conv = true;
            for &w in &opts.penalty_schedule {
                let (it, c) = ascend(&mut f, qt, w * unit, opts);
                total += it;
                conv = c;
            }
            finish(f, qt, total, conv)
        })
        .collect();
    let (feasible, infeasible): (Vec<_>, Vec<_>) = runs
        .into_iter()
        .enumerate()
        .partition(|(_, s)| s.total_sum.abs() <= limit);
    if feasible.is_empty() {
        let (idx, mut best) = infeasible
            .into_iter()
            .min_by(|a, b| a.1.total_sum.abs().total_cmp(&b.1.total_sum.abs()))
            .expect("at least one restart");
        best.restarts_used = opts.restarts;
        best.best_restart = idx;
        return Err(Error::ConstraintViolated {
            violation: best.total_sum.abs(),
            limit,
            best: Box::new(best),
        });
    }
    let (idx, mut best) = feasible
        .into_iter()
        .max_by(|a, b| a.1.value.total_cmp(&b.1.value).then(b.0.cmp(&a.0)))
        .expect("nonempty");
    best.restarts_used = opts.restarts;
    best.best_restart = idx;
    if best.converged {
        Ok(best)
    } else {
        Err(Error::SdpNotConverged {
            best: Box::new(best),
        })
    }
}

/// Unrestricted `max sum_ij A_ij <x_i, y_j>` over unit `x_i`, `y_j`, solved as
/// the symmetric problem on `[[0, A], [A, 0]]` (whose value is twice this).
pub fn solve_sdp_bilinear(a: &RealMatrix, opts: &SdpOptions) -> Result<f64> {
    let n = a.n();
    let w = RealMatrix::from_upper_fn(2 * n, |i, j| match (i < n, j < n) {
        (true, false) => a.get(i, j - n),
        (false, true) => a.get(i - n, j),
        _ => 0.0,
    });
    solve_sdp_norm(&w, opts).map(|s| s.value / 2.0)
}

/// Draws one eigenvector of `X` with probability proportional to its
/// (clamped) eigenvalue.
pub fn sample_eigenvector(x: &RealMatrix, rng: &mut SimRng) -> Result<Vec<f64>> {
    let spectrum = full_eigendecomposition(x, 1e-8)?;
    let weights: Vec<f64> = spectrum.pairs.iter().map(|p| p.value.max(0.0)).collect();
    if !weights.iter().any(|&w| w > 0.0) {
        return Err(Error::NoPositiveEigenvalue);
    }
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let idx = dist.sample(rng);
    Ok(spectrum
        .pairs
        .into_iter()
        .nth(idx)
        .expect("index in range")
        .vector)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrothendieckBracket {
    pub sdp_value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// SDP norm of `A` with the interval `[sdp / 1.783, sdp]` that must contain
/// `|A|_{inf->1}`. Indefinite inputs also get the unrestricted solve.
pub fn grothendieck_bracket(a: &RealMatrix, opts: &SdpOptions) -> Result<GrothendieckBracket> {
    let mut value = solve_sdp_norm(a, opts)?.value;
    let min_eig = full_eigendecomposition(a, 1e-8)?
        .pairs
        .last()
        .map_or(0.0, |p| p.value);
    if min_eig < -1e-9 * frobenius_norm(a) {
        value = value.max(solve_sdp_bilinear(a, opts)?);
    }
    let value = value.max(0.0);
    Ok(GrothendieckBracket {
        sdp_value: value,
        lower: value / GROTHENDIECK_BOUND,
        upper: value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::norm2;
    use crate::rng::rng_from_seed;

    fn psd(n: usize, k: usize) -> RealMatrix {
        let s = n / k;
        let off = -1.0 / (k as f64 - 1.0);
        RealMatrix::from_upper_fn(n, |i, j| if i / s == j / s { 1.0 } else { off })
    }

    fn assert_feasible(s: &SdpSolution) {
        let n = s.x.n();
        for i in 0..n {
            assert!((s.x.get(i, i) - 1.0).abs() < 1e-6);
        }
        assert!((s.x.trace() - n as f64).abs() < 1e-4);
        let e = full_eigendecomposition(&s.x, 1e-8).unwrap();
        assert!(e.pairs.last().unwrap().value >= -1e-6 * e.pairs[0].value.abs());
    }

    #[test]
    fn trivial_objectives() {
        let opts = SdpOptions::default();
        let s = solve_sdp_norm(&RealMatrix::zeros(6), &opts).unwrap();
        assert_eq!(s.value, 0.0);
        let s = solve_sdp_norm(&RealMatrix::identity(10), &opts).unwrap();
        assert!((s.value - 10.0).abs() < 1e-12);
        assert_feasible(&s);
    }

    #[test]
    fn p_norm_value() {
        let s = solve_sdp_norm(&psd(12, 3), &SdpOptions::default()).unwrap();
        assert!((s.value - 72.0).abs() <= 0.72, "{}", s.value);
        assert_feasible(&s);
    }

    #[test]
    fn default_rank() {
        let o = SdpOptions::default();
        assert_eq!(o.rank_for(120), 17);
        assert_eq!(o.rank_for(2), 2);
    }

    #[test]
    fn zero_sum_on_p() {
        let s = solve_sdp_norm_zerosum(&psd(12, 3), &SdpOptions::default()).unwrap();
        assert!((s.value - 72.0).abs() <= 0.72, "{}", s.value);
        assert!(s.total_sum.abs() <= ZERO_SUM_TOL * 144.0);
        assert_feasible(&s);
    }

    #[test]
    fn zero_sum_on_all_ones() {
        let s =
            solve_sdp_norm_zerosum(&RealMatrix::constant(16, 1.0), &SdpOptions::default()).unwrap();
        assert!(s.value.abs() <= ZERO_SUM_TOL * 256.0);
    }

    #[test]
    fn zero_sum_random_sign_matrices() {
        for seed in 0..20 {
            let mut rng = rng_from_seed(seed);
            let a = RealMatrix::from_upper_fn(16, |i, j| {
                if i == j || rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            });
            let s = solve_sdp_norm_zerosum(&a, &SdpOptions::default().with_seed(seed)).unwrap();
            assert!(s.total_sum.abs() <= ZERO_SUM_TOL * 256.0);
        }
    }

    #[test]
    fn restarts_are_monotone() {
        let mut rng = rng_from_seed(4);
        let a = RealMatrix::from_upper_fn(14, |_, _| rng.gen::<f64>() - 0.5);
        let mut last = f64::NEG_INFINITY;
        for restarts in 1..=4 {
            let opts = SdpOptions {
                restarts,
                ..SdpOptions::default()
            };
            let v = solve_sdp_norm(&a, &opts).unwrap().value;
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn rejects_bad_options() {
        let opts = SdpOptions {
            restarts: 0,
            ..SdpOptions::default()
        };
        assert!(solve_sdp_norm(&RealMatrix::identity(3), &opts).is_err());
    }

    #[test]
    fn non_convergence_carries_best() {
        let mut rng = rng_from_seed(2);
        let a = RealMatrix::from_upper_fn(30, |_, _| rng.gen::<f64>() - 0.5);
        let opts = SdpOptions {
            max_iters: 2,
            window: 5,
            ..SdpOptions::default()
        };
        match solve_sdp_norm(&a, &opts) {
            Err(Error::SdpNotConverged { best }) => assert_eq!(best.restarts_used, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sampling_rank_one() {
        let v: Vec<f64> = [1.0, 2.0, -1.0, 0.5]
            .iter()
            .map(|x| x / 6.25f64.sqrt())
            .collect();
        let x = RealMatrix::outer(&v, 4.0);
        let mut rng = rng_from_seed(0);
        for _ in 0..20 {
            let u = sample_eigenvector(&x, &mut rng).unwrap();
            assert!((dot(&u, &v).abs() - 1.0).abs() < 1e-9);
        }
        assert!(matches!(
            sample_eigenvector(&RealMatrix::identity(3).scale(-1.0), &mut rng),
            Err(Error::NoPositiveEigenvalue)
        ));
    }

    #[test]
    fn sampling_identity_frequencies() {
        let x = RealMatrix::identity(4);
        let mut rng = rng_from_seed(12);
        let mut counts = [0usize; 4];
        for _ in 0..2000 {
            let u = sample_eigenvector(&x, &mut rng).unwrap();
            assert!((norm2(&u) - 1.0).abs() < 1e-12);
            let idx = u.iter().position(|c| c.abs() > 0.5).unwrap();
            counts[idx] += 1;
        }
        let sd = (2000.0 * 0.25 * 0.75f64).sqrt();
        for c in counts {
            assert!((c as f64 - 500.0).abs() <= 4.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn bracket_cases() {
        let opts = SdpOptions::default();
        let b = grothendieck_bracket(&RealMatrix::zeros(5), &opts).unwrap();
        assert_eq!((b.sdp_value, b.lower, b.upper), (0.0, 0.0, 0.0));
        let b = grothendieck_bracket(&psd(4, 2), &opts).unwrap();
        assert!((b.sdp_value - 16.0).abs() < 1e-6);
        assert!(b.lower <= 16.0 && 16.0 <= b.upper + 1e-6);
    }
}

use rand::Rng;

use super::{dot, norm2, RealMatrix};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Largest dimension accepted by [`infty_to_one_bruteforce`].
pub const BRUTE_FORCE_LIMIT: usize = 16;

pub const DEFAULT_OPNORM_MAX_ITER: usize = 10_000;

// Fixed start so the norm stays a pure function of the matrix.
const START_SEED: u64 = 0x6f70_6e6f_726d;

/// `sqrt(sum_ij A_ij^2)`.
pub fn frobenius_norm(a: &RealMatrix) -> f64 {
    dot(a.as_slice(), a.as_slice()).sqrt()
}

/// Largest absolute eigenvalue, by power iteration on `A^2`.
///
/// Iterates `x <- A(Ax) / |A(Ax)|` and stops once the estimate `|Ax|` changes
/// by less than `tol` relative to itself between consecutive steps.
pub fn operator_norm(a: &RealMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let n = a.n();
    if frobenius_norm(a) == 0.0 {
        return Ok(0.0);
    }
    let mut rng = rng_from_seed(START_SEED);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);

    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let ax = a.mat_vec(&x);
        let next = norm2(&ax);
        if next == 0.0 {
            // Start vector fell in the kernel; any other direction will do.
            x = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let nx = norm2(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            continue;
        }
        let a2x = a.mat_vec(&ax);
        let na2x = norm2(&a2x);
        let converged = (next - estimate).abs() <= tol * next;
        estimate = next;
        if converged {
            return Ok(estimate);
        }
        if na2x == 0.0 {
            return Ok(estimate);
        }
        x = a2x.into_iter().map(|v| v / na2x).collect();
    }
    Err(Error::OperatorNormNotConverged {
        iterations: max_iter,
        estimate,
    })
}

/// Exact `max_{x, y in {-1,1}^n} |x^T A y|`.
///
/// Enumerates `x` (with `x_0 = +1`, since flipping both vectors leaves the
/// value unchanged) in Gray-code order and picks `y_j = sign((x^T A)_j)`,
/// which makes the inner maximum `|x^T A|_1`.
pub fn infty_to_one_bruteforce(a: &RealMatrix) -> Result<f64> {
    let n = a.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    // w = x^T A for x = all ones.
    let mut x = vec![1.0f64; n];
    let mut w: Vec<f64> = (0..n).map(|j| (0..n).map(|i| a.get(i, j)).sum()).collect();
    let mut best = w.iter().map(|v| v.abs()).sum::<f64>();
    if n == 1 {
        return Ok(best);
    }
    let steps = 1u64 << (n - 1);
    for g in 1..steps {
        // Flip the coordinate (offset by one to keep x_0 fixed) whose bit changes.
        let bit = g.trailing_zeros() as usize + 1;
        let delta = -2.0 * x[bit];
        x[bit] = -x[bit];
        for (wj, aij) in w.iter_mut().zip(a.row(bit)) {
            *wj += delta * aij;
        }
        let value: f64 = w.iter().map(|v| v.abs()).sum();
        if value > best {
            best = value;
        }
    }
    Ok(best)
}

//! Dense symmetric matrices, norms and eigensolvers.

mod eigen;
mod norms;

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub use eigen::{
    full_eigendecomposition, top_eigenpairs, top_eigenpairs_trailing_estimate, EigenPair, Spectrum,
    DEFAULT_EIGEN_TOL, ORTHOGONALITY_TOL,
};
pub use norms::{
    frobenius_norm, infty_to_one_bruteforce, operator_norm, BRUTE_FORCE_LIMIT,
    DEFAULT_OPNORM_MAX_ITER,
};

/// Relative tolerance for symmetry checks on construction and on read.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Dense symmetric `n x n` real matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    n: usize,
    data: Vec<f64>,
}

fn symmetric_pair(a: f64, b: f64) -> bool {
    (a - b).abs() <= SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0)
}

impl RealMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be at least 1");
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Constant matrix with every entry equal to `value`.
    pub fn constant(n: usize, value: f64) -> Self {
        assert!(n >= 1, "matrix dimension must be at least 1");
        Self {
            n,
            data: vec![value; n * n],
        }
    }

    /// Builds a matrix from the upper triangle of `f`; `f(i, j)` is only
    /// called for `i <= j` and mirrored.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    /// Row-major data; rejects non-square or asymmetric input.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "matrix dimension must be >= 1".into(),
            ));
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        let mut data = data;
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if !symmetric_pair(a, b) {
                    return Err(Error::NotSymmetric { i, j, a, b });
                }
                let avg = 0.5 * (a + b);
                data[i * n + j] = avg;
                data[j * n + i] = avg;
            }
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(n, data)
    }

    /// Rank-one matrix `scale * v v^T`.
    pub fn outer(v: &[f64], scale: f64) -> Self {
        Self::from_upper_fn(v.len(), |i, j| scale * v[i] * v[j])
    }

    pub(crate) fn from_raw(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
        self.data[j * self.n + i] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    /// Entrywise product sum `A . B`.
    pub fn frobenius_inner(&self, other: &RealMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        dot(&self.data, &other.data)
    }

    /// Sum of all entries, i.e. `A . 1`.
    pub fn total_sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> RealMatrix {
        RealMatrix::from_raw(self.n, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, s: f64) -> RealMatrix {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &RealMatrix) -> RealMatrix {
        assert_eq!(self.n, other.n);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        RealMatrix::from_raw(self.n, data)
    }

    pub fn sub(&self, other: &RealMatrix) -> RealMatrix {
        assert_eq!(self.n, other.n);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        RealMatrix::from_raw(self.n, data)
    }

    pub fn max_abs_diff(&self, other: &RealMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// True when every entry is exactly +1 or -1.
    pub fn is_sign_matrix(&self) -> bool {
        self.data.iter().all(|&v| v == 1.0 || v == -1.0)
    }

    pub fn check_sign_matrix(&self) -> Result<()> {
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.get(i, j);
                if v != 1.0 && v != -1.0 {
                    return Err(Error::NotSignMatrix { i, j, value: v });
                }
            }
        }
        Ok(())
    }

    /// Number of entries (ordered) where the two matrices differ.
    pub fn hamming_distance(&self, other: &RealMatrix) -> usize {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Restriction to rows `rows` and columns `cols`, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<Block> {
        self.check_indices(rows)?;
        self.check_indices(cols)?;
        let data = rows
            .iter()
            .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        Ok(Block {
            rows: rows.len(),
            cols: cols.len(),
            data,
        })
    }

    /// Principal restriction `A^{S,S}`, which stays symmetric.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Result<RealMatrix> {
        self.check_indices(idx)?;
        let m = idx.len();
        let mut data = Vec::with_capacity(m * m);
        for &i in idx {
            let row = self.row(i);
            data.extend(idx.iter().map(|&j| row[j]));
        }
        Ok(RealMatrix::from_raw(m, data))
    }

    fn check_indices(&self, idx: &[usize]) -> Result<()> {
        if idx.is_empty() {
            return Err(Error::InvalidArgument("empty index set".into()));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.n) {
            return Err(Error::IndexOutOfBounds {
                index: bad,
                n: self.n,
            });
        }
        Ok(())
    }

    /// Writes the shared text format: `n`, then `n` rows with 17 significant
    /// digits per entry.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.n)?;
        let mut line = String::new();
        for i in 0..self.n {
            line.clear();
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    line.push(' ');
                }
                write!(line, "{v:.16e}").expect("writing to a String cannot fail");
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let (_, first) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let n: usize = first?.trim().parse().map_err(|e| Error::Parse {
            line: 1,
            msg: format!("bad dimension: {e}"),
        })?;
        let mut data = Vec::with_capacity(n * n);
        for row in 0..n {
            let (lineno, line) = lines.next().ok_or(Error::Parse {
                line: row + 2,
                msg: format!("expected {n} rows, found {row}"),
            })?;
            let line = line?;
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(tok.parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno + 1,
                    msg: format!("bad number `{tok}`: {e}"),
                })?);
            }
            if data.len() - before != n {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected {n} entries, found {}", data.len() - before),
                });
            }
        }
        Self::from_row_major(n, data)
    }
}

/// General rectangular restriction produced by [`RealMatrix::submatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Block {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Converts a square symmetric block back into a [`RealMatrix`].
    pub fn into_symmetric(self) -> Result<RealMatrix> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: self.cols,
            });
        }
        RealMatrix::from_row_major(self.rows, self.data)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

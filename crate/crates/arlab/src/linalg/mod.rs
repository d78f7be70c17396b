//! Minimal dense linear algebra: a row-major `f64` matrix, the elementwise and
//! reduction operations the rest of the crate needs, a seeded deterministic
//! RNG, and PCA for latent-space export.
//!
//! Shape mismatches are contract violations and panic with a descriptive
//! message; data-dependent failures elsewhere in the crate use [`crate::Error`].

mod pca;
mod rng;

pub use pca::{pca_project, Pca};
pub use rng::Rng;

use serde::{Deserialize, Serialize};

/// Dense 2-D matrix of `f64`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Serialization shim so deserialized matrices re-check the length invariant.
#[derive(Serialize, Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<Matrix> for RawMatrix {
    fn from(m: Matrix) -> Self {
        RawMatrix {
            rows: m.rows,
            cols: m.cols,
            data: m.data,
        }
    }
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = String;

    fn try_from(raw: RawMatrix) -> Result<Self, String> {
        if raw.data.len() != raw.rows * raw.cols {
            return Err(format!(
                "matrix data length {} does not match {}x{}",
                raw.data.len(),
                raw.rows,
                raw.cols
            ));
        }
        Ok(Matrix {
            rows: raw.rows,
            cols: raw.cols,
            data: raw.data,
        })
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "matrix data length {} does not match {rows}x{cols}",
            data.len()
        );
        let m = Matrix { rows, cols, data };
        debug_assert!(m.all_finite(), "matrix constructed with non-finite entries");
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "from_rows needs at least one row");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows in from_rows");
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix::from_vec(rows, cols, data)
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Standard matrix product. Panics unless `self.cols == b.rows`.
    pub fn matmul(&self, b: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, b.rows,
            "matmul shape mismatch: {}x{} by {}x{}",
            self.rows, self.cols, b.rows, b.cols
        );
        let mut out = vec![0.0; self.rows * b.cols];
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out[i * b.cols..(i + 1) * b.cols];
            for (k, &aik) in a_row.iter().enumerate() {
                let b_row = &b.data[k * b.cols..(k + 1) * b.cols];
                for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                    *o += aik * bkj;
                }
            }
        }
        Matrix {
            rows: self.rows,
            cols: b.cols,
            data: out,
        }
    }

    /// `self * b^T` without materializing the transpose.
    pub fn matmul_nt(&self, b: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, b.cols,
            "matmul_nt shape mismatch: {}x{} by ({}x{})^T",
            self.rows, self.cols, b.rows, b.cols
        );
        let mut out = vec![0.0; self.rows * b.rows];
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..b.rows {
                out[i * b.rows + j] = dot(a_row, b.row(j));
            }
        }
        Matrix {
            rows: self.rows,
            cols: b.rows,
            data: out,
        }
    }

    /// `self^T * b` without materializing the transpose.
    pub fn matmul_tn(&self, b: &Matrix) -> Matrix {
        assert_eq!(
            self.rows, b.rows,
            "matmul_tn shape mismatch: ({}x{})^T by {}x{}",
            self.rows, self.cols, b.rows, b.cols
        );
        let mut out = vec![0.0; self.cols * b.cols];
        for n in 0..self.rows {
            let a_row = self.row(n);
            let b_row = b.row(n);
            for (k, &ank) in a_row.iter().enumerate() {
                let out_row = &mut out[k * b.cols..(k + 1) * b.cols];
                for (o, &bnj) in out_row.iter_mut().zip(b_row) {
                    *o += ank * bnj;
                }
            }
        }
        Matrix {
            rows: self.cols,
            cols: b.cols,
            data: out,
        }
    }

    pub fn add(&self, b: &Matrix) -> Matrix {
        self.zip_with(b, "add", |x, y| x + y)
    }

    pub fn sub(&self, b: &Matrix) -> Matrix {
        self.zip_with(b, "sub", |x, y| x - y)
    }

    pub fn hadamard(&self, b: &Matrix) -> Matrix {
        self.zip_with(b, "hadamard", |x, y| x * y)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|x| x * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    fn zip_with(&self, b: &Matrix, op: &str, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(
            self.shape(),
            b.shape(),
            "{op} shape mismatch: {}x{} vs {}x{}",
            self.rows,
            self.cols,
            b.rows,
            b.cols
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&b.data)
                .map(|(&x, &y)| f(x, y))
                .collect(),
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data: out,
        }
    }

    /// Adds `v` to every row. Panics unless `v.len() == cols`.
    pub fn add_row_broadcast(&self, v: &[f64]) -> Matrix {
        assert_eq!(v.len(), self.cols, "broadcast vector length mismatch");
        let mut out = self.clone();
        for i in 0..self.rows {
            for (x, &b) in out.row_mut(i).iter_mut().zip(v) {
                *x += b;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += x;
            }
        }
        out
    }

    pub fn col_means(&self) -> Vec<f64> {
        assert!(self.rows > 0, "col_means of empty matrix");
        let n = self.rows as f64;
        self.col_sums().into_iter().map(|s| s / n).collect()
    }

    pub fn row_max(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// Per-row index of the maximum entry; ties resolve to the lowest index.
    pub fn row_argmax(&self) -> Vec<usize> {
        assert!(self.cols > 0, "row_argmax of zero-width matrix");
        (0..self.rows).map(|i| argmax(self.row(i))).collect()
    }

    pub fn row_sq_norms(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x * x).sum())
            .collect()
    }

    /// Per-row log(sum(exp(x))) computed in shifted form so large entries do
    /// not overflow.
    pub fn row_log_sum_exp(&self) -> Vec<f64> {
        (0..self.rows).map(|i| log_sum_exp(self.row(i))).collect()
    }

    /// Copies the listed rows into a new matrix, in the given order.
    pub fn gather_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            assert!(i < self.rows, "gather_rows index {i} out of range");
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
    }
}

/// Inner product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot length mismatch");
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Squared Euclidean distance between two equal-length slices.
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "sq_dist length mismatch");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Index of the maximum entry; ties resolve to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    assert!(!v.is_empty(), "argmax of empty slice");
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// log(sum(exp(v))) in shifted form: the row max is subtracted before
/// exponentiation, so `[1000, 1000]` yields `1000 + ln 2` without overflow.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    assert!(!v.is_empty(), "log_sum_exp of empty slice");
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

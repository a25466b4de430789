use thiserror::Error;

/// Dense row-major matrix of finite floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatrixError {
    #[error("matrix is {rows}x{cols}, not square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("matrix order {n} exceeds the limit of {cap}")]
    TooLarge { n: usize, cap: usize },
}

/// Pivots smaller than this fraction of the largest entry count as zero.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-12;

impl Matrix {
    /// Panics unless `data.len() == rows * cols` and both dimensions are positive.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn scalar(x: f64) -> Self {
        Self::new(1, 1, vec![x])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::new(n, n, vec![0.0; n * n]);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Zero-based access.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..other.cols {
                    out[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Matrix::new(self.rows, other.cols, out)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Inverts a square matrix by Gauss-Jordan elimination with partial pivoting.
///
/// The matrix counts as singular when a pivot falls below
/// [`SINGULAR_PIVOT_RATIO`] times its largest absolute entry.
pub fn minverse(m: &Matrix, cap: usize) -> Result<Matrix, MatrixError> {
    if m.rows != m.cols {
        return Err(MatrixError::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let n = m.rows;
    if n > cap {
        return Err(MatrixError::TooLarge { n, cap });
    }
    let threshold = SINGULAR_PIVOT_RATIO * m.max_abs();
    if threshold == 0.0 {
        return Err(MatrixError::Singular);
    }
    // [A | I], width 2n
    let w = 2 * n;
    let mut aug = vec![0.0; n * w];
    for i in 0..n {
        aug[i * w..i * w + n].copy_from_slice(&m.data[i * n..(i + 1) * n]);
        aug[i * w + n + i] = 1.0;
    }
    for k in 0..n {
        let pivot_row = (k..n)
            .max_by(|&a, &b| aug[a * w + k].abs().total_cmp(&aug[b * w + k].abs()))
            .expect("non-empty");
        let pivot = aug[pivot_row * w + k];
        if pivot.abs() < threshold {
            return Err(MatrixError::Singular);
        }
        if pivot_row != k {
            for j in 0..w {
                aug.swap(k * w + j, pivot_row * w + j);
            }
        }
        let inv = 1.0 / pivot;
        for j in 0..w {
            aug[k * w + j] *= inv;
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            let factor = aug[i * w + k];
            if factor == 0.0 {
                continue;
            }
            for j in 0..w {
                aug[i * w + j] -= factor * aug[k * w + j];
            }
        }
    }
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.extend_from_slice(&aug[i * w + n..(i + 1) * w]);
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err(MatrixError::Singular);
    }
    Ok(Matrix::new(n, n, out))
}

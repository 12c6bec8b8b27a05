use super::scalar::Real;
use super::NumericsError;

/// Compressed-row sparse matrix built from coordinate triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> SparseMatrix<T> {
    /// Builds the matrix from `(row, col, value)` triplets in any order.
    ///
    /// Indices must be in range and no `(row, col)` pair may repeat.
    pub fn from_triplets(rows: usize, cols: usize, mut entries: Vec<(usize, usize, T)>) -> Result<Self, NumericsError> {
        for &(i, j, v) in &entries {
            if i >= rows || j >= cols {
                return Err(NumericsError::InvalidSparse(format!(
                    "entry ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            if !v.is_finite() {
                return Err(NumericsError::InvalidSparse(format!("entry ({i}, {j}) is not finite")));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(NumericsError::InvalidSparse(format!(
                "duplicate entry ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut row_ptr = vec![0usize; rows + 1];
        for &(i, _, _) in &entries {
            row_ptr[i + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = entries.iter().map(|e| e.1).collect();
        let values = entries.iter().map(|e| e.2).collect();
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Same as [`from_triplets`](Self::from_triplets) but also enforces a density ceiling.
    pub fn from_triplets_bounded(
        rows: usize,
        cols: usize,
        entries: Vec<(usize, usize, T)>,
        max_density: f64,
    ) -> Result<Self, NumericsError> {
        let m = Self::from_triplets(rows, cols, entries)?;
        if m.density() > max_density {
            return Err(NumericsError::InvalidSparse(format!(
                "density {} exceeds bound {max_density}",
                m.density()
            )));
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn density(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        self.nnz() as f64 / (self.rows as f64 * self.cols as f64)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Triplets in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.rows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    pub fn scale(&mut self, s: T) {
        self.values.iter_mut().for_each(|v| *v = *v * s);
    }

    pub fn max_abs(&self) -> T {
        super::scalar::max_abs(&self.values)
    }

    /// `y = self * x`
    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.cols, "sparse matvec input length");
        assert_eq!(y.len(), self.rows, "sparse matvec output length");
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s = s + self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> super::DenseMatrix<T> {
        let mut m = super::DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            m.set(i, j, v);
        }
        m
    }
}

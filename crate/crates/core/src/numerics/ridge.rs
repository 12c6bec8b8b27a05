use rayon::prelude::*;

use super::dense::DenseMatrix;
use super::scalar::{axpy, dot, Real};
use super::NumericsError;

/// Largest tolerated `|G_ij - G_ji|`, relative to `max(1, max |G|)`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    lower: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factorizes a symmetric positive-definite matrix; only the lower triangle is read.
    ///
    /// Pivots at or below `n · ε · max diag(A)` are reported as singular.
    pub fn factor(a: &DenseMatrix<T>) -> Result<Self, NumericsError> {
        let n = a.rows();
        if a.cols() != n {
            return Err(NumericsError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let max_diag = (0..n).fold(T::zero(), |m, i| m.max(a.get(i, i).abs()));
        let floor = T::lit(n.max(1) as f64) * T::epsilon() * max_diag;
        let mut lower = vec![T::zero(); n * n];
        for i in 0..n {
            let (done, rest) = lower.split_at_mut(i * n);
            let row_i = &mut rest[..n];
            for j in 0..i {
                let row_j = &done[j * n..j * n + n];
                let s = a.get(i, j) - dot(&row_i[..j], &row_j[..j]);
                row_i[j] = s / row_j[j];
            }
            let d = a.get(i, i) - dot(&row_i[..i], &row_i[..i]);
            if !(d > floor) {
                return Err(NumericsError::Singular {
                    pivot: i,
                    value: d.as_f64(),
                });
            }
            row_i[i] = d.sqrt();
        }
        Ok(Self { n, lower })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for i in 0..n {
            let row = &self.lower[i * n..i * n + n];
            b[i] = (b[i] - dot(&row[..i], &b[..i])) / row[i];
        }
        for i in (0..n).rev() {
            let row = &self.lower[i * n..i * n + n];
            b[i] = b[i] / row[i];
            let xi = b[i];
            axpy(-xi, &row[..i], &mut b[..i]);
        }
    }

    /// Solves `W A = C` for `W`, one independent row at a time.
    pub fn solve_right(&self, c: &DenseMatrix<T>) -> Result<DenseMatrix<T>, NumericsError> {
        if c.cols() != self.n {
            return Err(NumericsError::DimensionMismatch {
                context: "right solve",
                expected: (c.rows(), self.n),
                found: c.shape(),
            });
        }
        let mut w = c.clone();
        if self.n == 0 {
            return Ok(w);
        }
        w.as_mut_slice()
            .par_chunks_mut(self.n)
            .for_each(|row| self.solve_in_place(row));
        Ok(w)
    }
}

/// Returns the largest asymmetry relative to `max(1, max |G|)`.
pub fn relative_asymmetry<T: Real>(g: &DenseMatrix<T>) -> f64 {
    let n = g.rows();
    let scale = g.max_abs().max(T::one());
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((g.get(i, j) - g.get(j, i)).abs());
        }
    }
    (worst / scale).as_f64()
}

/// Ridge solution from accumulated statistics: `C (G + mu I)⁻¹` for symmetric
/// `G = R Rᵀ` (features × features) and `C = X Rᵀ` (outputs × features).
pub fn ridge_solve_gram<T: Real>(
    gram: &DenseMatrix<T>,
    cross: &DenseMatrix<T>,
    mu: T,
) -> Result<DenseMatrix<T>, NumericsError> {
    let n = gram.rows();
    if gram.cols() != n {
        return Err(NumericsError::NotSquare {
            rows: gram.rows(),
            cols: gram.cols(),
        });
    }
    if cross.cols() != n {
        return Err(NumericsError::DimensionMismatch {
            context: "ridge cross-covariance",
            expected: (cross.rows(), n),
            found: cross.shape(),
        });
    }
    if !(mu >= T::zero()) {
        return Err(NumericsError::InvalidArgument(format!(
            "ridge parameter must be non-negative, got {mu}"
        )));
    }
    let asym = relative_asymmetry(gram);
    if asym > SYMMETRY_TOLERANCE {
        return Err(NumericsError::Asymmetric { deviation: asym });
    }
    let mut system = gram.clone();
    for i in 0..n {
        system.set(i, i, system.get(i, i) + mu);
    }
    let chol = Cholesky::factor(&system).map_err(|e| match e {
        NumericsError::Singular { pivot, value } if mu == T::zero() => NumericsError::Unregularized { pivot, value },
        other => other,
    })?;
    chol.solve_right(cross)
}

/// Ridge regression `W = X Rᵀ (R Rᵀ + mu I)⁻¹` with `R` (features × samples) and
/// `X` (outputs × samples).
pub fn ridge_solve<T: Real>(
    features: &DenseMatrix<T>,
    targets: &DenseMatrix<T>,
    mu: T,
) -> Result<DenseMatrix<T>, NumericsError> {
    if features.cols() != targets.cols() {
        return Err(NumericsError::DimensionMismatch {
            context: "ridge sample count",
            expected: (features.rows(), features.cols()),
            found: targets.shape(),
        });
    }
    let gram = features.matmul_transposed(features)?;
    let cross = targets.matmul_transposed(features)?;
    ridge_solve_gram(&gram, &cross, mu)
}

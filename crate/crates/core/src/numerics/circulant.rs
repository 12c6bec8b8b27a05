use num_complex::Complex;

use super::fourier::Dft;
use super::scalar::Real;
use super::NumericsError;

/// Eigenvalues below this fraction of the largest eigenvalue modulus count as zero.
pub const SINGULAR_TOLERANCE: f64 = 1e-13;

/// Circulant matrix `M[i][j] = c[(i - j) mod n]`, stored by its first column `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantOperator<T> {
    column: Vec<T>,
}

impl<T: Real> CirculantOperator<T> {
    pub fn new(first_column: Vec<T>) -> Result<Self, NumericsError> {
        if first_column.is_empty() {
            return Err(NumericsError::Empty("circulant stencil"));
        }
        Ok(Self { column: first_column })
    }

    /// Builds the operator `(M u)_i = Σ coeff · u_{i + offset}` with periodic wraparound.
    pub fn from_offsets(n: usize, taps: &[(isize, T)]) -> Result<Self, NumericsError> {
        let mut column = vec![T::zero(); n];
        if n == 0 {
            return Err(NumericsError::Empty("circulant stencil"));
        }
        for &(offset, coeff) in taps {
            let idx = (-offset).rem_euclid(n as isize) as usize;
            column[idx] = column[idx] + coeff;
        }
        Ok(Self { column })
    }

    pub fn len(&self) -> usize {
        self.column.len()
    }

    pub fn is_empty(&self) -> bool {
        self.column.is_empty()
    }

    pub fn first_column(&self) -> &[T] {
        &self.column
    }

    /// Coefficient multiplying `u_{i + offset}` in row `i`.
    pub fn coefficient(&self, offset: isize) -> T {
        let n = self.len() as isize;
        self.column[(-offset).rem_euclid(n) as usize]
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        assert_eq!(x.len(), n, "circulant apply length");
        let mut y = vec![T::zero(); n];
        for (d, &c) in self.column.iter().enumerate() {
            if c == T::zero() {
                continue;
            }
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = *yi + c * x[(i + n - d) % n];
            }
        }
        y
    }

    /// Eigenvalues `λ_k = Σ_d c_d exp(-2πi k d / n)`, ordered by wavenumber.
    pub fn eigenvalues(&self) -> Vec<Complex<T>> {
        let dft = Dft::new(self.len()).expect("non-empty stencil");
        let mut buf: Vec<Complex<T>> = self.column.iter().map(|&c| Complex::new(c, T::zero())).collect();
        dft.forward_raw(&mut buf);
        buf
    }

    pub fn factorize(&self) -> Result<CirculantSolver<T>, NumericsError> {
        CirculantSolver::new(self)
    }
}

/// Diagonalized form of a nonsingular circulant operator, reusable across solves.
#[derive(Debug, Clone)]
pub struct CirculantSolver<T: Real> {
    dft: Dft<T>,
    /// `1 / (n λ_k)`, folding the inverse-transform normalization in.
    inv_eigs: Vec<Complex<T>>,
}

impl<T: Real> CirculantSolver<T> {
    pub fn new(op: &CirculantOperator<T>) -> Result<Self, NumericsError> {
        Self::from_eigenvalues(op.eigenvalues())
    }

    /// Builds the solver from known eigenvalues `λ_k = Σ_j c_j e^{-2πijk/n}`.
    pub fn from_eigenvalues(eigs: Vec<Complex<T>>) -> Result<Self, NumericsError> {
        let largest = eigs.iter().fold(T::zero(), |m, e| m.max(e.norm()));
        let floor = T::lit(SINGULAR_TOLERANCE) * largest;
        if let Some(k) = eigs.iter().position(|e| e.norm() <= floor) {
            return Err(NumericsError::SingularMode {
                wavenumber: k,
                modulus: eigs[k].norm().as_f64(),
            });
        }
        let len = eigs.len();
        let n = T::lit(len as f64);
        let inv_eigs = eigs.iter().map(|e| (*e * n).inv()).collect();
        Ok(Self {
            dft: Dft::new(len)?,
            inv_eigs,
        })
    }

    pub fn len(&self) -> usize {
        self.inv_eigs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_eigs.is_empty()
    }

    /// Solves `M x = rhs` into `out`, using `work` (length n) as scratch.
    pub fn solve_into(&self, rhs: &[T], out: &mut [T], work: &mut [Complex<T>]) {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        assert_eq!(out.len(), n);
        assert_eq!(work.len(), n);
        for (w, &r) in work.iter_mut().zip(rhs) {
            *w = Complex::new(r, T::zero());
        }
        self.dft.forward_raw(work);
        for (w, &s) in work.iter_mut().zip(&self.inv_eigs) {
            *w = *w * s;
        }
        self.dft.inverse_raw(work);
        for (o, w) in out.iter_mut().zip(work.iter()) {
            *o = w.re;
        }
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.len()];
        let mut work = vec![Complex::new(T::zero(), T::zero()); self.len()];
        self.solve_into(rhs, &mut out, &mut work);
        out
    }
}

/// Solves `op · x = rhs` by diagonalizing the circulant operator with the DFT.
pub fn circulant_solve<T: Real>(op: &CirculantOperator<T>, rhs: &[T]) -> Result<Vec<T>, NumericsError> {
    if rhs.len() != op.len() {
        return Err(NumericsError::DimensionMismatch {
            context: "circulant solve",
            expected: (op.len(), 1),
            found: (rhs.len(), 1),
        });
    }
    Ok(op.factorize()?.solve(rhs))
}

//! Linear-algebra and signal kernels shared by the simulator and the reservoir.

mod circulant;
mod dense;
mod eigen;
mod fourier;
mod ridge;
mod scalar;
mod sparse;

use thiserror::Error;

pub use circulant::{circulant_solve, CirculantOperator, CirculantSolver, SINGULAR_TOLERANCE};
pub use dense::DenseMatrix;
pub use eigen::spectral_radius;
pub use fourier::{dft, idft, Dft};
pub use ridge::{relative_asymmetry, ridge_solve, ridge_solve_gram, Cholesky, SYMMETRY_TOLERANCE};
pub use scalar::{axpy, dot, max_abs, norm2, Real};
pub use sparse::SparseMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{context}: dimension mismatch, expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("{context}: non-finite value at flat index {index}")]
    NonFinite { context: &'static str, index: usize },
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("invalid sparse matrix: {0}")]
    InvalidSparse(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    Singular { pivot: usize, value: f64 },
    #[error(
        "normal matrix is singular without regularization (pivot {pivot} = {value:e}); \
         use a positive regularization parameter"
    )]
    Unregularized { pivot: usize, value: f64 },
    #[error("Gram matrix is not symmetric (relative deviation {deviation:e})")]
    Asymmetric { deviation: f64 },
    #[error("circulant operator is singular at wavenumber {wavenumber} (|eigenvalue| = {modulus:e})")]
    SingularMode { wavenumber: usize, modulus: f64 },
    #[error("no convergence after {iterations} iterations (last estimate {last_estimate})")]
    NoConvergence { iterations: usize, last_estimate: f64 },
}

#![allow(dead_code)]

use gks_esn::numerics::DenseMatrix;
use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn to_na(m: &DenseMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// max |a - b| / max(1, max |b|)
pub fn rel_diff(a: &DenseMatrix<f64>, b: &DenseMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.max_abs_diff(b) / b.max_abs().max(1.0)
}

/// `X Rᵀ (R Rᵀ + μ I)⁻¹` by a dense LU solve of the transposed system.
pub fn ridge_oracle(r: &DMatrix<f64>, x: &DMatrix<f64>, mu: f64) -> DMatrix<f64> {
    let n = r.nrows();
    let a = r * r.transpose() + DMatrix::identity(n, n) * mu;
    let b = r * x.transpose();
    a.lu().solve(&b).expect("oracle system is nonsingular").transpose()
}

/// Direct `O(N²)` sum `(1/N) Σ_j u_j e^{-2πikj/N}`.
pub fn naive_dft(u: &[f64]) -> Vec<Complex<f64>> {
    let n = u.len();
    (0..n)
        .map(|k| {
            let mut s = Complex::new(0.0, 0.0);
            for (j, &v) in u.iter().enumerate() {
                let th = -2.0 * std::f64::consts::PI * (k * j % n) as f64 / n as f64;
                s += Complex::new(th.cos(), th.sin()) * v;
            }
            s / n as f64
        })
        .collect()
}

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::scalar::Real;
use super::NumericsError;

/// Planned forward/inverse transforms of a fixed length.
///
/// The forward transform carries the `1/N` factor, so coefficient `k` approximates the
/// Fourier-series coefficient of a sampled periodic field:
/// `û_k = (1/N) Σ_j u_j exp(-2πi k j / N)`. The inverse is the plain synthesis sum.
#[derive(Clone)]
pub struct Dft<T: Real> {
    len: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Dft<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft").field("len", &self.len).finish()
    }
}

impl<T: Real> Dft<T> {
    pub fn new(len: usize) -> Result<Self, NumericsError> {
        if len == 0 {
            return Err(NumericsError::Empty("dft input"));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Normalized forward transform of a real signal into `out`.
    pub fn forward_into(&self, values: &[T], out: &mut [Complex<T>]) {
        assert_eq!(values.len(), self.len);
        assert_eq!(out.len(), self.len);
        for (o, &v) in out.iter_mut().zip(values) {
            *o = Complex::new(v, T::zero());
        }
        self.forward.process(out);
        let s = T::one() / T::lit(self.len as f64);
        out.iter_mut().for_each(|c| *c = *c * s);
    }

    pub fn forward(&self, values: &[T]) -> Vec<Complex<T>> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.len];
        self.forward_into(values, &mut out);
        out
    }

    /// Unnormalized forward transform of a complex buffer, in place.
    pub fn forward_raw(&self, buf: &mut [Complex<T>]) {
        self.forward.process(buf);
    }

    /// Synthesis `u_j = Σ_k û_k exp(2πi k j / N)`, in place.
    pub fn inverse_raw(&self, buf: &mut [Complex<T>]) {
        self.inverse.process(buf);
    }

    /// Inverse of [`forward`](Self::forward).
    pub fn inverse(&self, coeffs: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(coeffs.len(), self.len);
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        buf
    }
}

/// Normalized discrete Fourier transform of a real array.
pub fn dft<T: Real>(values: &[T]) -> Result<Vec<Complex<T>>, NumericsError> {
    Ok(Dft::new(values.len())?.forward(values))
}

/// Inverse of [`dft`]: `u_j = Σ_k û_k exp(2πi k j / N)`.
pub fn idft<T: Real>(coeffs: &[Complex<T>]) -> Result<Vec<Complex<T>>, NumericsError> {
    Ok(Dft::new(coeffs.len())?.inverse(coeffs))
}

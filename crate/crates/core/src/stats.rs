//! Power spectra, energies, linear-stability numbers and forecast metrics.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::numerics::{DenseMatrix, Dft, NumericsError, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("no snapshots to average")]
    Empty,
    #[error("wavenumber grids differ: {left} vs {right} bins")]
    GridMismatch { left: usize, right: usize },
    #[error("shapes differ: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("reference has zero energy")]
    ZeroEnergy,
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Where a spectrum came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Dns,
    Esn,
    EsnTl,
    /// ESN trained on the transfer data alone.
    EsnStar,
    Unknown,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Dns => "DNS",
            Source::Esn => "ESN",
            Source::EsnTl => "ESN-TL",
            Source::EsnStar => "ESN*",
            Source::Unknown => "unknown",
        })
    }
}

impl FromStr for Source {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "DNS" => Source::Dns,
            "ESN" => Source::Esn,
            "ESN-TL" => Source::EsnTl,
            "ESN*" => Source::EsnStar,
            "unknown" => Source::Unknown,
            other => {
                return Err(StatsError::InvalidArgument(format!(
                    "unknown spectrum source {other:?}"
                )))
            }
        })
    }
}

/// Time-averaged energies `e_k` for `k = 0..=N_x/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub energies: Vec<f64>,
    /// `N_x` of the fields the spectrum was computed from.
    pub grid_points: usize,
    pub n_samples: u64,
    pub length: f64,
    pub gamma: f64,
    pub source: Source,
    /// Free-form history, e.g. the manifest digest.
    pub note: String,
}

impl Spectrum {
    pub fn new(energies: Vec<f64>, grid_points: usize, n_samples: u64) -> Result<Self, StatsError> {
        if energies.len() != grid_points / 2 + 1 {
            return Err(StatsError::InvalidArgument(format!(
                "{} energies for a {grid_points}-point grid",
                energies.len()
            )));
        }
        if n_samples == 0 {
            return Err(StatsError::Empty);
        }
        if energies.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(StatsError::InvalidArgument(
                "energies must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            energies,
            grid_points,
            n_samples,
            length: f64::NAN,
            gamma: f64::NAN,
            source: Source::Unknown,
            note: String::new(),
        })
    }

    pub fn with_regime(mut self, length: f64, gamma: f64, source: Source) -> Self {
        self.length = length;
        self.gamma = gamma;
        self.source = source;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

const CHUNK: usize = 64;

/// `e_k = (1/N_t) Σ_n |û_k(t_n)|²` with `û = (1/N) Σ_j u_j e^{-2πikj/N}`.
///
/// `snapshots` is time-major: one row per snapshot.
pub fn power_spectrum<T: Real>(snapshots: &DenseMatrix<T>) -> Result<Spectrum, StatsError> {
    let (n_t, n) = snapshots.shape();
    if n_t == 0 || n == 0 {
        return Err(StatsError::Empty);
    }
    let bins = n / 2 + 1;
    let dft = Dft::<T>::new(n)?;
    // Fixed chunks reduced in order keep the sum independent of the thread count.
    let partial: Vec<Vec<f64>> = (0..n_t)
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|rows| {
            let mut acc = vec![0.0f64; bins];
            let mut coeffs = vec![num_complex::Complex::new(T::zero(), T::zero()); n];
            for &r in rows {
                dft.forward_into(snapshots.row(r), &mut coeffs);
                for (a, c) in acc.iter_mut().zip(&coeffs) {
                    *a += c.norm_sqr().as_f64();
                }
            }
            acc
        })
        .collect();
    let mut energies = vec![0.0f64; bins];
    for p in partial {
        for (e, v) in energies.iter_mut().zip(p) {
            *e += v;
        }
    }
    let inv = 1.0 / n_t as f64;
    energies.iter_mut().for_each(|e| *e *= inv);
    Spectrum::new(energies, n, n_t as u64)
}

/// Pooled mean of several spectra, weighted by their sample counts.
pub fn average_spectra(spectra: &[Spectrum]) -> Result<Spectrum, StatsError> {
    let first = spectra.first().ok_or(StatsError::Empty)?;
    let mut energies = vec![0.0; first.len()];
    let mut total = 0u64;
    for s in spectra {
        check_grid(first, s)?;
        let w = s.n_samples as f64;
        for (e, v) in energies.iter_mut().zip(&s.energies) {
            *e += w * v;
        }
        total += s.n_samples;
    }
    let inv = 1.0 / total as f64;
    energies.iter_mut().for_each(|e| *e *= inv);
    let mut out = Spectrum::new(energies, first.grid_points, total)?;
    out.length = first.length;
    out.gamma = first.gamma;
    out.source = first.source;
    out.note = first.note.clone();
    Ok(out)
}

fn check_grid(a: &Spectrum, b: &Spectrum) -> Result<(), StatsError> {
    if a.grid_points != b.grid_points || a.len() != b.len() {
        return Err(StatsError::GridMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Sum over the full symmetric spectrum: the time-averaged spatial mean square.
pub fn total_energy(s: &Spectrum) -> f64 {
    let n = s.grid_points;
    let e = &s.energies;
    if e.is_empty() {
        return 0.0;
    }
    let mut total = e[0];
    let last = e.len() - 1;
    for (k, &v) in e.iter().enumerate().skip(1) {
        // The Nyquist bin of an even grid has no partner.
        if k == last && n % 2 == 0 {
            total += v;
        } else {
            total += 2.0 * v;
        }
    }
    total
}

/// `|E(predicted) − E(truth)| / E(truth)`
pub fn relative_energy_error(predicted: &Spectrum, truth: &Spectrum) -> Result<f64, StatsError> {
    check_grid(predicted, truth)?;
    let t = total_energy(truth);
    if t == 0.0 {
        return Err(StatsError::ZeroEnergy);
    }
    Ok((total_energy(predicted) - t).abs() / t)
}

/// Mean of `|log10 p_k − log10 t_k|` over `k ∈ [k_min, k_max]`.
pub fn log_spectrum_error(
    predicted: &Spectrum,
    truth: &Spectrum,
    k_min: usize,
    k_max: usize,
) -> Result<f64, StatsError> {
    check_grid(predicted, truth)?;
    if k_min > k_max || k_max >= truth.len() {
        return Err(StatsError::InvalidArgument(format!(
            "wavenumber band {k_min}..={k_max} outside 0..{}",
            truth.len()
        )));
    }
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let (p, t) = (predicted.energies[k], truth.energies[k]);
        if p <= 0.0 || t <= 0.0 {
            return Err(StatsError::InvalidArgument(format!("zero energy at k = {k}")));
        }
        sum += (p.log10() - t.log10()).abs();
    }
    Ok(sum / (k_max - k_min + 1) as f64)
}

/// Linear-stability numbers of a domain and the approximate leading Lyapunov exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilitySummary {
    pub unstable_modes: u32,
    pub most_unstable: f64,
    pub lambda_max: f64,
}

pub fn stability_summary(length: f64) -> Result<StabilitySummary, StatsError> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(StatsError::InvalidArgument(format!(
            "domain length must be positive, got {length}"
        )));
    }
    let ratio = length / (2.0 * PI);
    let nearest = ratio.round();
    let modes = if (ratio - nearest).abs() <= 4.0 * f64::EPSILON * ratio {
        nearest
    } else {
        ratio.floor()
    };
    Ok(StabilitySummary {
        unstable_modes: modes as u32,
        most_unstable: length / (2.0 * 2f64.sqrt() * PI),
        lambda_max: lyapunov_exponent(0.0, length),
    })
}

/// `λ_i(L) ≈ 0.093 − 0.94 (i − 0.39) / L`
pub fn lyapunov_exponent(i: f64, length: f64) -> f64 {
    0.093 - 0.94 * (i - 0.39) / length
}

/// Simulated time spanning `lyapunov_times` at domain length `length`.
pub fn lyapunov_time_span(lyapunov_times: f64, length: f64) -> f64 {
    lyapunov_times / lyapunov_exponent(0.0, length)
}

/// Normalized error per step, `‖p_n − t_n‖ / rms(t)` with `rms(t)² = mean_n ‖t_n‖²`.
pub fn normalized_errors<T: Real>(predicted: &DenseMatrix<T>, truth: &DenseMatrix<T>) -> Result<Vec<f64>, StatsError> {
    if predicted.shape() != truth.shape() {
        return Err(StatsError::ShapeMismatch {
            left: predicted.shape(),
            right: truth.shape(),
        });
    }
    let n_t = truth.rows();
    if n_t == 0 {
        return Err(StatsError::Empty);
    }
    let sq = |v: &[T]| v.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>();
    let mean_sq = (0..n_t).map(|n| sq(truth.row(n))).sum::<f64>() / n_t as f64;
    if mean_sq == 0.0 {
        return Err(StatsError::ZeroEnergy);
    }
    let rms = mean_sq.sqrt();
    Ok((0..n_t)
        .map(|n| {
            let d: f64 = predicted
                .row(n)
                .iter()
                .zip(truth.row(n))
                .map(|(p, t)| {
                    let e = p.as_f64() - t.as_f64();
                    e * e
                })
                .sum();
            d.sqrt() / rms
        })
        .collect())
}

/// First time, in Lyapunov times, at which the normalized error exceeds `threshold`.
///
/// Row `n` is taken to sit at `n · dt_sample`; the full horizon `N_t · dt_sample · λ`
/// is returned when the threshold is never crossed.
pub fn nrmse_horizon<T: Real>(
    predicted: &DenseMatrix<T>,
    truth: &DenseMatrix<T>,
    threshold: f64,
    lambda_max: f64,
    dt_sample: f64,
) -> Result<f64, StatsError> {
    if !(threshold > 0.0) {
        return Err(StatsError::InvalidArgument(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let errors = normalized_errors(predicted, truth)?;
    let n = errors.iter().position(|&e| e > threshold).unwrap_or(errors.len());
    Ok(n as f64 * dt_sample * lambda_max)
}

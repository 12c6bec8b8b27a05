mod common;

use std::f64::consts::PI;

use common::*;
use gks_esn::numerics::DenseMatrix;
use gks_esn::stats::{
    average_spectra, log_spectrum_error, lyapunov_exponent, lyapunov_time_span, normalized_errors, nrmse_horizon,
    power_spectrum, relative_energy_error, stability_summary, total_energy, Source, Spectrum, StatsError,
};
use rand::seq::SliceRandom;
use rand::Rng;

#[test]
fn stability_table() {
    let rows = [
        (22.0, 3, 2.48, 0.1097),
        (29.0, 4, 3.26, 0.1056),
        (35.0, 5, 3.94, 0.1035),
        (43.0, 6, 4.84, 0.1015),
    ];
    for (l, s, m, lam) in rows {
        let summary = stability_summary(l).unwrap();
        assert_eq!(summary.unstable_modes, s, "L={l}");
        assert!(
            (summary.most_unstable - m).abs() < 0.005,
            "L={l}: {}",
            summary.most_unstable
        );
        assert!((summary.lambda_max - lam).abs() < 5e-5, "L={l}: {}", summary.lambda_max);
    }
}

#[test]
fn unstable_mode_count_at_exact_multiples() {
    for m in 1..=40u32 {
        let l = 2.0 * PI * m as f64;
        assert_eq!(stability_summary(l).unwrap().unstable_modes, m);
        assert_eq!(stability_summary(l * (1.0 - 1e-9)).unwrap().unstable_modes, m - 1);
        assert_eq!(stability_summary(l * (1.0 + 1e-9)).unwrap().unstable_modes, m);
    }
    assert!(stability_summary(0.0).is_err());
    assert!(stability_summary(f64::NAN).is_err());
}

#[test]
fn lyapunov_formula() {
    assert!((lyapunov_exponent(0.0, 29.0) - 0.1056).abs() < 5e-5);
    assert!((lyapunov_exponent(0.0, 35.0) - 0.1035).abs() < 5e-5);
    assert_eq!(lyapunov_exponent(0.39, 22.0), 0.093);
    for l in [10.0, 22.0, 100.0] {
        for i in 0..10 {
            assert!(lyapunov_exponent(i as f64 + 1.0, l) < lyapunov_exponent(i as f64, l));
        }
    }
    assert!((lyapunov_exponent(3.0, 1e12) - 0.093).abs() < 1e-10);
    assert!((lyapunov_time_span(1.0, 22.0) * lyapunov_exponent(0.0, 22.0) - 1.0).abs() < 1e-15);
}

fn cosine_snapshots(n: usize, rows: usize, mode: usize) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(rows, n, |_, j| (2.0 * PI * (mode * j) as f64 / n as f64).cos())
}

#[test]
fn spectrum_reference_fields() {
    let zero = power_spectrum(&DenseMatrix::<f64>::zeros(3, 16)).unwrap();
    assert_eq!(zero.energies, vec![0.0; 9]);
    assert_eq!(total_energy(&zero), 0.0);

    let s = power_spectrum(&cosine_snapshots(256, 4, 1)).unwrap();
    assert_eq!(s.len(), 129);
    assert_eq!(s.n_samples, 4);
    assert!((s.energies[1] - 0.25).abs() < 1e-15);
    assert!(s.energies.iter().enumerate().all(|(k, &e)| k == 1 || e < 1e-28));
    assert!((total_energy(&s) - 0.5).abs() < 1e-14);

    let nyquist = power_spectrum(&cosine_snapshots(16, 1, 8)).unwrap();
    assert!((nyquist.energies[8] - 1.0).abs() < 1e-15);
    assert!((total_energy(&nyquist) - 1.0).abs() < 1e-15);

    assert!(matches!(
        power_spectrum(&DenseMatrix::<f64>::zeros(0, 16)),
        Err(StatsError::Empty)
    ));
}

fn mean_square(m: &DenseMatrix<f64>) -> f64 {
    m.as_slice().iter().map(|v| v * v).sum::<f64>() / m.as_slice().len() as f64
}

#[test]
fn parseval_against_physical_space() {
    let mut g = rng(1);
    for _ in 0..50 {
        let n = g.gen_range(2..=80);
        let rows = g.gen_range(1..=150);
        let m = random_matrix(&mut g, rows, n);
        let s = power_spectrum(&m).unwrap();
        assert_eq!(s.len(), n / 2 + 1);
        assert!(s.energies.iter().all(|&e| e >= 0.0));
        let direct = mean_square(&m);
        assert!((total_energy(&s) - direct).abs() < 1e-10 * direct.max(1.0));
    }
}

#[test]
fn spectrum_ignores_snapshot_order() {
    let mut g = rng(2);
    let m = random_matrix(&mut g, 200, 32);
    let mut order: Vec<usize> = (0..200).collect();
    order.shuffle(&mut g);
    let shuffled = DenseMatrix::from_fn(200, 32, |i, j| m.get(order[i], j));
    let a = power_spectrum(&m).unwrap();
    let b = power_spectrum(&shuffled).unwrap();
    for (x, y) in a.energies.iter().zip(&b.energies) {
        assert!((x - y).abs() <= 1e-14 * x.max(1e-300));
    }
}

#[test]
fn averaging_weights_by_samples() {
    let mut g = rng(3);
    let m = random_matrix(&mut g, 30, 16);
    let top = DenseMatrix::new(10, 16, m.as_slice()[..160].to_vec()).unwrap();
    let bottom = DenseMatrix::new(20, 16, m.as_slice()[160..].to_vec()).unwrap();
    let avg = average_spectra(&[power_spectrum(&top).unwrap(), power_spectrum(&bottom).unwrap()]).unwrap();
    let whole = power_spectrum(&m).unwrap();
    assert_eq!(avg.n_samples, 30);
    for (x, y) in avg.energies.iter().zip(&whole.energies) {
        assert!((x - y).abs() < 1e-14);
    }
    assert!(average_spectra(&[]).is_err());
    let other = power_spectrum(&random_matrix(&mut g, 5, 32)).unwrap();
    assert!(matches!(
        average_spectra(&[whole, other]),
        Err(StatsError::GridMismatch { .. })
    ));
}

#[test]
fn energy_and_log_errors() {
    let mut g = rng(4);
    let truth = power_spectrum(&random_matrix(&mut g, 40, 32)).unwrap();
    assert_eq!(relative_energy_error(&truth, &truth).unwrap(), 0.0);
    let scaled = Spectrum::new(truth.energies.iter().map(|e| e * 1.04).collect(), 32, 40).unwrap();
    assert!((relative_energy_error(&scaled, &truth).unwrap() - 0.04).abs() < 1e-12);
    assert_eq!(log_spectrum_error(&truth, &truth, 1, 8).unwrap(), 0.0);
    let tenfold = Spectrum::new(truth.energies.iter().map(|e| e * 10.0).collect(), 32, 40).unwrap();
    assert!((log_spectrum_error(&tenfold, &truth, 1, 8).unwrap() - 1.0).abs() < 1e-12);
    assert!(log_spectrum_error(&truth, &truth, 1, 17).is_err());
    let zero = Spectrum::new(vec![0.0; 17], 32, 1).unwrap();
    assert!(matches!(
        relative_energy_error(&truth, &zero),
        Err(StatsError::ZeroEnergy)
    ));
}

#[test]
fn spectrum_validation_and_labels() {
    assert!(Spectrum::new(vec![1.0; 5], 16, 1).is_err());
    assert!(Spectrum::new(vec![1.0; 9], 16, 0).is_err());
    assert!(Spectrum::new(vec![-1.0; 9], 16, 1).is_err());
    for src in [
        Source::Dns,
        Source::Esn,
        Source::EsnTl,
        Source::EsnStar,
        Source::Unknown,
    ] {
        assert_eq!(src.to_string().parse::<Source>().unwrap(), src);
    }
    assert_eq!(Source::EsnTl.to_string(), "ESN-TL");
    assert!("esn".parse::<Source>().is_err());
}

#[test]
fn horizon_cases() {
    let mut g = rng(5);
    let truth = random_matrix(&mut g, 40, 16);
    let full = nrmse_horizon(&truth, &truth, 0.5, 0.1, 0.25).unwrap();
    assert!((full - 40.0 * 0.25 * 0.1).abs() < 1e-15);
    let zero = DenseMatrix::zeros(40, 16);
    assert_eq!(nrmse_horizon(&zero, &truth, 0.5, 0.1, 0.25).unwrap(), 0.0);

    let mut drift = truth.clone();
    for n in 20..40 {
        for j in 0..16 {
            drift.set(n, j, truth.get(n, j) + 10.0);
        }
    }
    let h = nrmse_horizon(&drift, &truth, 0.5, 0.1, 0.25).unwrap();
    assert!((h - 20.0 * 0.25 * 0.1).abs() < 1e-15);
    let e = normalized_errors(&drift, &truth).unwrap();
    assert!(e[..20].iter().all(|&v| v == 0.0));

    assert!(matches!(
        nrmse_horizon(&zero, &zero, 0.5, 0.1, 0.25),
        Err(StatsError::ZeroEnergy)
    ));
    assert!(nrmse_horizon(&truth, &truth, 0.0, 0.1, 0.25).is_err());
    assert!(matches!(
        nrmse_horizon(&DenseMatrix::zeros(3, 16), &truth, 0.5, 0.1, 0.25),
        Err(StatsError::ShapeMismatch { .. })
    ));
}

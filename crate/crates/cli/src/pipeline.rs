//! In-memory experiment steps shared by the subcommands.

use gks_esn::esn::{
    accumulate_dataset, build_reservoir, fit_readout, predict, transfer_from_statistics, EsnConfig, ReadoutModel,
    Reservoir, TrainingAccumulator,
};
use gks_esn::gks::{simulate_member, DomainConfig, Trajectory};
use gks_esn::numerics::DenseMatrix;
use gks_esn::stats::{average_spectra, lyapunov_exponent, nrmse_horizon, power_spectrum, Source, Spectrum};
use rayon::prelude::*;

use crate::error::CliError;

/// Simulates `n_traj` members in parallel; a blow-up names the member and seed.
pub fn simulate_dataset(
    config: &DomainConfig,
    n_traj: usize,
    transient: f64,
    record: f64,
) -> Result<Vec<Trajectory<f64>>, CliError> {
    config.validate()?;
    (0..n_traj)
        .into_par_iter()
        .map(|i| {
            simulate_member(config, i, transient, record)
                .map_err(|e| CliError::from(e).context(format!("trajectory {i} (seed {}, stream {i})", config.seed)))
        })
        .collect()
}

pub fn train(
    config: &EsnConfig,
    trajectories: &[&Trajectory<f64>],
) -> Result<(Reservoir<f64>, ReadoutModel<f64>), CliError> {
    let first = trajectories
        .first()
        .ok_or_else(|| CliError::validation("training split is empty"))?;
    let res = build_reservoir(config, first.grid_points())?;
    let acc = accumulate_dataset(&res, trajectories)?;
    let model = fit_readout(&acc, config.ridge)?;
    Ok((res, model))
}

/// Applies the transfer correction; with no transfer data the source model is returned unchanged.
pub fn transfer(
    res: &Reservoir<f64>,
    source: &ReadoutModel<f64>,
    tl: &[&Trajectory<f64>],
    alpha: f64,
) -> Result<(ReadoutModel<f64>, Option<TrainingAccumulator<f64>>), CliError> {
    if tl.is_empty() {
        let mut m = source.clone();
        m.provenance = format!("{}; transfer: none (level 0)", m.provenance);
        return Ok((m, None));
    }
    let acc = accumulate_dataset(res, tl)?;
    let m = transfer_from_statistics(source, &acc, alpha)?;
    Ok((m, Some(acc)))
}

/// Spectra and forecast horizons of a model over a set of truth trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub dns: Spectrum,
    pub esn: Spectrum,
    /// Per trajectory, in Lyapunov times.
    pub horizons: Vec<f64>,
    /// No closed-loop steps were taken; both spectra come from the spin-up window.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastSettings {
    pub spinup: usize,
    /// Closed-loop steps; `None` runs to the end of each truth trajectory.
    pub steps: Option<usize>,
    pub threshold: f64,
    pub source: Source,
}

fn segment(t: &Trajectory<f64>, start: usize, len: usize) -> DenseMatrix<f64> {
    let n = t.grid_points();
    DenseMatrix::new(len, n, t.frames.as_slice()[start * n..(start + len) * n].to_vec())
        .expect("segment of a valid trajectory")
}

pub fn forecast(
    res: &Reservoir<f64>,
    model: &ReadoutModel<f64>,
    truths: &[&Trajectory<f64>],
    settings: &ForecastSettings,
    note: &str,
) -> Result<Forecast, CliError> {
    let first = truths
        .first()
        .ok_or_else(|| CliError::validation("prediction split is empty"))?;
    let spin = settings.spinup;
    if spin == 0 {
        return Err(CliError::validation("spin-up must be at least one snapshot"));
    }
    let config = first.config;
    let lambda = lyapunov_exponent(0.0, config.length);
    for (i, t) in truths.iter().enumerate() {
        if t.len() < spin {
            return Err(CliError::validation(format!(
                "prediction trajectory {i} has {} snapshots, fewer than the spin-up {spin}",
                t.len()
            )));
        }
    }
    let available = truths.iter().map(|t| t.len() - spin).min().unwrap_or(0);
    let steps = settings.steps.unwrap_or(available).min(available);

    let parts: Vec<Result<(Spectrum, Spectrum, f64), CliError>> = truths
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            if steps == 0 {
                let window = segment(t, 0, spin);
                let s = power_spectrum(&window)?;
                return Ok((s.clone(), s, 0.0));
            }
            let mut r = res.clone();
            let warm: Vec<&[f64]> = (0..spin).map(|n| t.snapshot(n)).collect();
            let predicted = predict(&mut r, model, &warm, steps)
                .map_err(|e| CliError::from(e).context(format!("prediction trajectory {i}")))?;
            let truth = segment(t, spin, steps);
            let h = nrmse_horizon(&predicted, &truth, settings.threshold, lambda, config.dt_sample)?;
            Ok((power_spectrum(&truth)?, power_spectrum(&predicted)?, h))
        })
        .collect();
    let (mut dns, mut esn, mut horizons) = (Vec::new(), Vec::new(), Vec::new());
    for p in parts {
        let (d, e, h) = p?;
        dns.push(d);
        esn.push(e);
        horizons.push(h);
    }
    let degenerate = steps == 0;
    let tag = |s: Spectrum, src: Source| {
        let note = if degenerate {
            format!("{note}\ndegenerate: zero-step horizon")
        } else {
            note.to_string()
        };
        s.with_regime(config.length, config.gamma, src).with_note(note)
    };
    Ok(Forecast {
        dns: tag(average_spectra(&dns)?, Source::Dns),
        esn: tag(average_spectra(&esn)?, settings.source),
        horizons,
        degenerate,
    })
}

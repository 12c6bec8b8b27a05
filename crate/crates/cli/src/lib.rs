//! Command-line driver for gKS simulation, ESN training, forecasting and transfer.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod pipeline;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, ErrorKind};
pub use manifest::{Overrides, RunManifest};

#[derive(Debug, Parser)]
#[command(
    name = "gks-esn",
    version,
    about = "gKS simulation, echo state network forecasting and transfer learning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset of gKS trajectories.
    Simulate,
    /// Train a reservoir and readout on the training split.
    Train,
    /// Forecast the prediction split and write DNS and ESN spectra.
    Predict,
    /// Transfer a trained readout to the target regime and run the controls.
    Transfer,
    /// Join spectrum artifacts into one CSV with energy and spectrum errors.
    Compare {
        /// Spectrum artifacts (.bin).
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 1)]
        k_min: usize,
        #[arg(long, default_value_t = 8)]
        k_max: usize,
    },
    /// Print unstable-mode count, most unstable wavenumber and Lyapunov estimate for --L.
    Info,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML run manifest.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub out: Option<PathBuf>,
    /// Domain length.
    #[arg(long = "L", global = true, allow_negative_numbers = true)]
    pub length: Option<f64>,
    /// Dispersion coefficient.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Grid points.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub nx: Option<usize>,
    /// Integration step.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    /// Snapshot spacing.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub dt_sample: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub reservoir_size: Option<usize>,
    /// Input weight scale.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta1: Option<f64>,
    /// Adjacency spectral radius.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta2: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub density: Option<f64>,
    /// Readout ridge penalty.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Transfer ridge penalty.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Transfer level in percent of the training split.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tl_level: Option<f64>,
    /// Recorded trajectory length in Lyapunov times.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub lyapunov_times: Option<f64>,
    /// Dataset directory (defaults to OUT/dataset).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub dataset: Option<PathBuf>,
    /// Model directory (defaults to OUT/model).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub model: Option<PathBuf>,
}

impl Flags {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            threads: self.threads,
            out: self.out.clone(),
            length: self.length,
            gamma: self.gamma,
            nx: self.nx,
            dt: self.dt,
            dt_sample: self.dt_sample,
            reservoir_size: self.reservoir_size,
            beta1: self.beta1,
            beta2: self.beta2,
            density: self.density,
            mu: self.mu,
            alpha: self.alpha,
            tl_level: self.tl_level,
            lyapunov_times: self.lyapunov_times,
            dataset: self.dataset.clone(),
            model: self.model.clone(),
        }
    }

    /// Defaults, then the manifest file, then command-line values.
    pub fn resolve(&self) -> Result<RunManifest, CliError> {
        let mut m = match &self.manifest {
            Some(p) => RunManifest::load(p)?,
            None => RunManifest::default(),
        };
        m.apply(&self.overrides());
        Ok(m)
    }
}

/// Runs a parsed command line and returns the text for stdout.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let m = cli.flags.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(m.threads)
        .build()
        .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
    pool.install(|| execute(&cli.command, &m))
}

fn execute(command: &Command, m: &RunManifest) -> Result<String, CliError> {
    match command {
        Command::Simulate => {
            let files = commands::cmd_simulate(m)?;
            Ok(format!(
                "wrote {} trajectories to {}",
                files.len(),
                m.dataset_dir().display()
            ))
        }
        Command::Train => {
            let dir = commands::cmd_train(m)?;
            Ok(format!("wrote reservoir and readout to {}", dir.display()))
        }
        Command::Predict => {
            let r = commands::cmd_predict(m)?;
            let h: Vec<String> = r.forecast.horizons.iter().map(|h| format!("{h:.2}")).collect();
            let mut text = format!(
                "log10 spectrum error {:.4}, relative energy error {:.4}, horizons [{}] Lyapunov times",
                r.log_error,
                r.energy_error,
                h.join(", ")
            );
            if r.forecast.degenerate {
                text.push_str(" (degenerate: zero-step horizon)");
            }
            Ok(text)
        }
        Command::Transfer => {
            let r = commands::cmd_transfer(m)?;
            let (k0, k1) = (m.predict.k_min, m.predict.k_max);
            let line = |name: &str, s: &gks_esn::Spectrum| {
                format!(
                    "{name}: log10 error {:.4}, relative energy error {:.4}",
                    gks_esn::stats::log_spectrum_error(s, &r.dns, k0, k1).unwrap_or(f64::NAN),
                    gks_esn::stats::relative_energy_error(s, &r.dns).unwrap_or(f64::NAN)
                )
            };
            let mut lines = vec![
                format!("transfer trajectories: {}", r.tl_trajectories),
                line("ESN-TL", &r.transferred.esn),
                line("source", &r.source.esn),
            ];
            if let Some(s) = &r.star {
                lines.push(line("ESN*", &s.esn));
            }
            Ok(lines.join("\n"))
        }
        Command::Compare { files, k_min, k_max } => {
            let r = commands::cmd_compare(files, &m.out, *k_min, *k_max)?;
            let mut lines: Vec<String> = r
                .labels
                .iter()
                .zip(&r.energies)
                .map(|(l, e)| format!("{l}: total energy {e:.4}"))
                .collect();
            for p in &r.pairs {
                lines.push(format!(
                    "{} vs {}: relative energy error {:.4}, log10 error {}",
                    p.predicted,
                    p.truth,
                    p.relative_energy_error,
                    p.log_error.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into())
                ));
            }
            Ok(lines.join("\n"))
        }
        Command::Info => commands::cmd_info(m.domain.length),
    }
}

use std::path::{Path, PathBuf};

use gks_esn::esn::EsnConfig;
use gks_esn::gks::{DomainConfig, DEFAULT_TRANSIENT};
use gks_esn::stats::lyapunov_time_span;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    #[default]
    Simulate,
    Train,
    Predict,
    Transfer,
    Spectrum,
    Compare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    #[serde(rename = "L")]
    pub length: f64,
    pub gamma: f64,
    pub nx: usize,
    pub dt: f64,
    pub dt_sample: f64,
    /// Time units integrated and discarded before recording.
    pub transient: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        let d = DomainConfig::default();
        Self {
            length: d.length,
            gamma: d.gamma,
            nx: d.grid_points,
            dt: d.dt,
            dt_sample: d.dt_sample,
            transient: DEFAULT_TRANSIENT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub n_traj: usize,
    pub n_train: usize,
    /// Recorded length of each trajectory, in Lyapunov times.
    pub lyapunov_times: f64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            n_traj: 30,
            n_train: 20,
            lyapunov_times: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsnSection {
    pub reservoir_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub density: f64,
    pub mu: f64,
    pub washout: usize,
    pub spinup: usize,
    pub quadratic_features: bool,
}

impl Default for EsnSection {
    fn default() -> Self {
        let e = EsnConfig::default();
        Self {
            reservoir_size: e.reservoir_size,
            beta1: e.input_scale,
            beta2: e.spectral_radius,
            density: e.density,
            mu: e.ridge,
            washout: e.washout,
            spinup: 100,
            quadratic_features: e.quadratic_features,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferSection {
    pub alpha: f64,
    /// Percentage of the target training split used as transfer data.
    pub level: f64,
}

impl Default for TransferSection {
    fn default() -> Self {
        Self {
            alpha: 0.005,
            level: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    /// Closed-loop horizon in Lyapunov times; the whole truth trajectory when absent.
    pub lyapunov_times: Option<f64>,
    /// Normalized-error threshold of the forecast horizon.
    pub threshold: f64,
    pub k_min: usize,
    pub k_max: usize,
}

impl Default for PredictSection {
    fn default() -> Self {
        Self {
            lyapunov_times: None,
            threshold: 0.5,
            k_min: 1,
            k_max: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Dataset directory read by train, predict and transfer (target regime for transfer).
    pub dataset: Option<PathBuf>,
    /// Directory holding reservoir.bin and readout.bin (source model for transfer).
    pub model: Option<PathBuf>,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            dataset: None,
            model: None,
        }
    }
}

/// Declarative description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunManifest {
    pub experiment: Experiment,
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    pub out: PathBuf,
    pub domain: DomainSection,
    pub dataset: DatasetSection,
    pub esn: EsnSection,
    pub transfer: TransferSection,
    pub predict: PredictSection,
    pub paths: PathsSection,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            experiment: Experiment::default(),
            seed: 0,
            threads: 0,
            out: PathBuf::from("out"),
            domain: DomainSection::default(),
            dataset: DatasetSection::default(),
            esn: EsnSection::default(),
            transfer: TransferSection::default(),
            predict: PredictSection::default(),
            paths: PathsSection::default(),
        }
    }
}

/// Command-line values that take precedence over the manifest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub length: Option<f64>,
    pub gamma: Option<f64>,
    pub nx: Option<usize>,
    pub dt: Option<f64>,
    pub dt_sample: Option<f64>,
    pub reservoir_size: Option<usize>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub density: Option<f64>,
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    pub tl_level: Option<f64>,
    pub lyapunov_times: Option<f64>,
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

impl RunManifest {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("manifest: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        set(&mut self.seed, &o.seed);
        set(&mut self.threads, &o.threads);
        set(&mut self.out, &o.out);
        set(&mut self.domain.length, &o.length);
        set(&mut self.domain.gamma, &o.gamma);
        set(&mut self.domain.nx, &o.nx);
        set(&mut self.domain.dt, &o.dt);
        set(&mut self.domain.dt_sample, &o.dt_sample);
        set(&mut self.esn.reservoir_size, &o.reservoir_size);
        set(&mut self.esn.beta1, &o.beta1);
        set(&mut self.esn.beta2, &o.beta2);
        set(&mut self.esn.density, &o.density);
        set(&mut self.esn.mu, &o.mu);
        set(&mut self.transfer.alpha, &o.alpha);
        set(&mut self.transfer.level, &o.tl_level);
        set(&mut self.dataset.lyapunov_times, &o.lyapunov_times);
        if o.dataset.is_some() {
            self.paths.dataset = o.dataset.clone();
        }
        if o.model.is_some() {
            self.paths.model = o.model.clone();
        }
    }

    pub fn domain_config(&self) -> DomainConfig {
        DomainConfig {
            length: self.domain.length,
            gamma: self.domain.gamma,
            grid_points: self.domain.nx,
            dt: self.domain.dt,
            dt_sample: self.domain.dt_sample,
            seed: self.seed,
        }
    }

    pub fn esn_config(&self) -> EsnConfig {
        EsnConfig {
            reservoir_size: self.esn.reservoir_size,
            input_scale: self.esn.beta1,
            spectral_radius: self.esn.beta2,
            density: self.esn.density,
            ridge: self.esn.mu,
            seed: self.seed,
            washout: self.esn.washout,
            quadratic_features: self.esn.quadratic_features,
        }
    }

    /// Simulated time of one recorded trajectory.
    pub fn record_time(&self) -> f64 {
        lyapunov_time_span(self.dataset.lyapunov_times, self.domain.length)
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.paths.dataset.clone().unwrap_or_else(|| self.out.join("dataset"))
    }

    pub fn model_dir(&self) -> PathBuf {
        self.paths.model.clone().unwrap_or_else(|| self.out.join("model"))
    }

    /// Number of target training trajectories used for transfer.
    pub fn transfer_count(&self) -> usize {
        (self.transfer.level / 100.0 * self.dataset.n_train as f64).round() as usize
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::validation(m));
        self.domain_config().validate().map_err(CliError::from)?;
        if !(self.domain.transient >= 0.0 && self.domain.transient.is_finite()) {
            return bad(format!("transient must be non-negative, got {}", self.domain.transient));
        }
        self.esn_config().validate().map_err(CliError::from)?;
        let d = &self.dataset;
        if d.n_traj == 0 {
            return bad("dataset.n_traj must be at least 1".into());
        }
        if d.n_train > d.n_traj {
            return bad(format!("dataset.n_train ({}) exceeds n_traj ({})", d.n_train, d.n_traj));
        }
        if !(d.lyapunov_times >= 0.0 && d.lyapunov_times.is_finite()) {
            return bad(format!("lyapunov_times must be non-negative, got {}", d.lyapunov_times));
        }
        let t = &self.transfer;
        if !(t.alpha > 0.0 && t.alpha.is_finite()) {
            return bad(format!("transfer.alpha must be positive, got {}", t.alpha));
        }
        if !(0.0..=100.0).contains(&t.level) {
            return bad(format!("transfer.level must lie in [0, 100], got {}", t.level));
        }
        let p = &self.predict;
        if !(p.threshold > 0.0) {
            return bad(format!("predict.threshold must be positive, got {}", p.threshold));
        }
        if let Some(lt) = p.lyapunov_times {
            if !(lt >= 0.0 && lt.is_finite()) {
                return bad(format!("predict.lyapunov_times must be non-negative, got {lt}"));
            }
        }
        if p.k_min > p.k_max || p.k_max > self.domain.nx / 2 {
            return bad(format!(
                "wavenumber band {}..={} outside 0..={}",
                p.k_min,
                p.k_max,
                self.domain.nx / 2
            ));
        }
        Ok(())
    }

    /// SHA-256 over the settings that determine the numbers: seed, domain,
    /// dataset and ESN sections. Output location, threads, experiment kind and
    /// transfer settings are left out.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            seed: u64,
            domain: &'a DomainSection,
            dataset: &'a DatasetSection,
            esn: &'a EsnSection,
        }
        let text = toml::to_string(&Key {
            seed: self.seed,
            domain: &self.domain,
            dataset: &self.dataset,
            esn: &self.esn,
        })
        .expect("digest key serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

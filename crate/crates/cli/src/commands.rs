use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gks_esn::gks::Trajectory;
use gks_esn::stats::{
    log_spectrum_error, lyapunov_exponent, relative_energy_error, stability_summary, total_energy, Source, Spectrum,
};
use gks_esn::store::{
    export_spectrum_csv, format_value, load_readout, load_reservoir, load_spectrum, load_trajectory, save_readout,
    save_reservoir, save_spectrum, save_trajectory,
};

use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::pipeline::{self, Forecast, ForecastSettings};

pub const INDEX_FILE: &str = "index.csv";
const INDEX_HEADER: &str = "index,file,seed,L,gamma,snapshots,c1,c2,p1,p2";

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn provenance(m: &RunManifest) -> String {
    format!("manifest={}", m.digest())
}

/// Generates the dataset described by the manifest into `dataset_dir()`.
pub fn cmd_simulate(m: &RunManifest) -> Result<Vec<PathBuf>, CliError> {
    m.validate()?;
    let config = m.domain_config();
    let data = pipeline::simulate_dataset(&config, m.dataset.n_traj, m.domain.transient, m.record_time())?;
    let dir = m.dataset_dir();
    ensure_dir(&dir)?;
    let prov = provenance(m);
    let mut index = format!("# {prov}\n{INDEX_HEADER}\n");
    let mut files = Vec::with_capacity(data.len());
    for (i, t) in data.iter().enumerate() {
        let name = format!("traj_{i:04}.bin");
        let path = dir.join(&name);
        save_trajectory(t, &prov, &path)?;
        let ic = t
            .initial_condition
            .as_ref()
            .expect("dataset members carry their initial condition");
        let _ = writeln!(
            index,
            "{i},{name},{},{},{},{},{},{},{},{}",
            config.seed,
            config.length,
            config.gamma,
            t.len(),
            ic.c1,
            ic.c2,
            ic.p1,
            ic.p2
        );
        files.push(path);
    }
    write(&dir.join(INDEX_FILE), &index)?;
    Ok(files)
}

/// Reads every trajectory listed in a dataset index, in index order.
pub fn load_dataset(dir: &Path) -> Result<Vec<Trajectory<f64>>, CliError> {
    let index_path = dir.join(INDEX_FILE);
    let text = fs::read_to_string(&index_path).map_err(|e| CliError::io(&index_path, e))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    if lines.next() != Some(INDEX_HEADER) {
        return Err(CliError::validation(format!(
            "{}: unexpected header",
            index_path.display()
        )));
    }
    let mut out = Vec::new();
    for (row, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let index: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| CliError::validation(format!("{}: bad row {row}", index_path.display())))?;
        if index != row {
            return Err(CliError::validation(format!(
                "{}: row {row} lists index {index}",
                index_path.display()
            )));
        }
        let file = fields
            .next()
            .ok_or_else(|| CliError::validation(format!("{}: row {row} has no file", index_path.display())))?;
        let (t, _) = load_trajectory(&dir.join(file))?;
        out.push(t);
    }
    if out.is_empty() {
        return Err(CliError::validation(format!("{}: dataset is empty", dir.display())));
    }
    Ok(out)
}

fn split<'a>(
    m: &RunManifest,
    data: &'a [Trajectory<f64>],
) -> Result<(Vec<&'a Trajectory<f64>>, Vec<&'a Trajectory<f64>>), CliError> {
    let n_train = m.dataset.n_train;
    if data.len() < n_train {
        return Err(CliError::validation(format!(
            "dataset holds {} trajectories, training split needs {n_train}",
            data.len()
        )));
    }
    Ok((data[..n_train].iter().collect(), data[n_train..].iter().collect()))
}

/// Trains a reservoir and readout on the training split.
pub fn cmd_train(m: &RunManifest) -> Result<PathBuf, CliError> {
    m.validate()?;
    let data = load_dataset(&m.dataset_dir())?;
    let (train, _) = split(m, &data)?;
    let (res, mut model) = pipeline::train(&m.esn_config(), &train)?;
    let prov = provenance(m);
    model.provenance = format!("{prov}; seed={}; {}", m.seed, model.provenance);
    let dir = m.model_dir();
    ensure_dir(&dir)?;
    save_reservoir(&res, &prov, &dir.join("reservoir.bin"))?;
    save_readout(&model, &prov, &dir.join("readout.bin"))?;
    Ok(dir)
}

fn settings(m: &RunManifest, source: Source) -> ForecastSettings {
    let lambda = lyapunov_exponent(0.0, m.domain.length);
    ForecastSettings {
        spinup: m.esn.spinup,
        steps: m
            .predict
            .lyapunov_times
            .map(|lt| (lt / lambda / m.domain.dt_sample + 1e-9).floor() as usize),
        threshold: m.predict.threshold,
        source,
    }
}

fn write_spectrum(s: &Spectrum, prov: &str, dir: &Path, stem: &str) -> Result<(), CliError> {
    save_spectrum(s, prov, &dir.join(format!("{stem}.bin")))?;
    export_spectrum_csv(s, &dir.join(format!("{stem}.csv")))?;
    Ok(())
}

fn write_horizons(f: &Forecast, path: &Path) -> Result<(), CliError> {
    let mut text = String::from("trajectory,horizon_lyapunov_times\n");
    for (i, h) in f.horizons.iter().enumerate() {
        let _ = writeln!(text, "{i},{}", format_value(*h));
    }
    write(path, &text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictReport {
    pub forecast: Forecast,
    pub log_error: f64,
    pub energy_error: f64,
}

/// Closed-loop forecasts over the prediction split with DNS and ESN spectra.
pub fn cmd_predict(m: &RunManifest) -> Result<PredictReport, CliError> {
    m.validate()?;
    let model_dir = m.model_dir();
    let (res, _) = load_reservoir(&model_dir.join("reservoir.bin"))?;
    let (model, _) = load_readout(&model_dir.join("readout.bin"))?;
    let data = load_dataset(&m.dataset_dir())?;
    let (_, truths) = split(m, &data)?;
    let prov = provenance(m);
    let f = pipeline::forecast(&res, &model, &truths, &settings(m, Source::Esn), &prov)?;
    let dir = m.out.join("predict");
    ensure_dir(&dir)?;
    write_spectrum(&f.dns, &prov, &dir, "spectrum_dns")?;
    write_spectrum(&f.esn, &prov, &dir, "spectrum_esn")?;
    write_horizons(&f, &dir.join("horizons.csv"))?;
    let (k0, k1) = (m.predict.k_min, m.predict.k_max);
    Ok(PredictReport {
        log_error: log_spectrum_error(&f.esn, &f.dns, k0, k1).unwrap_or(f64::NAN),
        energy_error: relative_energy_error(&f.esn, &f.dns)?,
        forecast: f,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub dns: Spectrum,
    pub transferred: Forecast,
    /// Source model applied to the target regime without correction.
    pub source: Forecast,
    /// Fresh readout fitted on the transfer data alone; absent at level 0.
    pub star: Option<Forecast>,
    pub tl_trajectories: usize,
}

/// Moves the source model to the target regime of `dataset_dir()` and runs both controls.
pub fn cmd_transfer(m: &RunManifest) -> Result<TransferReport, CliError> {
    m.validate()?;
    let model_dir = m.model_dir();
    let (res, _) = load_reservoir(&model_dir.join("reservoir.bin"))?;
    let (source_model, _) = load_readout(&model_dir.join("readout.bin"))?;
    let data = load_dataset(&m.dataset_dir())?;
    let (train, truths) = split(m, &data)?;
    let n_tl = m.transfer_count();
    let tl = &train[..n_tl];
    let (tl_model, acc) = pipeline::transfer(&res, &source_model, tl, m.transfer.alpha)?;

    let prov = provenance(m);
    let transferred = pipeline::forecast(&res, &tl_model, &truths, &settings(m, Source::EsnTl), &prov)?;
    let source = pipeline::forecast(&res, &source_model, &truths, &settings(m, Source::Esn), &prov)?;
    let star = match &acc {
        Some(acc) => {
            let star_model = gks_esn::esn::fit_readout(acc, m.esn.mu)?;
            Some(pipeline::forecast(
                &res,
                &star_model,
                &truths,
                &settings(m, Source::EsnStar),
                &prov,
            )?)
        }
        None => None,
    };

    let dir = m.out.join("transfer");
    ensure_dir(&dir)?;
    save_readout(&tl_model, &prov, &dir.join("readout_tl.bin"))?;
    write_spectrum(&transferred.dns, &prov, &dir, "spectrum_dns")?;
    write_spectrum(&transferred.esn, &prov, &dir, "spectrum_esn_tl")?;
    write_spectrum(&source.esn, &prov, &dir, "spectrum_source")?;
    write_horizons(&transferred, &dir.join("horizons_tl.csv"))?;
    if let Some(s) = &star {
        write_spectrum(&s.esn, &prov, &dir, "spectrum_esn_star")?;
    }

    let (k0, k1) = (m.predict.k_min, m.predict.k_max);
    let dns = transferred.dns.clone();
    let mut summary = format!(
        "# {prov}\n# transfer trajectories={n_tl} alpha={}\nmodel,log10_error,relative_energy_error\n",
        m.transfer.alpha
    );
    let mut row = |name: &str, s: &Spectrum| -> Result<(), CliError> {
        let le = log_spectrum_error(s, &dns, k0, k1)
            .map(format_value)
            .unwrap_or_default();
        let ee = relative_energy_error(s, &dns)?;
        let _ = writeln!(summary, "{name},{le},{}", format_value(ee));
        Ok(())
    };
    row("ESN-TL", &transferred.esn)?;
    row("source", &source.esn)?;
    if let Some(s) = &star {
        row("ESN*", &s.esn)?;
    }
    write(&dir.join("summary.csv"), &summary)?;

    Ok(TransferReport {
        dns,
        transferred,
        source,
        star,
        tl_trajectories: n_tl,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairError {
    pub predicted: String,
    pub truth: String,
    pub relative_energy_error: f64,
    pub log_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub labels: Vec<String>,
    pub energies: Vec<f64>,
    pub pairs: Vec<PairError>,
}

/// Joins spectra into one CSV and tabulates energies and pairwise errors.
pub fn cmd_compare(files: &[PathBuf], out: &Path, k_min: usize, k_max: usize) -> Result<CompareReport, CliError> {
    if files.is_empty() {
        return Err(CliError::validation("compare needs at least one spectrum file"));
    }
    let mut spectra = Vec::with_capacity(files.len());
    let mut labels = Vec::with_capacity(files.len());
    for f in files {
        let (s, _) = load_spectrum(f)?;
        if let Some(first) = spectra.first() {
            let first: &Spectrum = first;
            if first.grid_points != s.grid_points {
                return Err(CliError::validation(format!(
                    "{}: grid of {} points, expected {}",
                    f.display(),
                    s.grid_points,
                    first.grid_points
                )));
            }
        }
        let stem = f
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut label = stem.clone();
        let mut n = 1;
        while labels.contains(&label) {
            n += 1;
            label = format!("{stem}_{n}");
        }
        labels.push(label);
        spectra.push(s);
    }
    let energies: Vec<f64> = spectra.iter().map(total_energy).collect();

    ensure_dir(out)?;
    let mut joined = String::new();
    for (l, s) in labels.iter().zip(&spectra) {
        let _ = writeln!(
            joined,
            "# {l}: source={} L={} gamma={} n_samples={}",
            s.source, s.length, s.gamma, s.n_samples
        );
    }
    let _ = writeln!(joined, "k,{}", labels.join(","));
    for k in 0..spectra[0].len() {
        let row: Vec<String> = spectra.iter().map(|s| format_value(s.energies[k])).collect();
        let _ = writeln!(joined, "{k},{}", row.join(","));
    }
    write(&out.join("compare.csv"), &joined)?;

    let mut totals = String::from("spectrum,total_energy\n");
    for (l, e) in labels.iter().zip(&energies) {
        let _ = writeln!(totals, "{l},{}", format_value(*e));
    }
    write(&out.join("energies.csv"), &totals)?;

    let mut pairs = Vec::new();
    let mut table = format!("predicted,truth,relative_energy_error,log10_error_k{k_min}_{k_max}\n");
    for (i, p) in spectra.iter().enumerate() {
        for (j, t) in spectra.iter().enumerate() {
            if i == j || energies[j] == 0.0 {
                continue;
            }
            let ree = relative_energy_error(p, t)?;
            let le = log_spectrum_error(p, t, k_min, k_max).ok();
            let _ = writeln!(
                table,
                "{},{},{},{}",
                labels[i],
                labels[j],
                format_value(ree),
                le.map(format_value).unwrap_or_default()
            );
            pairs.push(PairError {
                predicted: labels[i].clone(),
                truth: labels[j].clone(),
                relative_energy_error: ree,
                log_error: le,
            });
        }
    }
    write(&out.join("pairs.csv"), &table)?;
    Ok(CompareReport {
        labels,
        energies,
        pairs,
    })
}

/// One-line stability summary of a domain length.
pub fn cmd_info(length: f64) -> Result<String, CliError> {
    let s = stability_summary(length)?;
    Ok(format!(
        "L={length} unstable_modes={} most_unstable={:.4} lambda_max={:.4} lyapunov_time={:.4}",
        s.unstable_modes,
        s.most_unstable,
        s.lambda_max,
        1.0 / s.lambda_max
    ))
}

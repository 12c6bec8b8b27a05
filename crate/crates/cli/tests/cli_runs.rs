use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::Parser;
use gks_esn::stats::Spectrum;
use gks_esn::store::{load_spectrum, save_spectrum};
use gks_esn_cli::commands::cmd_compare;
use gks_esn_cli::{run, Cli, ErrorKind, RunManifest};
use tempfile::tempdir;

const SMALL: &str = r#"
seed = 3
threads = 1

[domain]
L = 22.0
nx = 32
dt = 0.01
dt_sample = 0.25
transient = 10.0

[dataset]
n_traj = 4
n_train = 2
lyapunov_times = 4.0

[esn]
reservoir_size = 60
beta1 = 0.5
beta2 = 0.4
density = 0.1
mu = 1e-3
washout = 10
spinup = 10

[transfer]
alpha = 0.01
level = 50.0
"#;

fn write_manifest(dir: &Path, extra: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, format!("{SMALL}{extra}")).unwrap();
    p
}

fn cli(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("gks-esn").chain(args.iter().copied())).unwrap()
}

fn run_args(args: &[&str]) -> Result<String, gks_esn_cli::CliError> {
    run(&cli(args))
}

fn binary(args: &[&str]) -> (i32, String, String) {
    let out = Process::new(env!("CARGO_BIN_EXE_gks-esn")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    files
}

#[test]
fn command_line_overrides_manifest_over_defaults() {
    let dir = tempdir().unwrap();
    let manifest = write_manifest(dir.path(), "");
    let m = manifest.to_str().unwrap();

    let from_file = cli(&["info", "--manifest", m]).flags.resolve().unwrap();
    assert_eq!(from_file.seed, 3);
    assert_eq!(from_file.domain.nx, 32);
    assert_eq!(from_file.esn.reservoir_size, 60);
    assert_eq!(from_file.dataset.n_traj, 4);
    assert_eq!(
        from_file.esn.quadratic_features,
        RunManifest::default().esn.quadratic_features
    );

    let over = cli(&[
        "train",
        "--manifest",
        m,
        "--seed",
        "11",
        "--L",
        "43",
        "--gamma",
        "0.1",
        "--nx",
        "64",
        "--dt",
        "0.02",
        "--dt-sample",
        "0.5",
        "--reservoir-size",
        "80",
        "--beta1",
        "0.2",
        "--beta2",
        "0.3",
        "--density",
        "0.05",
        "--mu",
        "0.5",
        "--alpha",
        "0.7",
        "--tl-level",
        "25",
        "--lyapunov-times",
        "9",
        "--threads",
        "2",
        "--out",
        "elsewhere",
    ])
    .flags
    .resolve()
    .unwrap();
    assert_eq!(over.seed, 11);
    assert_eq!(over.domain.length, 43.0);
    assert_eq!(over.domain.gamma, 0.1);
    assert_eq!(over.domain.nx, 64);
    assert_eq!(over.domain.dt, 0.02);
    assert_eq!(over.domain.dt_sample, 0.5);
    assert_eq!(over.esn.reservoir_size, 80);
    assert_eq!(over.esn.beta1, 0.2);
    assert_eq!(over.esn.beta2, 0.3);
    assert_eq!(over.esn.density, 0.05);
    assert_eq!(over.esn.mu, 0.5);
    assert_eq!(over.transfer.alpha, 0.7);
    assert_eq!(over.transfer.level, 25.0);
    assert_eq!(over.dataset.lyapunov_times, 9.0);
    assert_eq!(over.threads, 2);
    assert_eq!(over.out, PathBuf::from("elsewhere"));
    assert_eq!(over.esn.washout, 10);
    assert_eq!(over.domain.transient, 10.0);

    let bare = cli(&["info"]).flags.resolve().unwrap();
    assert_eq!(bare, RunManifest::default());
}

#[test]
fn exit_codes() {
    let (code, stdout, _) = binary(&["info", "--L", "22"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("unstable_modes=3"), "{stdout}");

    assert_eq!(binary(&["info", "--L", "-3"]).0, 2);
    assert_eq!(binary(&["info", "--bogus"]).0, 2);
    assert_eq!(binary(&["frobnicate"]).0, 2);

    let dir = tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    assert_eq!(binary(&["info", "--manifest", missing.to_str().unwrap()]).0, 4);

    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, "seed = 1\n[domain]\nwidth = 3.0\n").unwrap();
    let (code, _, stderr) = binary(&["info", "--manifest", unknown.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.starts_with("error:"), "{stderr}");

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(binary(&["train", "--out", empty.to_str().unwrap()]).0, 4);

    let manifest = write_manifest(dir.path(), "");
    let m = manifest.to_str().unwrap();
    let out = dir.path().join("run");
    let o = out.to_str().unwrap();
    assert_eq!(binary(&["simulate", "--manifest", m, "--out", o]).0, 0);
    assert_eq!(binary(&["train", "--manifest", m, "--out", o, "--density", "2"]).0, 2);
    let (code, _, stderr) = binary(&[
        "train",
        "--manifest",
        m,
        "--out",
        o,
        "--mu",
        "0",
        "--reservoir-size",
        "400",
    ]);
    assert_eq!(code, 3, "{stderr}");
}

#[test]
fn runs_are_byte_identical_across_thread_counts() {
    let dir = tempdir().unwrap();
    let manifest = write_manifest(dir.path(), "");
    let m = manifest.to_str().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = out.to_str().unwrap();
        for cmd in ["simulate", "train", "predict", "transfer"] {
            run_args(&[cmd, "--manifest", m, "--out", o, "--threads", threads]).unwrap();
        }
        outputs.push(tree(&out));
    }
    assert!(outputs[0].len() >= 20, "{:?}", outputs[0].keys());
    assert_eq!(outputs[0], outputs[1]);

    let other = dir.path().join("reseeded");
    let o = other.to_str().unwrap();
    run_args(&["simulate", "--manifest", m, "--out", o, "--seed", "4"]).unwrap();
    let a = fs::read(dir.path().join("t1/dataset/traj_0000.bin")).unwrap();
    let b = fs::read(other.join("dataset/traj_0000.bin")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn zero_level_transfer_reproduces_the_source_forecast() {
    let dir = tempdir().unwrap();
    let manifest = write_manifest(dir.path(), "");
    let m = manifest.to_str().unwrap();
    let source = dir.path().join("source");
    let s = source.to_str().unwrap();
    run_args(&["simulate", "--manifest", m, "--out", s]).unwrap();
    run_args(&["train", "--manifest", m, "--out", s]).unwrap();

    let target = dir.path().join("target");
    let t = target.to_str().unwrap();
    let target_args = [
        "--manifest",
        m,
        "--out",
        t,
        "--L",
        "29",
        "--model",
        &format!("{s}/model"),
    ];
    let with = |cmd: &str, extra: &[&str]| {
        let mut args = vec![cmd];
        args.extend_from_slice(&target_args);
        args.extend_from_slice(extra);
        run_args(&args)
    };
    with("simulate", &[]).unwrap();
    with("predict", &[]).unwrap();
    with("transfer", &["--tl-level", "0"]).unwrap();

    let predicted = fs::read(target.join("predict/spectrum_esn.bin")).unwrap();
    let control = fs::read(target.join("transfer/spectrum_source.bin")).unwrap();
    assert_eq!(predicted, control);
    let tl = fs::read(target.join("transfer/spectrum_esn_tl.bin")).unwrap();
    let (tl, _) = gks_esn::store::decode_artifact(gks_esn::store::ArtifactKind::Spectrum, &tl).unwrap();
    let (src, _) = gks_esn::store::decode_artifact(gks_esn::store::ArtifactKind::Spectrum, &control).unwrap();
    match (tl, src) {
        (gks_esn::store::Artifact::Spectrum(a), gks_esn::store::Artifact::Spectrum(b)) => {
            assert_eq!(a.energies, b.energies)
        }
        other => panic!("{other:?}"),
    }
    assert!(!target.join("transfer/spectrum_esn_star.bin").exists());
    let summary = fs::read_to_string(target.join("transfer/summary.csv")).unwrap();
    assert!(summary.contains("transfer trajectories=0"), "{summary}");
}

#[test]
fn compare_reports_pairwise_errors() {
    let dir = tempdir().unwrap();
    let energies: Vec<f64> = (0..17).map(|k| 1.0 / (1.0 + k as f64)).collect();
    let base = Spectrum::new(energies.clone(), 32, 10).unwrap();
    let scaled = Spectrum::new(energies.iter().map(|e| e * 1.25).collect(), 32, 10).unwrap();
    let paths: Vec<PathBuf> = ["a", "b", "c"]
        .iter()
        .map(|n| dir.path().join(format!("{n}.bin")))
        .collect();
    save_spectrum(&base, "x", &paths[0]).unwrap();
    save_spectrum(&base, "x", &paths[1]).unwrap();
    save_spectrum(&scaled, "x", &paths[2]).unwrap();

    let out = dir.path().join("cmp");
    let r = cmd_compare(&paths, &out, 1, 8).unwrap();
    assert_eq!(r.labels, vec!["a", "b", "c"]);
    assert_eq!(r.pairs.len(), 6);
    let pair = |p: &str, t: &str| r.pairs.iter().find(|e| e.predicted == p && e.truth == t).unwrap();
    assert_eq!(pair("a", "b").relative_energy_error, 0.0);
    assert_eq!(pair("a", "b").log_error, Some(0.0));
    assert!((pair("c", "a").relative_energy_error - 0.25).abs() < 1e-14);
    assert!((pair("c", "a").log_error.unwrap() - 1.25f64.log10()).abs() < 1e-14);
    assert!((r.energies[2] / r.energies[0] - 1.25).abs() < 1e-14);

    let joined = fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(joined.lines().any(|l| l == "k,a,b,c"));
    assert_eq!(joined.lines().filter(|l| !l.starts_with('#')).count(), 18);
    for name in ["energies.csv", "pairs.csv"] {
        assert!(out.join(name).exists());
    }

    let wide = Spectrum::new(vec![1.0; 33], 64, 1).unwrap();
    save_spectrum(&wide, "x", &dir.path().join("w.bin")).unwrap();
    let err = cmd_compare(&[paths[0].clone(), dir.path().join("w.bin")], &out, 1, 8).unwrap_err();
    assert_eq!(err.kind, ErrorKind::Validation);
    let err = cmd_compare(&[dir.path().join("none.bin")], &out, 1, 8).unwrap_err();
    assert_eq!(err.kind, ErrorKind::Io);
    assert!(load_spectrum(&paths[2]).is_ok());
}

#[test]
fn shipped_manifests_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../manifests");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().and_then(|e| e.to_str()) == Some("toml") {
            let m = RunManifest::load(&p).unwrap();
            m.validate().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}

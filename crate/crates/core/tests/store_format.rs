mod common;

use common::*;
use gks_esn::esn::{build_reservoir, EsnConfig, ReadoutModel};
use gks_esn::gks::{simulate_member, DomainConfig};
use gks_esn::numerics::DenseMatrix;
use gks_esn::stats::{power_spectrum, Source, Spectrum};
use gks_esn::store::{
    decode_artifact, encode_artifact, export_spectrum_csv, load_artifact, load_readout, load_reservoir, load_spectrum,
    load_trajectory, save_readout, save_reservoir, save_spectrum, save_trajectory, spectrum_csv, Artifact,
    ArtifactKind, StoreError, CSV_HEADER,
};
use tempfile::tempdir;

fn sample_trajectory() -> gks_esn::gks::Trajectory<f64> {
    let cfg = DomainConfig {
        seed: 17,
        grid_points: 64,
        length: 29.0,
        gamma: 0.1,
        ..Default::default()
    };
    simulate_member(&cfg, 3, 1.0, 5.0).unwrap()
}

fn sample_reservoir() -> gks_esn::esn::Reservoir<f64> {
    let cfg = EsnConfig {
        reservoir_size: 60,
        density: 0.1,
        seed: 4,
        ..Default::default()
    };
    let mut res = build_reservoir(&cfg, 8).unwrap();
    res.advance(&[0.5, -1.0, 2.0, 0.0, 1.0, 1.0, -3.0, 0.25]).unwrap();
    res
}

fn sample_readout() -> ReadoutModel<f64> {
    let mut g = rng(1);
    ReadoutModel {
        weights: random_matrix(&mut g, 8, 60),
        mu: 5e-6,
        provenance: "trained: L=22 gamma=0 trajectories=20 samples=79980 mu=0.000005; transfer: L=43 gamma=0 \
                     trajectories=2 samples=7998 alpha=0.005\nsecond line, unicode λ γ"
            .into(),
    }
}

fn sample_spectrum() -> Spectrum {
    let mut g = rng(2);
    power_spectrum(&random_matrix(&mut g, 12, 256))
        .unwrap()
        .with_regime(43.0, 0.1, Source::EsnTl)
        .with_note("manifest=abc123")
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn every_kind_round_trips_bitwise() {
    let dir = tempdir().unwrap();

    let t = sample_trajectory();
    let p = dir.path().join("t.bin");
    save_trajectory(&t, "run-a", &p).unwrap();
    let (back, meta) = load_trajectory(&p).unwrap();
    assert_eq!(bits(back.frames.as_slice()), bits(t.frames.as_slice()));
    assert_eq!(back, t);
    assert_eq!(meta["run"], "run-a");
    assert_eq!(meta["domain.seed"], "17");

    let r = sample_reservoir();
    let p = dir.path().join("r.bin");
    save_reservoir(&r, "run-b", &p).unwrap();
    let (back, _) = load_reservoir(&p).unwrap();
    assert_eq!(back, r);
    assert_eq!(bits(back.state()), bits(r.state()));

    let m = sample_readout();
    let p = dir.path().join("m.bin");
    save_readout(&m, "run-c", &p).unwrap();
    let (back, _) = load_readout(&p).unwrap();
    assert_eq!(back.provenance, m.provenance);
    assert_eq!(back, m);

    let s = sample_spectrum();
    let p = dir.path().join("s.bin");
    save_spectrum(&s, "run-d", &p).unwrap();
    let (back, _) = load_spectrum(&p).unwrap();
    assert_eq!(bits(&back.energies), bits(&s.energies));
    assert_eq!(back, s);

    let unlabeled = Spectrum::new(vec![1.0, 0.5, 0.0], 4, 2).unwrap();
    let bytes = encode_artifact(&Artifact::Spectrum(unlabeled.clone()), "");
    match decode_artifact(ArtifactKind::Spectrum, &bytes).unwrap().0 {
        Artifact::Spectrum(x) => {
            assert!(x.length.is_nan() && x.gamma.is_nan());
            assert_eq!(x.energies, unlabeled.energies);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn encoding_is_stable() {
    let t = Artifact::Trajectory(sample_trajectory());
    assert_eq!(encode_artifact(&t, "x"), encode_artifact(&t, "x"));
    let bytes = encode_artifact(&t, "x");
    let (decoded, _) = decode_artifact(ArtifactKind::Trajectory, &bytes).unwrap();
    assert_eq!(encode_artifact(&decoded, "x"), bytes);
}

/// Minimal independent reader of the container layout.
struct Cursor<'a>(&'a [u8], usize);

impl Cursor<'_> {
    fn bytes(&mut self, n: usize) -> &[u8] {
        let s = &self.0[self.1..self.1 + n];
        self.1 += n;
        s
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.bytes(4).try_into().unwrap())
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.bytes(8).try_into().unwrap())
    }
    fn string(&mut self) -> String {
        let n = self.u32() as usize;
        String::from_utf8(self.bytes(n).to_vec()).unwrap()
    }
}

#[test]
fn container_layout_is_little_endian_and_self_describing() {
    let s = Spectrum::new(vec![2.0, 0.25, 0.0], 4, 7)
        .unwrap()
        .with_regime(22.0, 0.0, Source::Dns);
    let bytes = encode_artifact(&Artifact::Spectrum(s), "p");
    let mut c = Cursor(&bytes, 0);
    assert_eq!(c.bytes(8), b"GKSSPEC\0");
    assert_eq!(c.u32(), 1);
    let n_meta = c.u32();
    let mut meta = std::collections::BTreeMap::new();
    for _ in 0..n_meta {
        let k = c.string();
        meta.insert(k, c.string());
    }
    assert_eq!(meta["run"], "p");
    assert_eq!(meta["spectrum.source"], "DNS");
    assert_eq!(meta["spectrum.n_samples"], "7");
    assert_eq!(c.u32(), 1);
    assert_eq!(c.string(), "energies");
    assert_eq!(c.bytes(1), &[1]);
    assert_eq!(c.u32(), 1);
    assert_eq!(c.u64(), 3);
    assert_eq!(c.u64(), 24);
    let payload: Vec<f64> = (0..3).map(|_| f64::from_bits(c.u64())).collect();
    assert_eq!(payload, vec![2.0, 0.25, 0.0]);
    assert_eq!(c.1, bytes.len());

    for (kind, magic) in [
        (ArtifactKind::Trajectory, b"GKSTRAJ\0"),
        (ArtifactKind::Reservoir, b"GKSRESV\0"),
        (ArtifactKind::Readout, b"GKSRDOUT"),
        (ArtifactKind::Spectrum, b"GKSSPEC\0"),
    ] {
        assert_eq!(kind.magic(), magic);
    }
}

#[test]
fn damaged_files_are_rejected() {
    let bytes = encode_artifact(&Artifact::Readout(sample_readout()), "p");

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(
        decode_artifact(ArtifactKind::Readout, &bad_magic),
        Err(StoreError::Format(_))
    ));

    let mut bad_version = bytes.clone();
    bad_version[8..12].copy_from_slice(&2u32.to_le_bytes());
    assert!(matches!(
        decode_artifact(ArtifactKind::Readout, &bad_version),
        Err(StoreError::Version { found: 2, supported: 1 })
    ));

    for cut in [0, 5, 12, 40, bytes.len() - 1] {
        assert!(matches!(
            decode_artifact(ArtifactKind::Readout, &bytes[..cut]),
            Err(StoreError::Truncated { .. })
        ));
    }

    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode_artifact(ArtifactKind::Readout, &extra).is_err());

    assert!(matches!(
        decode_artifact(ArtifactKind::Spectrum, &bytes),
        Err(StoreError::WrongKind { .. })
    ));

    let dir = tempdir().unwrap();
    assert!(matches!(
        load_artifact(ArtifactKind::Readout, &dir.path().join("missing.bin")),
        Err(StoreError::Io { .. })
    ));
}

#[test]
fn loading_revalidates_invariants() {
    let r = sample_reservoir();
    let bytes = encode_artifact(&Artifact::Reservoir(r), "p");
    // The state block is the last payload; push one entry outside the tanh range.
    let mut hot = bytes.clone();
    let n = hot.len();
    hot[n - 8..].copy_from_slice(&5.0f64.to_le_bytes());
    assert!(matches!(
        decode_artifact(ArtifactKind::Reservoir, &hot),
        Err(StoreError::Invariant(_))
    ));

    let mut m = sample_readout();
    m.weights.set(0, 0, f64::NAN);
    let bytes = encode_artifact(&Artifact::Readout(m), "p");
    assert!(matches!(
        decode_artifact(ArtifactKind::Readout, &bytes),
        Err(StoreError::Invariant(_))
    ));

    let s = Spectrum::new(vec![1.0, 1.0, 1.0], 4, 1).unwrap();
    let mut bytes = encode_artifact(&Artifact::Spectrum(s), "p");
    let n = bytes.len();
    bytes[n - 8..].copy_from_slice(&(-1.0f64).to_le_bytes());
    assert!(matches!(
        decode_artifact(ArtifactKind::Spectrum, &bytes),
        Err(StoreError::Invariant(_))
    ));
}

#[test]
fn csv_contract() {
    let n = 256;
    let frames = DenseMatrix::from_fn(3, n, |_, j| (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos());
    let mut s = power_spectrum(&frames).unwrap();
    s.energies[1] = 0.25;
    for e in s.energies.iter_mut().skip(2) {
        *e = 0.0;
    }
    let s = s.with_regime(22.0, 0.0, Source::Dns).with_note("manifest=00ff");
    let text = spectrum_csv(&s);
    let lines: Vec<&str> = text.lines().collect();
    let header = lines.iter().position(|l| *l == CSV_HEADER).unwrap();
    assert!(lines[..header].iter().all(|l| l.starts_with('#')));
    assert!(lines.contains(&"# manifest=00ff"));
    let rows = &lines[header + 1..];
    assert_eq!(rows.len(), 129);
    assert_eq!(rows[1], "1,0.25,0,-0.60206");
    assert!(rows[0].starts_with("0,") && rows[0].split(',').nth(2) == Some(""));
    assert_eq!(rows[2], "2,0,0.30103,");
    assert!(!text.to_lowercase().contains("inf") && !text.contains("NaN"));
    for (k, row) in rows.iter().enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 4);
        assert_eq!(fields[0].parse::<usize>().unwrap(), k);
        assert_eq!(fields[1].parse::<f64>().unwrap().to_bits(), s.energies[k].to_bits());
    }

    let dir = tempdir().unwrap();
    let p = dir.path().join("s.csv");
    export_spectrum_csv(&s, &p).unwrap();
    assert_eq!(std::fs::read_to_string(&p).unwrap(), text);
}

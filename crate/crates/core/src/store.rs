//! Binary artifacts and CSV export.
//!
//! Every artifact uses the same little-endian container:
//!
//! ```text
//! magic        8 bytes, one tag per kind
//! version      u32
//! n_meta       u32, then n_meta × (key: str, value: str)
//! n_blocks     u32, then n_blocks × (name: str, dtype: u8, ndim: u32, dims: u64 × ndim, bytes: u64)
//! payload      the blocks' data in order, row-major
//! ```
//!
//! Strings are a `u32` byte count followed by UTF-8. `dtype` 1 is `f64`, 2 is `u64`.
//! Floats in the metadata are written in Rust's shortest round-trip form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::esn::{EsnConfig, EsnError, ReadoutModel, Reservoir};
use crate::gks::{DomainConfig, GksError, InitialCondition, Trajectory};
use crate::numerics::{DenseMatrix, NumericsError, SparseMatrix};
use crate::stats::{Source, Spectrum, StatsError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed artifact: {0}")]
    Format(String),
    #[error("unsupported artifact version {found} (this build reads {supported})")]
    Version { found: u32, supported: u32 },
    #[error("expected a {expected} artifact, found {found}")]
    WrongKind { expected: ArtifactKind, found: String },
    #[error("artifact truncated: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("artifact violates an invariant: {0}")]
    Invariant(String),
}

impl StoreError {
    fn io(path: &Path, source: io::Error) -> Self {
        StoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

macro_rules! invariant_from {
    ($($t:ty),*) => {$(
        impl From<$t> for StoreError {
            fn from(e: $t) -> Self {
                StoreError::Invariant(e.to_string())
            }
        }
    )*};
}
invariant_from!(NumericsError, GksError, EsnError, StatsError);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArtifactKind {
    Trajectory,
    Reservoir,
    Readout,
    Spectrum,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 4] = [
        ArtifactKind::Trajectory,
        ArtifactKind::Reservoir,
        ArtifactKind::Readout,
        ArtifactKind::Spectrum,
    ];

    pub fn magic(self) -> &'static [u8; 8] {
        match self {
            ArtifactKind::Trajectory => b"GKSTRAJ\0",
            ArtifactKind::Reservoir => b"GKSRESV\0",
            ArtifactKind::Readout => b"GKSRDOUT",
            ArtifactKind::Spectrum => b"GKSSPEC\0",
        }
    }

    pub fn from_magic(magic: &[u8]) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.magic() == magic)
    }
}

impl std::fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ArtifactKind::Trajectory => "trajectory",
            ArtifactKind::Reservoir => "reservoir",
            ArtifactKind::Readout => "readout",
            ArtifactKind::Spectrum => "spectrum",
        })
    }
}

/// Any object the store can persist.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Trajectory(Trajectory<f64>),
    Reservoir(Reservoir<f64>),
    Readout(ReadoutModel<f64>),
    Spectrum(Spectrum),
}

impl Artifact {
    pub fn kind(&self) -> ArtifactKind {
        match self {
            Artifact::Trajectory(_) => ArtifactKind::Trajectory,
            Artifact::Reservoir(_) => ArtifactKind::Reservoir,
            Artifact::Readout(_) => ArtifactKind::Readout,
            Artifact::Spectrum(_) => ArtifactKind::Spectrum,
        }
    }
}

/// Key-value section of an artifact.
pub type Metadata = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq)]
enum Data {
    F64(Vec<f64>),
    U64(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    name: String,
    dims: Vec<u64>,
    data: Data,
}

impl Block {
    fn f64(name: &str, dims: &[usize], data: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            dims: dims.iter().map(|&d| d as u64).collect(),
            data: Data::F64(data),
        }
    }

    fn u64(name: &str, data: Vec<u64>) -> Self {
        Self {
            name: name.into(),
            dims: vec![data.len() as u64],
            data: Data::U64(data),
        }
    }
}

fn encode(kind: ArtifactKind, meta: &Metadata, blocks: &[Block]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(kind.magic());
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let put_str = |out: &mut Vec<u8>, s: &str| {
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        out.extend_from_slice(s.as_bytes());
    };
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    for (k, v) in meta {
        put_str(&mut out, k);
        put_str(&mut out, v);
    }
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for b in blocks {
        put_str(&mut out, &b.name);
        let (dtype, bytes) = match &b.data {
            Data::F64(v) => (1u8, v.len() * 8),
            Data::U64(v) => (2u8, v.len() * 8),
        };
        out.push(dtype);
        out.extend_from_slice(&(b.dims.len() as u32).to_le_bytes());
        for d in &b.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&(bytes as u64).to_le_bytes());
    }
    for b in blocks {
        match &b.data {
            Data::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Data::U64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(StoreError::Truncated {
                offset: self.pos,
                needed: n - (self.bytes.len() - self.pos).min(n),
            }),
        }
    }

    fn u8(&mut self) -> Result<u8, StoreError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn str(&mut self) -> Result<String, StoreError> {
        let n = self.u32()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| StoreError::Format("string is not UTF-8".into()))
    }
}

fn decode(bytes: &[u8]) -> Result<(ArtifactKind, Metadata, Vec<Block>), StoreError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(8)?;
    let kind = ArtifactKind::from_magic(magic)
        .ok_or_else(|| StoreError::Format(format!("unknown magic {:?}", String::from_utf8_lossy(magic))))?;
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(StoreError::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let mut meta = Metadata::new();
    for _ in 0..r.u32()? {
        let k = r.str()?;
        let v = r.str()?;
        if meta.insert(k.clone(), v).is_some() {
            return Err(StoreError::Format(format!("duplicate metadata key {k:?}")));
        }
    }
    let n_blocks = r.u32()? as usize;
    let mut headers = Vec::with_capacity(n_blocks.min(64));
    for _ in 0..n_blocks {
        let name = r.str()?;
        let dtype = r.u8()?;
        let ndim = r.u32()? as usize;
        let mut dims = Vec::with_capacity(ndim.min(8));
        for _ in 0..ndim {
            dims.push(r.u64()?);
        }
        let bytes = r.u64()?;
        let count = dims
            .iter()
            .try_fold(1u64, |a, &d| a.checked_mul(d))
            .ok_or_else(|| StoreError::Format(format!("block {name:?} dimensions overflow")))?;
        if count.checked_mul(8) != Some(bytes) {
            return Err(StoreError::Format(format!(
                "block {name:?} declares {bytes} bytes for {count} elements"
            )));
        }
        if dtype != 1 && dtype != 2 {
            return Err(StoreError::Format(format!(
                "block {name:?} has unknown element type {dtype}"
            )));
        }
        headers.push((name, dtype, dims, bytes as usize));
    }
    let mut blocks = Vec::with_capacity(headers.len());
    for (name, dtype, dims, bytes) in headers {
        let raw = r.take(bytes)?;
        let chunks = raw.chunks_exact(8).map(|c| c.try_into().unwrap());
        let data = if dtype == 1 {
            Data::F64(chunks.map(f64::from_le_bytes).collect())
        } else {
            Data::U64(chunks.map(u64::from_le_bytes).collect())
        };
        blocks.push(Block { name, dims, data });
    }
    if r.pos != bytes.len() {
        return Err(StoreError::Format(format!(
            "{} trailing bytes after payload",
            bytes.len() - r.pos
        )));
    }
    Ok((kind, meta, blocks))
}

struct Fields<'a> {
    meta: &'a Metadata,
    blocks: Vec<Block>,
}

impl Fields<'_> {
    fn text(&self, key: &str) -> Result<&str, StoreError> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| StoreError::Format(format!("missing metadata key {key:?}")))
    }

    fn parse<V: std::str::FromStr>(&self, key: &str) -> Result<V, StoreError> {
        let raw = self.text(key)?;
        raw.parse()
            .map_err(|_| StoreError::Format(format!("metadata {key:?} has unparsable value {raw:?}")))
    }

    fn take(&mut self, name: &str) -> Result<Block, StoreError> {
        let i = self
            .blocks
            .iter()
            .position(|b| b.name == name)
            .ok_or_else(|| StoreError::Format(format!("missing block {name:?}")))?;
        Ok(self.blocks.remove(i))
    }

    fn matrix(&mut self, name: &str) -> Result<DenseMatrix<f64>, StoreError> {
        let b = self.take(name)?;
        match (b.dims.as_slice(), b.data) {
            (&[r, c], Data::F64(v)) => Ok(DenseMatrix::new(r as usize, c as usize, v)?),
            _ => Err(StoreError::Format(format!("block {name:?} is not an f64 matrix"))),
        }
    }

    fn vector(&mut self, name: &str) -> Result<Vec<f64>, StoreError> {
        match self.take(name)? {
            Block {
                dims,
                data: Data::F64(v),
                ..
            } if dims.len() == 1 => Ok(v),
            _ => Err(StoreError::Format(format!("block {name:?} is not an f64 vector"))),
        }
    }

    fn indices(&mut self, name: &str) -> Result<Vec<u64>, StoreError> {
        match self.take(name)? {
            Block {
                dims,
                data: Data::U64(v),
                ..
            } if dims.len() == 1 => Ok(v),
            _ => Err(StoreError::Format(format!("block {name:?} is not a u64 vector"))),
        }
    }
}

fn put(meta: &mut Metadata, key: &str, value: impl ToString) {
    meta.insert(key.to_string(), value.to_string());
}

fn domain_meta(meta: &mut Metadata, c: &DomainConfig) {
    put(meta, "domain.length", c.length);
    put(meta, "domain.gamma", c.gamma);
    put(meta, "domain.grid_points", c.grid_points);
    put(meta, "domain.dt", c.dt);
    put(meta, "domain.dt_sample", c.dt_sample);
    put(meta, "domain.seed", c.seed);
}

fn domain_from(f: &Fields) -> Result<DomainConfig, StoreError> {
    Ok(DomainConfig {
        length: f.parse("domain.length")?,
        gamma: f.parse("domain.gamma")?,
        grid_points: f.parse("domain.grid_points")?,
        dt: f.parse("domain.dt")?,
        dt_sample: f.parse("domain.dt_sample")?,
        seed: f.parse("domain.seed")?,
    })
}

fn esn_meta(meta: &mut Metadata, c: &EsnConfig) {
    put(meta, "esn.reservoir_size", c.reservoir_size);
    put(meta, "esn.input_scale", c.input_scale);
    put(meta, "esn.spectral_radius", c.spectral_radius);
    put(meta, "esn.density", c.density);
    put(meta, "esn.ridge", c.ridge);
    put(meta, "esn.seed", c.seed);
    put(meta, "esn.washout", c.washout);
    put(meta, "esn.quadratic_features", c.quadratic_features);
}

fn esn_from(f: &Fields) -> Result<EsnConfig, StoreError> {
    Ok(EsnConfig {
        reservoir_size: f.parse("esn.reservoir_size")?,
        input_scale: f.parse("esn.input_scale")?,
        spectral_radius: f.parse("esn.spectral_radius")?,
        density: f.parse("esn.density")?,
        ridge: f.parse("esn.ridge")?,
        seed: f.parse("esn.seed")?,
        washout: f.parse("esn.washout")?,
        quadratic_features: f.parse("esn.quadratic_features")?,
    })
}

/// Serializes an artifact. `provenance` is stored under the `run` key.
pub fn encode_artifact(artifact: &Artifact, provenance: &str) -> Vec<u8> {
    let mut meta = Metadata::new();
    put(&mut meta, "run", provenance);
    let blocks = match artifact {
        Artifact::Trajectory(t) => {
            domain_meta(&mut meta, &t.config);
            put(&mut meta, "trajectory.t0", t.t0);
            if let Some(ic) = &t.initial_condition {
                put(&mut meta, "ic.c1", ic.c1);
                put(&mut meta, "ic.c2", ic.c2);
                put(&mut meta, "ic.p1", ic.p1);
                put(&mut meta, "ic.p2", ic.p2);
            }
            vec![Block::f64(
                "frames",
                &[t.frames.rows(), t.frames.cols()],
                t.frames.as_slice().to_vec(),
            )]
        }
        Artifact::Reservoir(r) => {
            esn_meta(&mut meta, r.config());
            put(&mut meta, "reservoir.input_dim", r.input_dim());
            let a = r.adjacency();
            let (mut rows, mut cols, mut vals) = (Vec::new(), Vec::new(), Vec::new());
            for (i, j, v) in a.triplets() {
                rows.push(i as u64);
                cols.push(j as u64);
                vals.push(v);
            }
            let w = r.input_weights();
            vec![
                Block::u64("adjacency.rows", rows),
                Block::u64("adjacency.cols", cols),
                Block::f64("adjacency.values", &[vals.len()], vals),
                Block::f64("input_weights", &[w.rows(), w.cols()], w.as_slice().to_vec()),
                Block::f64("state", &[r.state().len()], r.state().to_vec()),
            ]
        }
        Artifact::Readout(m) => {
            put(&mut meta, "readout.mu", m.mu);
            put(&mut meta, "readout.provenance", &m.provenance);
            let w = &m.weights;
            vec![Block::f64("weights", &[w.rows(), w.cols()], w.as_slice().to_vec())]
        }
        Artifact::Spectrum(s) => {
            put(&mut meta, "spectrum.grid_points", s.grid_points);
            put(&mut meta, "spectrum.n_samples", s.n_samples);
            put(&mut meta, "spectrum.length", s.length);
            put(&mut meta, "spectrum.gamma", s.gamma);
            put(&mut meta, "spectrum.source", s.source);
            put(&mut meta, "spectrum.note", &s.note);
            vec![Block::f64("energies", &[s.energies.len()], s.energies.clone())]
        }
    };
    encode(artifact.kind(), &meta, &blocks)
}

/// Parses and validates an artifact of the given kind. Returns it with its metadata.
pub fn decode_artifact(kind: ArtifactKind, bytes: &[u8]) -> Result<(Artifact, Metadata), StoreError> {
    let (found, meta, blocks) = decode(bytes)?;
    if found != kind {
        return Err(StoreError::WrongKind {
            expected: kind,
            found: found.to_string(),
        });
    }
    let mut f = Fields { meta: &meta, blocks };
    let artifact = match kind {
        ArtifactKind::Trajectory => {
            let config = domain_from(&f)?;
            let t0: f64 = f.parse("trajectory.t0")?;
            let ic = if meta.contains_key("ic.c1") {
                Some(InitialCondition {
                    c1: f.parse("ic.c1")?,
                    c2: f.parse("ic.c2")?,
                    p1: f.parse("ic.p1")?,
                    p2: f.parse("ic.p2")?,
                })
            } else {
                None
            };
            let frames = f.matrix("frames")?;
            Artifact::Trajectory(Trajectory::new(config, frames, t0, ic)?)
        }
        ArtifactKind::Reservoir => {
            let config = esn_from(&f)?;
            let n_in: usize = f.parse("reservoir.input_dim")?;
            let rows = f.indices("adjacency.rows")?;
            let cols = f.indices("adjacency.cols")?;
            let vals = f.vector("adjacency.values")?;
            if rows.len() != vals.len() || cols.len() != vals.len() {
                return Err(StoreError::Format("adjacency triplet blocks differ in length".into()));
            }
            let d = config.reservoir_size;
            let triplets = rows
                .into_iter()
                .zip(cols)
                .zip(vals)
                .map(|((i, j), v)| (i as usize, j as usize, v))
                .collect();
            let adjacency = SparseMatrix::from_triplets(d, d, triplets)?;
            let input_weights = f.matrix("input_weights")?;
            if input_weights.cols() != n_in {
                return Err(StoreError::Invariant(format!(
                    "input weights have {} columns, metadata says {n_in}",
                    input_weights.cols()
                )));
            }
            let state = f.vector("state")?;
            Artifact::Reservoir(Reservoir::from_parts(config, adjacency, input_weights, state)?)
        }
        ArtifactKind::Readout => {
            let mu: f64 = f.parse("readout.mu")?;
            let provenance = f.text("readout.provenance")?.to_string();
            let weights = f.matrix("weights")?;
            if !(mu >= 0.0) {
                return Err(StoreError::Invariant(format!("negative ridge penalty {mu}")));
            }
            if !weights.is_finite() {
                return Err(StoreError::Invariant("readout weights are not finite".into()));
            }
            Artifact::Readout(ReadoutModel {
                weights,
                mu,
                provenance,
            })
        }
        ArtifactKind::Spectrum => {
            let grid_points: usize = f.parse("spectrum.grid_points")?;
            let n_samples: u64 = f.parse("spectrum.n_samples")?;
            let length: f64 = f.parse("spectrum.length")?;
            let gamma: f64 = f.parse("spectrum.gamma")?;
            let source: Source = f.parse("spectrum.source")?;
            let note = f.text("spectrum.note")?.to_string();
            let energies = f.vector("energies")?;
            Artifact::Spectrum(
                Spectrum::new(energies, grid_points, n_samples)?
                    .with_regime(length, gamma, source)
                    .with_note(note),
            )
        }
    };
    if let Some(extra) = f.blocks.first() {
        return Err(StoreError::Format(format!("unexpected block {:?}", extra.name)));
    }
    Ok((artifact, meta))
}

pub fn save_artifact(artifact: &Artifact, provenance: &str, path: &Path) -> Result<(), StoreError> {
    fs::write(path, encode_artifact(artifact, provenance)).map_err(|e| StoreError::io(path, e))
}

pub fn load_artifact(kind: ArtifactKind, path: &Path) -> Result<(Artifact, Metadata), StoreError> {
    let bytes = fs::read(path).map_err(|e| StoreError::io(path, e))?;
    decode_artifact(kind, &bytes)
}

macro_rules! typed_io {
    ($save:ident, $load:ident, $variant:ident, $ty:ty) => {
        pub fn $save(object: &$ty, provenance: &str, path: &Path) -> Result<(), StoreError> {
            save_artifact(&Artifact::$variant(object.clone()), provenance, path)
        }

        pub fn $load(path: &Path) -> Result<($ty, Metadata), StoreError> {
            match load_artifact(ArtifactKind::$variant, path)? {
                (Artifact::$variant(x), meta) => Ok((x, meta)),
                _ => unreachable!("decode_artifact returns the requested kind"),
            }
        }
    };
}

typed_io!(save_trajectory, load_trajectory, Trajectory, Trajectory<f64>);
typed_io!(save_reservoir, load_reservoir, Reservoir, Reservoir<f64>);
typed_io!(save_readout, load_readout, Readout, ReadoutModel<f64>);
typed_io!(save_spectrum, load_spectrum, Spectrum, Spectrum);

/// Plain decimal for moderate magnitudes, scientific otherwise; both parse back exactly.
pub fn format_value(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Six significant digits, trailing zeros dropped.
pub fn format_log(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = 5 - magnitude;
    if decimals < 0 || magnitude < -4 {
        return format!("{v:.5e}");
    }
    let s = format!("{v:.*}", decimals as usize);
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

pub const CSV_HEADER: &str = "k,e_k,log10_k,log10_e_k";

/// CSV text of a spectrum: `#` provenance lines, the header, then one row per wavenumber.
pub fn spectrum_csv(s: &Spectrum) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# source={}", s.source);
    let _ = writeln!(out, "# L={}", s.length);
    let _ = writeln!(out, "# gamma={}", s.gamma);
    let _ = writeln!(out, "# grid_points={}", s.grid_points);
    let _ = writeln!(out, "# n_samples={}", s.n_samples);
    for line in s.note.lines().filter(|l| !l.is_empty()) {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (k, &e) in s.energies.iter().enumerate() {
        let lk = if k == 0 {
            String::new()
        } else {
            format_log((k as f64).log10())
        };
        let le = if e > 0.0 { format_log(e.log10()) } else { String::new() };
        let _ = writeln!(out, "{k},{},{lk},{le}", format_value(e));
    }
    out
}

pub fn export_spectrum_csv(s: &Spectrum, path: &Path) -> Result<(), StoreError> {
    fs::write(path, spectrum_csv(s)).map_err(|e| StoreError::io(path, e))
}

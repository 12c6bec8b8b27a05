//! Echo state network: fixed random reservoir, ridge-regression readout and the
//! closed-form output-layer correction used to move a trained network to a new
//! parameter regime.
//!
//! Shapes follow the update equations: `A` is `D × D`, `W_in` is `D × N_x` and
//! `W_out` is `N_x × D`. The readout acts on transformed states `φ(r)`, so the
//! regression design matrix holds `φ(r)` as well.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::gks::Trajectory;
use crate::numerics::{dot, ridge_solve_gram, spectral_radius, DenseMatrix, NumericsError, Real, SparseMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EsnError {
    #[error("invalid ESN configuration: {0}")]
    InvalidConfig(String),
    #[error("reservoir draw is degenerate (spectral radius {radius:e}); choose another seed")]
    DegenerateReservoir { radius: f64 },
    #[error("{context}: expected length {expected}, got {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("trajectory with {len} snapshots is too short for washout {washout}")]
    TooShort { len: usize, washout: usize },
    #[error("closed-loop prediction diverged at step {step}")]
    Divergence { step: usize },
    #[error("no training data: {0}")]
    NoData(&'static str),
    #[error("reservoir invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Tolerance of the spectral-radius estimate used when scaling `W₀`.
pub const RADIUS_TOLERANCE: f64 = 1e-10;
/// Restart cycles allowed for the spectral-radius estimate.
pub const RADIUS_MAX_ITERS: usize = 5000;
/// Accepted deviation of `ρ(A)` from the target when validating a reservoir.
pub const RADIUS_CHECK_TOLERANCE: f64 = 1e-6;

/// Reservoir and readout hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsnConfig {
    /// Reservoir size `D`.
    pub reservoir_size: usize,
    /// Input scale `β₁`: `W_in` entries are uniform on `[-β₁, β₁]`.
    pub input_scale: f64,
    /// Spectral radius `β₂` of the adjacency matrix.
    pub spectral_radius: f64,
    /// Fraction of nonzero entries of `W₀`.
    pub density: f64,
    /// Ridge penalty `μ`.
    pub ridge: f64,
    pub seed: u64,
    /// Leading reservoir steps per trajectory left out of the regression.
    pub washout: usize,
    /// Square every second state component before the readout.
    pub quadratic_features: bool,
}

impl Default for EsnConfig {
    fn default() -> Self {
        Self {
            reservoir_size: 5000,
            input_scale: 0.01,
            spectral_radius: 0.1,
            density: 0.02,
            ridge: 5e-6,
            seed: 0,
            washout: 100,
            quadratic_features: true,
        }
    }
}

impl EsnConfig {
    pub fn validate(&self) -> Result<(), EsnError> {
        let bad = |m: String| Err(EsnError::InvalidConfig(m));
        if self.reservoir_size == 0 {
            return bad("reservoir size must be at least 1".into());
        }
        if !(self.input_scale > 0.0 && self.input_scale.is_finite()) {
            return bad(format!("input scale must be positive, got {}", self.input_scale));
        }
        if !(self.spectral_radius > 0.0 && self.spectral_radius.is_finite()) {
            return bad(format!(
                "spectral radius must be positive, got {}",
                self.spectral_radius
            ));
        }
        if !(self.density > 0.0 && self.density < 1.0) {
            return bad(format!("density must lie in (0, 1), got {}", self.density));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return bad(format!("ridge penalty must be non-negative, got {}", self.ridge));
        }
        Ok(())
    }
}

/// `φ(r)`: with 1-based indexing, even components are squared and odd ones pass through.
pub fn phi<T: Real>(r: &[T]) -> Vec<T> {
    let mut out = r.to_vec();
    square_even_components(&mut out);
    out
}

fn square_even_components<T: Real>(v: &mut [T]) {
    for x in v.iter_mut().skip(1).step_by(2) {
        *x = *x * *x;
    }
}

/// Fixed random structures of the network plus its evolving state.
#[derive(Debug, Clone, PartialEq)]
pub struct Reservoir<T> {
    config: EsnConfig,
    n_in: usize,
    adjacency: SparseMatrix<T>,
    input_weights: DenseMatrix<T>,
    state: Vec<T>,
}

/// Draws `W_in`, `W₀` and rescales `W₀` to the configured spectral radius.
pub fn build_reservoir<T: Real>(config: &EsnConfig, n_in: usize) -> Result<Reservoir<T>, EsnError> {
    config.validate()?;
    if n_in == 0 {
        return Err(EsnError::InvalidConfig("input dimension must be at least 1".into()));
    }
    let d = config.reservoir_size;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let b1 = config.input_scale;
    let w_in: Vec<T> = (0..d * n_in).map(|_| T::lit(rng.gen_range(-b1..=b1))).collect();
    let input_weights = DenseMatrix::new(d, n_in, w_in)?;

    let nnz = (config.density * (d * d) as f64).round() as usize;
    let positions = index::sample(&mut rng, d * d, nnz).into_vec();
    let entries: Vec<(usize, usize, T)> = positions
        .into_iter()
        .map(|p| (p / d, p % d, T::lit(rng.gen_range(-1.0..=1.0))))
        .collect();
    let mut adjacency = SparseMatrix::from_triplets(d, d, entries)?;

    let radius = if adjacency.nnz() == 0 {
        0.0
    } else {
        spectral_radius(&adjacency, RADIUS_TOLERANCE, RADIUS_MAX_ITERS)?
    };
    if !(radius > 1e-12) {
        return Err(EsnError::DegenerateReservoir { radius });
    }
    adjacency.scale(T::lit(config.spectral_radius / radius));

    Ok(Reservoir {
        config: *config,
        n_in,
        adjacency,
        input_weights,
        state: vec![T::zero(); d],
    })
}

impl<T: Real> Reservoir<T> {
    /// Reassembles a reservoir and checks its invariants.
    pub fn from_parts(
        config: EsnConfig,
        adjacency: SparseMatrix<T>,
        input_weights: DenseMatrix<T>,
        state: Vec<T>,
    ) -> Result<Self, EsnError> {
        config.validate()?;
        let d = config.reservoir_size;
        if adjacency.rows() != d || adjacency.cols() != d {
            return Err(EsnError::Invariant(format!(
                "adjacency is {}x{}, reservoir size {d}",
                adjacency.rows(),
                adjacency.cols()
            )));
        }
        if input_weights.rows() != d || state.len() != d {
            return Err(EsnError::Invariant(
                "input weights or state do not match reservoir size".into(),
            ));
        }
        let limit = T::lit(config.input_scale);
        if input_weights.as_slice().iter().any(|w| w.abs() > limit) {
            return Err(EsnError::Invariant("input weight exceeds the input scale".into()));
        }
        if state.iter().any(|r| !(r.abs() <= T::one())) {
            return Err(EsnError::Invariant("state outside [-1, 1]".into()));
        }
        let radius = spectral_radius(&adjacency, RADIUS_TOLERANCE, RADIUS_MAX_ITERS)?;
        if (radius - config.spectral_radius).abs() > RADIUS_CHECK_TOLERANCE {
            return Err(EsnError::Invariant(format!(
                "adjacency spectral radius {radius} differs from target {}",
                config.spectral_radius
            )));
        }
        Ok(Self {
            config,
            n_in: input_weights.cols(),
            adjacency,
            input_weights,
            state,
        })
    }

    pub fn config(&self) -> &EsnConfig {
        &self.config
    }

    pub fn size(&self) -> usize {
        self.config.reservoir_size
    }

    pub fn input_dim(&self) -> usize {
        self.n_in
    }

    pub fn adjacency(&self) -> &SparseMatrix<T> {
        &self.adjacency
    }

    pub fn input_weights(&self) -> &DenseMatrix<T> {
        &self.input_weights
    }

    pub fn state(&self) -> &[T] {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|r| *r = T::zero());
    }

    /// `r ← tanh(A r + W_in x)`; returns the new state.
    pub fn advance(&mut self, x: &[T]) -> Result<&[T], EsnError> {
        self.check_input(x)?;
        let mut drive = vec![T::zero(); self.size()];
        self.input_weights.matvec_into(x, &mut drive)?;
        let mut state = std::mem::take(&mut self.state);
        self.update(&mut state, &drive);
        self.state = state;
        Ok(&self.state)
    }

    fn check_input(&self, x: &[T]) -> Result<(), EsnError> {
        if x.len() != self.n_in {
            return Err(EsnError::Dimension {
                context: "reservoir input",
                expected: self.n_in,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `state ← tanh(A state + drive)` where `drive = W_in x` is precomputed.
    fn update(&self, state: &mut Vec<T>, drive: &[T]) {
        let mut next = vec![T::zero(); state.len()];
        self.adjacency.matvec_into(state, &mut next);
        for (n, &u) in next.iter_mut().zip(drive) {
            *n = (*n + u).tanh();
        }
        *state = next;
    }

    /// Readout features of a state: `φ(r)` or `r` when the transform is disabled.
    pub fn features(&self, r: &[T]) -> Vec<T> {
        let mut f = r.to_vec();
        if self.config.quadratic_features {
            square_even_components(&mut f);
        }
        f
    }

    /// Teacher-forces from a zero state over `frames[0..len-1]`, handing
    /// `(features of r_{n+1}, frames[n+1])` to `sink` for every `n ≥ washout`.
    fn drive_pairs(
        &self,
        frames: &DenseMatrix<T>,
        washout: usize,
        mut sink: impl FnMut(&[T], &[T]),
    ) -> Result<(), EsnError> {
        const BLOCK: usize = 256;
        let steps = frames.rows().saturating_sub(1);
        let d = self.size();
        let mut state = vec![T::zero(); d];
        let mut drive = vec![T::zero(); d];
        let mut feat = vec![T::zero(); d];
        let mut start = 0;
        while start < steps {
            let end = (start + BLOCK).min(steps);
            let inputs = DenseMatrix::new(
                end - start,
                self.n_in,
                frames.as_slice()[start * self.n_in..end * self.n_in].to_vec(),
            )?;
            // D × block matrix of W_in x_n for the whole block.
            let projected = self.input_weights.matmul_transposed(&inputs)?;
            let width = end - start;
            for b in 0..width {
                for (i, v) in drive.iter_mut().enumerate() {
                    *v = projected.as_slice()[i * width + b];
                }
                self.update(&mut state, &drive);
                let n = start + b;
                if n >= washout {
                    feat.copy_from_slice(&state);
                    if self.config.quadratic_features {
                        square_even_components(&mut feat);
                    }
                    sink(&feat, frames.row(n + 1));
                }
            }
            start = end;
        }
        Ok(())
    }
}

/// `r ← tanh(A r + W_in x)` on the reservoir's own state.
pub fn advance<'a, T: Real>(res: &'a mut Reservoir<T>, x: &[T]) -> Result<&'a [T], EsnError> {
    res.advance(x)
}

/// Running sufficient statistics `G = Σ φ φᵀ` and `C = Σ x φᵀ` of the readout regression.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingAccumulator<T> {
    gram: DenseMatrix<T>,
    cross: DenseMatrix<T>,
    samples: u64,
    trajectories: usize,
    regimes: Vec<(f64, f64)>,
}

const BATCH: usize = 256;

struct Batch<T> {
    features_t: Vec<T>,
    targets_t: Vec<T>,
    len: usize,
}

impl<T: Real> TrainingAccumulator<T> {
    pub fn new(features: usize, outputs: usize) -> Self {
        Self {
            gram: DenseMatrix::zeros(features, features),
            cross: DenseMatrix::zeros(outputs, features),
            samples: 0,
            trajectories: 0,
            regimes: Vec::new(),
        }
    }

    pub fn for_reservoir(res: &Reservoir<T>) -> Self {
        Self::new(res.size(), res.input_dim())
    }

    pub fn gram(&self) -> &DenseMatrix<T> {
        &self.gram
    }

    pub fn cross(&self) -> &DenseMatrix<T> {
        &self.cross
    }

    pub fn sample_count(&self) -> u64 {
        self.samples
    }

    pub fn trajectory_count(&self) -> usize {
        self.trajectories
    }

    pub fn feature_dim(&self) -> usize {
        self.gram.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.cross.rows()
    }

    /// Adds one `(feature, target)` pair.
    pub fn add_sample(&mut self, feature: &[T], target: &[T]) -> Result<(), EsnError> {
        self.check_pair(feature, target)?;
        let mut batch = self.new_batch();
        batch.push(feature, target);
        self.flush(&mut batch);
        Ok(())
    }

    fn check_pair(&self, feature: &[T], target: &[T]) -> Result<(), EsnError> {
        if feature.len() != self.feature_dim() {
            return Err(EsnError::Dimension {
                context: "feature vector",
                expected: self.feature_dim(),
                found: feature.len(),
            });
        }
        if target.len() != self.output_dim() {
            return Err(EsnError::Dimension {
                context: "target vector",
                expected: self.output_dim(),
                found: target.len(),
            });
        }
        Ok(())
    }

    fn new_batch(&self) -> Batch<T> {
        Batch {
            features_t: vec![T::zero(); self.feature_dim() * BATCH],
            targets_t: vec![T::zero(); self.output_dim() * BATCH],
            len: 0,
        }
    }

    /// Rank-`len` update of `G` (lower triangle, mirrored) and `C`.
    fn flush(&mut self, batch: &mut Batch<T>) {
        let len = batch.len;
        if len == 0 {
            return;
        }
        let d = self.feature_dim();
        let f = &batch.features_t;
        let row = |i: usize| &f[i * BATCH..i * BATCH + len];
        self.gram
            .as_mut_slice()
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(i, g_row)| {
                let fi = row(i);
                for (j, g) in g_row.iter_mut().enumerate().take(i + 1) {
                    *g = *g + dot(fi, row(j));
                }
            });
        let g = self.gram.as_mut_slice();
        for i in 0..d {
            for j in 0..i {
                g[j * d + i] = g[i * d + j];
            }
        }
        let t = &batch.targets_t;
        self.cross
            .as_mut_slice()
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(o, c_row)| {
                let to = &t[o * BATCH..o * BATCH + len];
                for (i, c) in c_row.iter_mut().enumerate() {
                    *c = *c + dot(to, row(i));
                }
            });
        self.samples += len as u64;
        batch.len = 0;
    }

    /// Adds another accumulator's sums into this one.
    pub fn merge(&mut self, other: &Self) -> Result<(), EsnError> {
        if other.feature_dim() != self.feature_dim() || other.output_dim() != self.output_dim() {
            return Err(EsnError::Dimension {
                context: "accumulator merge",
                expected: self.feature_dim(),
                found: other.feature_dim(),
            });
        }
        self.gram.add_assign(&other.gram)?;
        self.cross.add_assign(&other.cross)?;
        self.samples += other.samples;
        self.trajectories += other.trajectories;
        for r in &other.regimes {
            if !self.regimes.contains(r) {
                self.regimes.push(*r);
            }
        }
        Ok(())
    }

    /// Short description of the data seen so far, e.g. `L=22 gamma=0 trajectories=8`.
    pub fn describe(&self) -> String {
        let regimes: Vec<String> = self.regimes.iter().map(|(l, g)| format!("L={l} gamma={g}")).collect();
        format!(
            "{} trajectories={} samples={}",
            if regimes.is_empty() {
                "L=? gamma=?".to_string()
            } else {
                regimes.join(",")
            },
            self.trajectories,
            self.samples
        )
    }
}

impl<T: Real> Batch<T> {
    fn push(&mut self, feature: &[T], target: &[T]) {
        let b = self.len;
        for (i, &v) in feature.iter().enumerate() {
            self.features_t[i * BATCH + b] = v;
        }
        for (o, &v) in target.iter().enumerate() {
            self.targets_t[o * BATCH + b] = v;
        }
        self.len += 1;
    }

    fn is_full(&self) -> bool {
        self.len == BATCH
    }
}

/// Drives the reservoir (reset, washout) through one trajectory and adds its
/// regression pairs to `acc`.
///
/// The trajectory's sums are formed separately and then added, so accumulating a
/// list of trajectories one by one gives the same bits as [`accumulate_dataset`].
pub fn accumulate_trajectory<T: Real>(
    res: &mut Reservoir<T>,
    acc: &mut TrainingAccumulator<T>,
    traj: &Trajectory<T>,
) -> Result<(), EsnError> {
    res.reset();
    let part = trajectory_accumulator(res, traj)?;
    acc.merge(&part)
}

fn trajectory_accumulator<T: Real>(
    res: &Reservoir<T>,
    traj: &Trajectory<T>,
) -> Result<TrainingAccumulator<T>, EsnError> {
    if traj.grid_points() != res.input_dim() {
        return Err(EsnError::Dimension {
            context: "trajectory grid",
            expected: res.input_dim(),
            found: traj.grid_points(),
        });
    }
    let washout = res.config.washout;
    if traj.len() < washout + 2 {
        return Err(EsnError::TooShort {
            len: traj.len(),
            washout,
        });
    }
    let mut acc = TrainingAccumulator::for_reservoir(res);
    let mut batch = acc.new_batch();
    res.drive_pairs(&traj.frames, washout, |f, x| {
        batch.push(f, x);
        if batch.is_full() {
            acc.flush(&mut batch);
        }
    })?;
    acc.flush(&mut batch);
    acc.trajectories = 1;
    acc.regimes.push((traj.config.length, traj.config.gamma));
    Ok(acc)
}

/// Statistics of several trajectories, computed in parallel and merged in index order.
pub fn accumulate_dataset<T: Real>(
    res: &Reservoir<T>,
    trajectories: &[&Trajectory<T>],
) -> Result<TrainingAccumulator<T>, EsnError> {
    let mut total = TrainingAccumulator::for_reservoir(res);
    let width = rayon::current_num_threads().max(1);
    for chunk in trajectories.chunks(width) {
        let parts: Vec<Result<TrainingAccumulator<T>, EsnError>> =
            chunk.par_iter().map(|t| trajectory_accumulator(res, t)).collect();
        for part in parts {
            total.merge(&part?)?;
        }
    }
    Ok(total)
}

/// Trained output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel<T> {
    /// `W_out`, `N_x × D`.
    pub weights: DenseMatrix<T>,
    pub mu: f64,
    /// Training regime and transfer history.
    pub provenance: String,
}

impl<T: Real> ReadoutModel<T> {
    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.cols()
    }

    /// `W_out φ(r)`
    pub fn apply(&self, features: &[T]) -> Vec<T> {
        let w = &self.weights;
        (0..w.rows()).map(|o| dot(w.row(o), features)).collect()
    }
}

/// `W_out = C (G + μ I)⁻¹` over everything accumulated.
pub fn fit_readout<T: Real>(acc: &TrainingAccumulator<T>, mu: f64) -> Result<ReadoutModel<T>, EsnError> {
    if acc.sample_count() == 0 {
        return Err(EsnError::NoData("accumulator holds no samples"));
    }
    let weights = ridge_solve_gram(&acc.gram, &acc.cross, T::lit(mu))?;
    Ok(ReadoutModel {
        weights,
        mu,
        provenance: format!("trained: {} mu={mu}", acc.describe()),
    })
}

fn check_model<T: Real>(res: &Reservoir<T>, model: &ReadoutModel<T>) -> Result<(), EsnError> {
    if model.feature_dim() != res.size() {
        return Err(EsnError::Dimension {
            context: "readout feature dimension",
            expected: res.size(),
            found: model.feature_dim(),
        });
    }
    if model.output_dim() != res.input_dim() {
        return Err(EsnError::Dimension {
            context: "readout output dimension",
            expected: res.input_dim(),
            found: model.output_dim(),
        });
    }
    Ok(())
}

/// Teacher-forces through `spinup` from a zero state, then runs closed loop
/// `x̂ ← W_out φ(r)`, `r ← tanh(A r + W_in x̂)`.
///
/// Row `n` of the result is the prediction `n + 1` snapshot steps after the last
/// spin-up snapshot.
pub fn predict<T: Real, S: AsRef<[T]>>(
    res: &mut Reservoir<T>,
    model: &ReadoutModel<T>,
    spinup: &[S],
    n_steps: usize,
) -> Result<DenseMatrix<T>, EsnError> {
    check_model(res, model)?;
    if spinup.is_empty() {
        return Err(EsnError::NoData("spin-up sequence is empty"));
    }
    res.reset();
    for x in spinup {
        res.advance(x.as_ref())?;
    }
    let n_in = res.input_dim();
    let mut out = Vec::with_capacity(n_steps * n_in);
    let mut drive = vec![T::zero(); res.size()];
    let mut state = std::mem::take(&mut res.state);
    let mut x_hat = model.apply(&res.features(&state));
    for step in 0..n_steps {
        if x_hat.iter().any(|v| !v.is_finite()) {
            res.state = state;
            return Err(EsnError::Divergence { step });
        }
        out.extend_from_slice(&x_hat);
        if step + 1 == n_steps {
            break;
        }
        matvec_rows(&res.input_weights, &x_hat, &mut drive);
        res.update(&mut state, &drive);
        let feats = res.features(&state);
        x_hat = model.apply(&feats);
    }
    res.state = state;
    Ok(DenseMatrix::new(n_steps, n_in, out)?)
}

fn matvec_rows<T: Real>(m: &DenseMatrix<T>, x: &[T], y: &mut [T]) {
    y.par_iter_mut()
        .with_min_len(64)
        .enumerate()
        .for_each(|(i, yi)| *yi = dot(m.row(i), x));
}

/// Output-layer correction for a new regime:
/// `δW = (C_TL − W_out G_TL)(G_TL + α I)⁻¹`, returning `W_out + δW`.
pub fn transfer_update<T: Real>(
    model: &ReadoutModel<T>,
    res: &Reservoir<T>,
    tl_trajectories: &[&Trajectory<T>],
    alpha: f64,
) -> Result<ReadoutModel<T>, EsnError> {
    check_model(res, model)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(EsnError::InvalidConfig(format!(
            "transfer rate must be positive, got {alpha}"
        )));
    }
    if tl_trajectories.is_empty() {
        return Err(EsnError::NoData("no transfer-learning trajectories"));
    }
    let acc = accumulate_dataset(res, tl_trajectories)?;
    transfer_from_statistics(model, &acc, alpha)
}

/// Transfer correction from precomputed target-regime statistics.
pub fn transfer_from_statistics<T: Real>(
    model: &ReadoutModel<T>,
    acc: &TrainingAccumulator<T>,
    alpha: f64,
) -> Result<ReadoutModel<T>, EsnError> {
    if acc.sample_count() == 0 {
        return Err(EsnError::NoData("transfer statistics hold no samples"));
    }
    // G is mirrored exactly, so W_out G = W_out Gᵀ.
    let predicted = model.weights.matmul_transposed(&acc.gram)?;
    let residual = acc.cross.sub(&predicted)?;
    let delta = ridge_solve_gram(&acc.gram, &residual, T::lit(alpha))?;
    let weights = model.weights.add(&delta)?;
    Ok(ReadoutModel {
        weights,
        mu: model.mu,
        provenance: format!("{}; transfer: {} alpha={alpha}", model.provenance, acc.describe()),
    })
}

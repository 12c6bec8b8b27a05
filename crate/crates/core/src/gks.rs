//! Direct numerical simulation of the generalized Kuramoto-Sivashinsky equation
//!
//! ```text
//! u_t + u_xx + γ u_xxx + u_xxxx + u u_x = 0,   u(x + L, t) = u(x, t)
//! ```
//!
//! on a uniform periodic grid. The nonlinear term is advanced explicitly in
//! conservative flux form, the linear terms implicitly (semi-implicit Euler):
//!
//! ```text
//! (I + δt L_h) u^{n+1} = u^n − (δt/Δx) (F_{j+1/2} − F_{j−1/2})
//! ```
//!
//! where `L_h` is the second-order central discretization of
//! `∂² + γ∂³ + ∂⁴`. The implicit operator is circulant and is inverted exactly
//! through its DFT eigenvalues, precomputed once per configuration.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::numerics::{CirculantOperator, CirculantSolver, DenseMatrix, NumericsError, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GksError {
    #[error("invalid domain configuration: {0}")]
    InvalidConfig(String),
    #[error("solution blew up at step {step} (t = {time}): max |u| = {max_abs}")]
    BlowUp { step: u64, time: f64, max_abs: f64 },
    #[error("field has {found} points, grid has {expected}")]
    GridMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Physical and numerical setup of one simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainConfig {
    /// Domain length `L`.
    pub length: f64,
    /// Dispersion coefficient `γ`.
    pub gamma: f64,
    /// Grid points `N_x`.
    pub grid_points: usize,
    /// Integration step `δt`.
    pub dt: f64,
    /// Snapshot spacing `Δt`, an integer multiple of `dt`.
    pub dt_sample: f64,
    /// Seed for the initial-condition draws.
    pub seed: u64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            length: 22.0,
            gamma: 0.0,
            grid_points: 256,
            dt: 0.001,
            dt_sample: 0.25,
            seed: 0,
        }
    }
}

impl DomainConfig {
    pub fn validate(&self) -> Result<(), GksError> {
        let bad = |msg: String| Err(GksError::InvalidConfig(msg));
        if !(self.length > 0.0 && self.length.is_finite()) {
            return bad(format!("domain length must be positive, got {}", self.length));
        }
        if !self.gamma.is_finite() {
            return bad(format!("gamma must be finite, got {}", self.gamma));
        }
        if self.grid_points < 8 {
            return bad(format!("need at least 8 grid points, got {}", self.grid_points));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("integration step must be positive, got {}", self.dt));
        }
        let ratio = self.dt_sample / self.dt;
        if !(ratio.round() >= 1.0 && (ratio - ratio.round()).abs() <= 1e-9 * ratio) {
            return bad(format!(
                "sampling step {} is not a positive integer multiple of the integration step {}",
                self.dt_sample, self.dt
            ));
        }
        Ok(())
    }

    /// Grid spacing `L / N_x`.
    pub fn dx(&self) -> f64 {
        self.length / self.grid_points as f64
    }

    /// Integration steps per snapshot.
    pub fn sample_stride(&self) -> usize {
        (self.dt_sample / self.dt).round() as usize
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.grid_points).map(|j| j as f64 * self.dx()).collect()
    }
}

/// Parameters of the random initial condition `c₁ cos(p₁πx/L) + c₂ cos(p₂πx/L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    pub c1: f64,
    pub c2: f64,
    pub p1: u32,
    pub p2: u32,
}

impl InitialCondition {
    /// Draws `c₁, c₂ ~ U[0, 1]` and `p₁, p₂ ~ U{1..6}`, in that order.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let c1 = rng.gen::<f64>();
        let c2 = rng.gen::<f64>();
        let p1 = rng.gen_range(1..=6);
        let p2 = rng.gen_range(1..=6);
        Self { c1, c2, p1, p2 }
    }

    /// Evaluates the field on the grid `x_j = j Δx`.
    ///
    /// Odd `p` is not `L`-periodic in the continuum; the sampled field is used as is.
    pub fn field<T: Real>(&self, config: &DomainConfig) -> Vec<T> {
        let l = config.length;
        config
            .grid()
            .into_iter()
            .map(|x| {
                let v = self.c1 * (self.p1 as f64 * x * PI / l).cos() + self.c2 * (self.p2 as f64 * x * PI / l).cos();
                T::lit(v)
            })
            .collect()
    }
}

pub fn sample_initial_condition<T: Real, R: Rng + ?Sized>(
    config: &DomainConfig,
    rng: &mut R,
) -> (Vec<T>, InitialCondition) {
    let ic = InitialCondition::draw(rng);
    (ic.field(config), ic)
}

/// Random stream for trajectory `index` of a dataset seeded with `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Numerical flux `F_{j+1/2} = (u_j² + u_j u_{j+1} + u_{j+1}²) / 6`.
#[inline]
pub fn flux<T: Real>(left: T, right: T) -> T {
    (left * left + left * right + right * right) / T::lit(6.0)
}

/// The implicit operator `I + δt L_h` with `L_h ≈ ∂² + γ∂³ + ∂⁴` (periodic, second order).
pub fn build_linear_operator<T: Real>(config: &DomainConfig) -> CirculantOperator<T> {
    let dx = config.dx();
    let (dx2, dx3, dx4) = (dx * dx, dx * dx * dx, dx * dx * dx * dx);
    let g = config.gamma;
    let d2 = [(-1, 1.0 / dx2), (0, -2.0 / dx2), (1, 1.0 / dx2)];
    let d3 = [
        (-2, -g / (2.0 * dx3)),
        (-1, 2.0 * g / (2.0 * dx3)),
        (1, -2.0 * g / (2.0 * dx3)),
        (2, g / (2.0 * dx3)),
    ];
    let d4 = [
        (-2, 1.0 / dx4),
        (-1, -4.0 / dx4),
        (0, 6.0 / dx4),
        (1, -4.0 / dx4),
        (2, 1.0 / dx4),
    ];
    let mut taps: Vec<(isize, T)> = vec![(0, T::one())];
    for &(offset, c) in d2.iter().chain(&d3).chain(&d4) {
        if c != 0.0 {
            taps.push((offset, T::lit(config.dt * c)));
        }
    }
    CirculantOperator::from_offsets(config.grid_points, &taps).expect("validated grid has points")
}

/// Factorized `I + δt L_h` with eigenvalues from the stencil symbols, evaluated in double
/// precision; the constant mode gets eigenvalue exactly one at any scalar width.
pub fn linear_solver<T: Real>(config: &DomainConfig) -> Result<CirculantSolver<T>, GksError> {
    let n = config.grid_points;
    let dx = config.dx();
    let eigs = (0..n)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / n as f64;
            let (c1, c2) = (th.cos(), (2.0 * th).cos());
            let d2 = (2.0 * c1 - 2.0) / (dx * dx);
            let d4 = (6.0 - 8.0 * c1 + 2.0 * c2) / (dx * dx * dx * dx);
            let d3 = ((2.0 * th).sin() - 2.0 * th.sin()) / (dx * dx * dx);
            Complex::new(
                T::lit(1.0 + config.dt * (d2 + d4)),
                T::lit(config.dt * config.gamma * d3),
            )
        })
        .collect();
    Ok(CirculantSolver::from_eigenvalues(eigs)?)
}

/// Right-hand side `u_j − (δt/Δx)(F_{j+1/2} − F_{j−1/2})` with periodic indexing.
pub fn explicit_rhs<T: Real>(u: &[T], config: &DomainConfig, out: &mut [T]) {
    let n = u.len();
    let ratio = T::lit(config.dt / config.dx());
    let mut f_left = flux(u[n - 1], u[0]);
    for j in 0..n {
        let f_right = flux(u[j], u[(j + 1) % n]);
        out[j] = u[j] - ratio * (f_right - f_left);
        f_left = f_right;
    }
}

/// One semi-implicit Euler step, returning `u^{n+1}`.
pub fn step<T: Real>(u: &[T], config: &DomainConfig, solver: &CirculantSolver<T>) -> Result<Vec<T>, GksError> {
    if u.len() != config.grid_points || solver.len() != config.grid_points {
        return Err(GksError::GridMismatch {
            expected: config.grid_points,
            found: u.len(),
        });
    }
    let mut rhs = vec![T::zero(); u.len()];
    explicit_rhs(u, config, &mut rhs);
    let next = solver.solve(&rhs);
    check_finite(&next, 0, 0.0)?;
    Ok(next)
}

fn check_finite<T: Real>(u: &[T], step: u64, time: f64) -> Result<(), GksError> {
    if u.iter().all(|v| v.is_finite()) {
        return Ok(());
    }
    let max_abs = u
        .iter()
        .map(|v| v.as_f64().abs())
        .fold(0.0f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(v) });
    Err(GksError::BlowUp { step, time, max_abs })
}

/// Time stepper with the implicit operator factorized once.
#[derive(Debug, Clone)]
pub struct Integrator<T: Real> {
    config: DomainConfig,
    solver: CirculantSolver<T>,
    rhs: Vec<T>,
    work: Vec<Complex<T>>,
    steps: u64,
}

impl<T: Real> Integrator<T> {
    pub fn new(config: DomainConfig) -> Result<Self, GksError> {
        config.validate()?;
        let solver = linear_solver::<T>(&config)?;
        let n = config.grid_points;
        Ok(Self {
            config,
            solver,
            rhs: vec![T::zero(); n],
            work: vec![Complex::new(T::zero(), T::zero()); n],
            steps: 0,
        })
    }

    pub fn config(&self) -> &DomainConfig {
        &self.config
    }

    /// Steps taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn elapsed(&self) -> f64 {
        self.steps as f64 * self.config.dt
    }

    /// Advances `u` by one step in place.
    pub fn step(&mut self, u: &mut [T]) -> Result<(), GksError> {
        if u.len() != self.config.grid_points {
            return Err(GksError::GridMismatch {
                expected: self.config.grid_points,
                found: u.len(),
            });
        }
        explicit_rhs(u, &self.config, &mut self.rhs);
        self.solver.solve_into(&self.rhs, u, &mut self.work);
        self.steps += 1;
        check_finite(u, self.steps, self.elapsed())
    }

    pub fn advance(&mut self, u: &mut [T], steps: usize) -> Result<(), GksError> {
        for _ in 0..steps {
            self.step(u)?;
        }
        Ok(())
    }
}

/// Sampled solution: row `n` of `frames` is the field at time `t0 + n Δt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub config: DomainConfig,
    pub frames: DenseMatrix<T>,
    pub t0: f64,
    pub initial_condition: Option<InitialCondition>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(
        config: DomainConfig,
        frames: DenseMatrix<T>,
        t0: f64,
        initial_condition: Option<InitialCondition>,
    ) -> Result<Self, GksError> {
        config.validate()?;
        if frames.cols() != config.grid_points {
            return Err(GksError::GridMismatch {
                expected: config.grid_points,
                found: frames.cols(),
            });
        }
        if frames.rows() == 0 {
            return Err(GksError::InvalidConfig("trajectory has no snapshots".into()));
        }
        if !frames.is_finite() {
            return Err(GksError::InvalidConfig("trajectory has non-finite values".into()));
        }
        Ok(Self {
            config,
            frames,
            t0,
            initial_condition,
        })
    }

    /// Number of snapshots `N_t`.
    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }

    pub fn grid_points(&self) -> usize {
        self.frames.cols()
    }

    pub fn snapshot(&self, n: usize) -> &[T] {
        self.frames.row(n)
    }

    pub fn snapshots(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        (0..self.len()).map(move |n| self.frames.row(n))
    }

    /// Physical time of snapshot `n`.
    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.config.dt_sample
    }

    /// Snapshots as columns (`N_x × N_t`).
    pub fn snapshot_matrix(&self) -> DenseMatrix<T> {
        self.frames.transpose()
    }
}

/// Integrates for `t_transient` (discarded), then records a snapshot every `Δt`
/// over `t_record`, endpoints included.
pub fn simulate<T: Real>(
    config: &DomainConfig,
    u0: &[T],
    t_transient: f64,
    t_record: f64,
) -> Result<Trajectory<T>, GksError> {
    if !(t_transient >= 0.0 && t_record >= 0.0) {
        return Err(GksError::InvalidConfig(format!(
            "durations must be non-negative (transient {t_transient}, record {t_record})"
        )));
    }
    let mut integ = Integrator::<T>::new(*config)?;
    let n = config.grid_points;
    if u0.len() != n {
        return Err(GksError::GridMismatch {
            expected: n,
            found: u0.len(),
        });
    }
    let mut u = u0.to_vec();
    let transient_steps = (t_transient / config.dt).round() as usize;
    integ.advance(&mut u, transient_steps)?;

    let count = (t_record / config.dt_sample + 1e-9).floor() as usize + 1;
    let stride = config.sample_stride();
    let mut data = Vec::with_capacity(count * n);
    data.extend_from_slice(&u);
    for _ in 1..count {
        integ.advance(&mut u, stride)?;
        data.extend_from_slice(&u);
    }
    let frames = DenseMatrix::new(count, n, data)?;
    Trajectory::new(*config, frames, transient_steps as f64 * config.dt, None)
}

/// Default spin-up discarded before recording statistics.
pub const DEFAULT_TRANSIENT: f64 = 100.0;

/// Trajectory `index` of a dataset: initial condition from the per-index stream.
pub fn simulate_member<T: Real>(
    config: &DomainConfig,
    index: usize,
    t_transient: f64,
    t_record: f64,
) -> Result<Trajectory<T>, GksError> {
    let mut rng = trajectory_rng(config.seed, index as u64);
    let (u0, ic) = sample_initial_condition::<T, _>(config, &mut rng);
    let mut traj = simulate(config, &u0, t_transient, t_record)?;
    traj.initial_condition = Some(ic);
    Ok(traj)
}

/// Independent trajectories, each seeded from `config.seed` and its index.
///
/// Members are simulated in parallel; the result does not depend on scheduling.
pub fn generate_dataset<T: Real>(
    config: &DomainConfig,
    n_traj: usize,
    t_transient: f64,
    t_record: f64,
) -> Result<Vec<Trajectory<T>>, GksError> {
    if n_traj == 0 {
        return Err(GksError::InvalidConfig("dataset needs at least one trajectory".into()));
    }
    config.validate()?;
    (0..n_traj)
        .into_par_iter()
        .map(|i| simulate_member(config, i, t_transient, t_record))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_values() {
        assert_eq!(flux(0.0f64, 0.0), 0.0);
        assert_eq!(flux(1.0f64, 1.0), 0.5);
        assert!((flux(1.0f64, 2.0) - 7.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let ok = DomainConfig::default();
        assert!(ok.validate().is_ok());
        assert_eq!(ok.sample_stride(), 250);
        for bad in [
            DomainConfig { length: 0.0, ..ok },
            DomainConfig { grid_points: 7, ..ok },
            DomainConfig { dt: 0.0, ..ok },
            DomainConfig {
                dt_sample: 0.2505,
                ..ok
            },
            DomainConfig {
                dt_sample: 0.0005,
                ..ok
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn zero_amplitudes_give_zero_field() {
        let cfg = DomainConfig::default();
        let ic = InitialCondition {
            c1: 0.0,
            c2: 0.0,
            p1: 3,
            p2: 5,
        };
        assert!(ic.field::<f64>(&cfg).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_cosine_initial_condition() {
        let cfg = DomainConfig::default();
        let ic = InitialCondition {
            c1: 1.0,
            c2: 0.0,
            p1: 2,
            p2: 1,
        };
        let u = ic.field::<f64>(&cfg);
        assert_eq!(u.len(), 256);
        assert_eq!(u[0], 1.0);
        for (j, v) in u.iter().enumerate() {
            let x = j as f64 * 22.0 / 256.0;
            assert!((v - (2.0 * PI * x / 22.0).cos()).abs() < 1e-14);
            assert!(*v <= 1.0);
        }
    }

    #[test]
    fn seeded_draws_repeat() {
        let cfg = DomainConfig {
            seed: 42,
            ..Default::default()
        };
        let a = sample_initial_condition::<f64, _>(&cfg, &mut trajectory_rng(42, 3));
        let b = sample_initial_condition::<f64, _>(&cfg, &mut trajectory_rng(42, 3));
        assert_eq!(a, b);
        let c = sample_initial_condition::<f64, _>(&cfg, &mut trajectory_rng(42, 4));
        assert_ne!(a.1, c.1);
        assert!((1..=6).contains(&a.1.p1) && (0.0..=1.0).contains(&a.1.c1));
    }

    #[test]
    fn operator_annihilates_constants_up_to_identity() {
        let cfg = DomainConfig {
            gamma: 0.3,
            ..Default::default()
        };
        let op = build_linear_operator::<f64>(&cfg);
        let y = op.apply(&vec![2.0; 256]);
        assert!(y.iter().all(|v| (v - 2.0).abs() < 1e-6));
        let row_sum: f64 = op.first_column().iter().sum();
        assert!((row_sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn operator_symmetric_without_dispersion() {
        let op = build_linear_operator::<f64>(&DomainConfig::default());
        for k in 1..=2 {
            assert_eq!(op.coefficient(k), op.coefficient(-k));
        }
        let disp = build_linear_operator::<f64>(&DomainConfig {
            gamma: 0.1,
            ..Default::default()
        });
        assert_ne!(disp.coefficient(1), disp.coefficient(-1));
    }

    #[test]
    fn equilibria_are_preserved() {
        let cfg = DomainConfig::default();
        let solver = build_linear_operator::<f64>(&cfg).factorize().unwrap();
        assert!(step(&vec![0.0; 256], &cfg, &solver).unwrap().iter().all(|&v| v == 0.0));
        let c = step(&vec![1.5; 256], &cfg, &solver).unwrap();
        assert!(c.iter().all(|v| (v - 1.5).abs() < 1e-13));
    }

    #[test]
    fn zero_record_time_gives_single_snapshot() {
        let cfg = DomainConfig::default();
        let traj = simulate::<f64>(&cfg, &vec![0.1; 256], 0.0, 0.0).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.t0, 0.0);
    }

    #[test]
    fn snapshot_count_includes_endpoint() {
        let cfg = DomainConfig::default();
        let traj = simulate::<f64>(&cfg, &vec![0.0; 256], 0.5, 1.0).unwrap();
        assert_eq!(traj.len(), 5);
        assert_eq!(traj.t0, 0.5);
        assert!((traj.time(4) - 1.5).abs() < 1e-12);
        assert_eq!(traj.snapshot_matrix().shape(), (256, 5));
    }

    #[test]
    fn blow_up_is_reported() {
        // The quadratic flux overflows for an absurdly large field.
        let cfg = DomainConfig::default();
        let u0: Vec<f64> = (0..256).map(|j| 1e200 * (j as f64).sin()).collect();
        match simulate::<f64>(&cfg, &u0, 0.0, 1.0) {
            Err(GksError::BlowUp { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected blow-up, got {:?}", other.map(|t| t.len())),
        }
    }
}

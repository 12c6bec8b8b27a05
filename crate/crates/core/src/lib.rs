//! Generalized Kuramoto-Sivashinsky simulation, echo state network forecasting of
//! long-term power spectra, and output-layer transfer learning between regimes.
//!
//! The numerical code is generic over the floating point type (see
//! [`numerics::Real`]); the aliases at the crate root fix it to `f64`, which is what
//! the persistence layer and the command-line tool use.

pub mod esn;
pub mod gks;
pub mod numerics;
pub mod stats;
pub mod store;

mod error;

pub use error::Error;

pub type DenseMatrix = numerics::DenseMatrix<f64>;
pub type SparseMatrix = numerics::SparseMatrix<f64>;
pub type CirculantOperator = numerics::CirculantOperator<f64>;
pub type Trajectory = gks::Trajectory<f64>;
pub type Integrator = gks::Integrator<f64>;
pub type Reservoir = esn::Reservoir<f64>;
pub type ReadoutModel = esn::ReadoutModel<f64>;
pub type TrainingAccumulator = esn::TrainingAccumulator<f64>;

pub type DenseMatrixF32 = numerics::DenseMatrix<f32>;
pub type TrajectoryF32 = gks::Trajectory<f32>;
pub type ReservoirF32 = esn::Reservoir<f32>;

pub use esn::EsnConfig;
pub use gks::DomainConfig;
pub use stats::{Spectrum, StabilitySummary};

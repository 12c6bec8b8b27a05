use thiserror::Error;

use crate::esn::EsnError;
use crate::gks::GksError;
use crate::numerics::NumericsError;
use crate::stats::StatsError;
use crate::store::StoreError;

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Gks(#[from] GksError),
    #[error(transparent)]
    Esn(#[from] EsnError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

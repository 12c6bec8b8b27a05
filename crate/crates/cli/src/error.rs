use std::fmt;
use std::io;
use std::path::Path;

use gks_esn::esn::EsnError;
use gks_esn::gks::GksError;
use gks_esn::numerics::NumericsError;
use gks_esn::stats::StatsError;
use gks_esn::store::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Validation,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Numerical,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: io::Error) -> Self {
        Self {
            kind: ErrorKind::Io,
            message: format!("{}: {e}", path.display()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Io => 4,
        }
    }

    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn numerics_kind(e: &NumericsError) -> ErrorKind {
    match e {
        NumericsError::Singular { .. }
        | NumericsError::Unregularized { .. }
        | NumericsError::SingularMode { .. }
        | NumericsError::NoConvergence { .. }
        | NumericsError::NonFinite { .. } => ErrorKind::Numerical,
        _ => ErrorKind::Validation,
    }
}

impl From<NumericsError> for CliError {
    fn from(e: NumericsError) -> Self {
        Self {
            kind: numerics_kind(&e),
            message: e.to_string(),
        }
    }
}

impl From<GksError> for CliError {
    fn from(e: GksError) -> Self {
        let kind = match &e {
            GksError::BlowUp { .. } => ErrorKind::Numerical,
            GksError::Numerics(n) => numerics_kind(n),
            _ => ErrorKind::Validation,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<EsnError> for CliError {
    fn from(e: EsnError) -> Self {
        let kind = match &e {
            EsnError::Divergence { .. } | EsnError::DegenerateReservoir { .. } => ErrorKind::Numerical,
            EsnError::Numerics(n) => numerics_kind(n),
            _ => ErrorKind::Validation,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        Self {
            kind: ErrorKind::Validation,
            message: e.to_string(),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        let kind = match &e {
            StoreError::Invariant(_) => ErrorKind::Validation,
            _ => ErrorKind::Io,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

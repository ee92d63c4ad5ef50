use std::path::PathBuf;

use thiserror::Error;

use crate::pack::CellIndex;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The open-circuit voltage curve is only defined on the open interval (0, 1).
    #[error("state of charge {z} is outside the open interval (0, 1)")]
    SocDomain { z: f64 },

    #[error("cell {cell} state of charge left [0, 1]: {z} at t = {time:.3} s")]
    SocOutOfRange { cell: CellIndex, z: f64, time: f64 },

    #[error("current-split system is singular: {reason}")]
    SingularSystem { reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("no energy was moved through the balancer")]
    NoTransfer,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the command-line front end: 1 for anything the
    /// user can fix in their inputs, 2 for a fault raised while simulating.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Io { .. } => 1,
            Error::SocDomain { .. }
            | Error::SocOutOfRange { .. }
            | Error::SingularSystem { .. }
            | Error::NoTransfer => 2,
        }
    }
}

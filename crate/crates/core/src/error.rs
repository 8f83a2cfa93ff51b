use thiserror::Error;

use crate::roadnet::VertexId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("vertex {0} has no coordinates")]
    MissingCoordinate(usize),

    #[error("line {line}: edge weight {weight} is not positive")]
    InvalidWeight { line: usize, weight: f64 },

    #[error("vertex {0} is out of range")]
    VertexOutOfRange(VertexId),

    #[error("edge ({0}, {1}) does not exist")]
    NoSuchEdge(VertexId, VertexId),

    #[error("offset {offset} outside [0, {weight}] on edge ({u}, {v})")]
    InvalidOffset {
        u: VertexId,
        v: VertexId,
        offset: f64,
        weight: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}

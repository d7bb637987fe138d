use std::path::PathBuf;

use thiserror::Error;

use crate::idspace::{LevelRef, NodeId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdError {
    #[error("identifier widths differ: {0} vs {1} bits")]
    WidthMismatch(u8, u8),
    #[error("unsupported identifier width {0}")]
    BadWidth(u8),
    #[error("value {value:#x} does not fit in {width} bits")]
    ValueTooWide { value: u64, width: u8 },
    #[error("bit index {idx} out of range for a {width}-bit identifier")]
    BitOutOfRange { idx: u32, width: u8 },
    #[error("cannot parse identifier `{0}`")]
    Parse(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Id(#[from] IdError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty network")]
    EmptyNetwork,

    #[error("physical network is not connected ({components} components)")]
    Disconnected { components: usize },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("level {level}: no fixed point after {rounds} rounds")]
    NonConvergence { level: LevelRef, rounds: usize, dump: String },

    #[error("node {node} has no next hop towards {dest} (level {level})")]
    RoutingFailure { node: NodeId, dest: NodeId, level: u32 },

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("oracle size cap exceeded: {size} > {cap}")]
    OracleCap { size: usize, cap: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

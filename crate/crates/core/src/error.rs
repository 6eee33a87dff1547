use thiserror::Error;

use crate::chain::ChainError;
use crate::config::ConfigError;
use crate::engine::EngineError;
use crate::model::ModelError;
use crate::stats::StatsError;

/// Top-level error for the toolkit. Each variant maps onto a distinct
/// process exit class in the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("suite `{suite}` requires condition ({condition}) which fails: {margins}")]
    ConditionGate {
        suite: String,
        condition: &'static str,
        margins: String,
    },
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Exit code class: configuration 2, simulation 3, statistics 4.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Model(_) | Error::ConditionGate { .. } => 2,
            Error::UnknownSuite(_) => 2,
            Error::Engine(_) | Error::Chain(_) | Error::Io { .. } => 3,
            Error::Stats(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

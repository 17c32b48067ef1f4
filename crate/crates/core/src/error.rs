use std::io;

use thiserror::Error;

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("scenario: {0}")]
    Scenario(String),

    #[error("duplicate node id {0}")]
    DuplicateNode(usize),

    #[error("topology has {0} nodes, at most 100 target slots are addressable")]
    TooManyNodes(usize),

    #[error("zone gate {from}->{to} references unknown token `{token}`")]
    UnknownGateToken { from: String, to: String, token: String },

    #[error("registry: {0}")]
    Registry(String),

    #[error("action pair [{0}, {1}] is outside the MultiDiscrete([32, 100]) space")]
    OutOfSpace(i64, i64),

    #[error("encoder: {0}")]
    Encoder(String),

    #[error("corpus: {0}")]
    Corpus(String),

    #[error("replay diverged at record {cursor}: expected {expected}, got {got}")]
    ReplayDivergence { cursor: usize, expected: String, got: String },

    #[error("replay transcript exhausted after {0} records")]
    ReplayExhausted(usize),

    #[error("real executor is not available in this build; would run {0}")]
    RealNotImplemented(String),

    #[error("transcript: {0}")]
    Transcript(String),

    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),

    #[error("policy {agent} failed at step {step}: {message}")]
    Policy { agent: String, step: u64, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Kernel(#[from] netforge_kernels::KernelError),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
}

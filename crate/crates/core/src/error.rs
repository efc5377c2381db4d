use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("network is disconnected; unreachable buses (1-based): {unreachable:?}")]
    Disconnected { unreachable: Vec<usize> },

    #[error("equilibrium does not exist: ||L^+ p~||_E,inf = {cond_value} >= 1")]
    NoEquilibrium { cond_value: f64 },

    #[error("equilibrium angle {lambda} on edge {edge} lies outside (-pi/2, pi/2)")]
    EquilibriumOutsideRegion { edge: usize, lambda: f64 },

    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonFailed { iterations: usize, residual: f64 },

    #[error("integration produced a non-finite state at step {step}")]
    Integration { step: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid safety spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite adjoint at tape node {node} ({op}, value {value})")]
    NonFiniteAdjoint { node: usize, op: String, value: f64 },

    #[error("training diverged at episode {episode}: loss {loss:e} exceeds 1e3 x initial loss {initial:e}")]
    Diverged {
        episode: usize,
        loss: f64,
        initial: f64,
    },

    #[error("structural constraint violated after update: {0}")]
    ConstraintViolated(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
}

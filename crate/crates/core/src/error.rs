use thiserror::Error;

/// Errors produced by the simulation and verification layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Grid would not fit in addressable memory.
    #[error("grid capacity exceeded: {nodes} nodes > {max} allowed")]
    Capacity { nodes: u128, max: u128 },

    #[error("degenerate grid: {0}")]
    Grid(String),

    /// Nonlinear field exceeded the magnitude cap; carries the step index.
    #[error("field blow-up at step {step}: |u| reached {magnitude:.3e}")]
    BlowUp { step: usize, magnitude: f64 },

    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("empty batch")]
    EmptyBatch,

    #[error("batch size mismatch: {0} vs {1}")]
    BatchMismatch(usize, usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("record error: {0}")]
    Record(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("fractional order {0} outside (0, 1]")]
    OrderDomain(f64),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("history of length {history} exceeds coefficient table of length {table}")]
    HistoryLength { history: usize, table: usize },
    #[error("step index {k} out of range for trajectory of length {len}")]
    Index { k: usize, len: usize },
    #[error("simulation diverged at step {step}")]
    Diverged { step: usize },
    #[error("dataset generation diverged for initial condition {i}, trial {j} at step {step}")]
    DatasetDiverged { i: usize, j: usize, step: usize },
    #[error("insufficient excitation: every sample excluded for state component {component}")]
    InsufficientExcitation { component: usize },
    #[error("inconsistent data for component {component}: discriminant 1 - 4c = {discriminant}")]
    InconsistentData { component: usize, discriminant: f64 },
    #[error("ill-posed regression: design matrix rank deficient (condition estimate {condition:e})")]
    IllPosed { condition: f64 },
    #[error("usage: {0}")]
    Usage(String),
}

pub type Result<T> = core::result::Result<T, Error>;

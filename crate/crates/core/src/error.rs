use thiserror::Error;

/// Errors raised across the analytic, simulation and estimation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Mean arrival rate outside `[0, 1)`, or otherwise unusable.
    #[error("unstable or invalid arrival rate {rate}: a stable queue needs 0 <= rate < 1")]
    Stability { rate: f64 },

    #[error("P{{A = 0}} is zero; the stationary recursion divides by it")]
    DivisionByZero,

    #[error("invalid probability mass function: {0}")]
    InvalidPmf(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    /// Probability mass lost to truncation exceeded the configured tolerance.
    #[error("truncation at stage {stage} leaked {leaked:.3e} of probability mass (tolerance {tolerance:.1e})")]
    Truncation {
        stage: usize,
        leaked: f64,
        tolerance: f64,
    },

    #[error("KL distance diverges: model has zero mass at a cell where the empirical distribution has {empirical:.3e}")]
    Divergence { empirical: f64 },

    #[error("delay kernel has no row for separation {separation}")]
    KernelDomain { separation: usize },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no samples to build an empirical distribution from")]
    EmptySamples,

    #[error("search grid is empty")]
    EmptyGrid,

    #[error("recursion produced a negative probability {value:.3e} at index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("estimated work {estimated:.3e} exceeds the configured budget {budget:.3e}")]
    Budget { estimated: f64, budget: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by network construction, evaluation, simulation and verification.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("nonpositive inflow rate lambda[{index}] = {value}")]
    NonPositiveInflow { index: usize, value: f64 },

    #[error("nonpositive outflow rate delta[{index}] = {value}")]
    NonPositiveOutflow { index: usize, value: f64 },

    #[error("negative autocatalytic rate kappa[{i}][{j}] = {value}")]
    NegativeKappa { i: usize, j: usize, value: f64 },

    #[error("nonzero diagonal kappa[{i}][{i}] = {value}")]
    NonzeroKappaDiagonal { i: usize, value: f64 },

    #[error("rate is not finite: {0}")]
    NonFiniteRate(&'static str),

    #[error("kappa does not match the {topology} zero pattern at ({i}, {j})")]
    TopologyMismatch {
        topology: &'static str,
        i: usize,
        j: usize,
    },

    #[error("volume must be positive, got {0}")]
    NonPositiveVolume(f64),

    #[error("outflow rates are not all equal (delta[0] = {first}, delta[{index}] = {other})")]
    UnequalOutflow {
        first: f64,
        index: usize,
        other: f64,
    },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("state total {total} does not match simplex level {n}")]
    SimplexMismatch { n: u64, total: u64 },

    #[error("molecule count overflow")]
    CountOverflow,

    #[error("event cap of {cap} exceeded before time {time}")]
    EventCapExceeded { cap: u64, time: f64 },

    #[error("no end state has total count {0}")]
    EmptySlice(u64),

    #[error("state space of {states} states exceeds the cap of {cap}")]
    SizeCap { states: u128, cap: u128 },

    #[error("singular linear system while solving for the stationary vector")]
    Singular,

    #[error("ensemble of {got} trajectories is below the minimum of {min}")]
    UndersizedEnsemble { got: usize, min: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("topology {0} has no closed-form critical volume")]
    UnsupportedTopology(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

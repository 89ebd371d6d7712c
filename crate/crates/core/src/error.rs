use thiserror::Error;

/// Errors produced by the precoding library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid array geometry: {0}")]
    Geometry(String),

    #[error("invalid user placement: {}", .0.join("; "))]
    User(Vec<String>),

    #[error("modulation order must be at least 2, got {0}")]
    ModulationOrder(usize),

    #[error("cannot demodulate the zero point: phase is undefined")]
    ZeroPoint,

    #[error("sector slope is singular at reference phase {ref_phase} rad for M = {order}; use the canonical frame (reference phase 0)")]
    SlopeSingularity { ref_phase: f64, order: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{users} users exceed {antennas} antennas; at most one user per antenna is supported")]
    TooManyUsers { users: usize, antennas: usize },

    #[error("invalid solver configuration: {0}")]
    SolverConfig(String),

    #[error(
        "factorization failed: matrix is numerically singular (condition estimate {condition:.3e})"
    )]
    Factorization { condition: f64 },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("constraint system is infeasible")]
    Infeasible,

    #[error("system too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("spectrum is identically zero; cannot normalize")]
    ZeroSpectrum,

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

//! Bounds on the rate of convergence and the limiting regime of nonstationary
//! Markovian queues with catastrophes, with a forward-equation solver and a
//! Monte Carlo simulator to check them.

pub mod bounds;
pub mod cli;
pub mod generator;
pub mod io;
pub mod model;
pub mod montecarlo;
pub mod solver;

use thiserror::Error;

use bounds::BoundsError;
use model::ModelError;
use montecarlo::MonteCarloError;
use solver::SolverError;

/// Process exit codes of the `catbound` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INVALID_INPUT: i32 = 1;
    pub const BOUND_UNDEFINED: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const VERIFICATION_FAILED: i32 = 4;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("simulation: {0}")]
    MonteCarlo(#[from] MonteCarloError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Model(_) | Error::Invalid(_) | Error::Io { .. } => exit::INVALID_INPUT,
            Error::Bounds(BoundsError::Model(_)) => exit::INVALID_INPUT,
            Error::Bounds(BoundsError::Quadrature { .. }) => exit::NUMERICAL,
            Error::Bounds(_) => exit::BOUND_UNDEFINED,
            Error::Solver(SolverError::Invalid(_) | SolverError::Model(_)) => exit::INVALID_INPUT,
            Error::MonteCarlo(MonteCarloError::Invalid(_) | MonteCarloError::Model(_)) => exit::INVALID_INPUT,
            Error::Solver(_) | Error::MonteCarlo(_) => exit::NUMERICAL,
            Error::VerificationFailed(_) => exit::VERIFICATION_FAILED,
        }
    }
}

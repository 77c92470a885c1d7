//! Time-varying intensity specifications, weight sequences and the built-in
//! example family.

mod queue;
mod time_function;
mod weights;

pub mod examples;

use thiserror::Error;

pub use queue::{Arrivals, BSequence, CatastropheTail, Catastrophes, QueueModel, Services, Transition};
pub use time_function::{TimeFunction, TrigTerm};
pub use weights::{WeightConstants, WeightSequence, WeightTail};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("rate function {function} is negative at t = {t}: {value}")]
    NegativeRate { function: String, t: f64, value: f64 },
    #[error("time must be finite and nonnegative, got {0}")]
    InvalidTime(f64),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("unsupported model family: {0}")]
    UnsupportedFamily(String),
    #[error(
        "catastrophe prefix is not monotone at t = {t} and no tail rule is given; \
         declare an explicit tail so the infimum over all states is known"
    )]
    TailInfimumRequired { t: f64 },
}

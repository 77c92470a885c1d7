//! The batch-arrival example with catastrophes, in its original and
//! rescaled parameterisations.
//!
//! Both variants use `b_k = 4/(k(k+1)(k+2))`, `γ_k(t) = 2 + (1 + sin 2πt)/k`,
//! single-server service at rate `μ(t)` and linear weights. The original
//! variant has `λ(t) = 2 + 2cos 2πt`; the rescaled one uses `λ(t)/4`, which
//! gives a contraction rate `1 - cos 2πt` with positive period mean.

use super::{BSequence, Catastrophes, QueueModel, TimeFunction};

/// `λ(t) = 2 + 2 cos 2πt`.
pub fn example_lambda() -> TimeFunction {
    TimeFunction::harmonic(2.0, 1.0, 2.0, 0.0).expect("static example")
}

/// `γ_k(t) = 2 + (1 + sin 2πt)/k`.
pub fn example_catastrophes() -> Catastrophes {
    Catastrophes::harmonic(
        TimeFunction::constant(2.0),
        TimeFunction::harmonic(1.0, 1.0, 0.0, 1.0).expect("static example"),
    )
}

pub fn original_model(mu: TimeFunction) -> QueueModel {
    QueueModel::level_jump(example_lambda(), BSequence::CubicTelescoping, mu, example_catastrophes())
        .expect("static example")
}

pub fn corrected_model(mu: TimeFunction) -> QueueModel {
    QueueModel::level_jump(
        example_lambda().scaled(0.25),
        BSequence::CubicTelescoping,
        mu,
        example_catastrophes(),
    )
    .expect("static example")
}

/// Default service rate for the examples.
pub fn default_mu() -> TimeFunction {
    TimeFunction::constant(1.0)
}

/// Constants stated for the original variant, checked against first
/// principles by the bound report.
pub fn stated_claims() -> crate::bounds::ClaimedConstants {
    crate::bounds::ClaimedConstants {
        series_coefficient: Some(0.5),
        beta_double_star: Some(TimeFunction::harmonic(1.0, 1.0, 2.0, 0.0).expect("static example")),
        r_star_star: Some(2.0),
        b_star_star: Some(1.0),
        b_star: Some(4.0),
        theorem2: Some(8.0),
        mean_bound: Some(crate::bounds::MeanClaim { intercept: 2.0, slope: 2.0 }),
    }
}

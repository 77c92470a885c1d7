//! Shared fixtures and independent reference solutions for the integration tests.
#![allow(dead_code)]

use catbound::generator::{build_a, Closure};
use catbound::model::{
    Arrivals, BSequence, CatastropheTail, Catastrophes, QueueModel, Services, TimeFunction, Transition,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Nonnegative `a + c cos 2πt` with `|c| ≤ a`, or a constant.
fn random_rate(rng: &mut impl Rng, constant: bool) -> TimeFunction {
    let a = rng.random_range(0.0..3.0);
    if constant {
        return TimeFunction::constant(a);
    }
    let c = rng.random_range(-a..=a);
    TimeFunction::harmonic(a, 1.0, c, 0.0).unwrap()
}

/// A random model on states `0..=n` and somewhat beyond, so that truncation
/// is exercised. `constant` restricts every rate to a constant.
pub fn random_model(seed: u64, n: usize, constant: bool) -> QueueModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arrivals = if rng.random_bool(0.3) {
        Arrivals::LevelJump { lambda: random_rate(&mut rng, constant), b: BSequence::CubicTelescoping }
    } else {
        let count = rng.random_range(0..3 * n + 2);
        Arrivals::General(
            (0..count)
                .map(|_| Transition {
                    from: rng.random_range(0..n + 2),
                    size: rng.random_range(1..4),
                    rate: random_rate(&mut rng, constant),
                })
                .collect(),
        )
    };
    let services = if rng.random_bool(0.5) {
        Services::SingleServer { mu: random_rate(&mut rng, constant) }
    } else {
        let count = rng.random_range(0..3 * n + 2);
        Services::General(
            (0..count)
                .map(|_| {
                    let from = rng.random_range(1..n + 3);
                    Transition { from, size: rng.random_range(1..=from.min(3)), rate: random_rate(&mut rng, constant) }
                })
                .collect(),
        )
    };
    let prefix = (0..rng.random_range(0..n + 1)).map(|_| random_rate(&mut rng, constant)).collect();
    let tail = match rng.random_range(0..3) {
        0 => CatastropheTail::Zero,
        1 => CatastropheTail::Constant { rate: random_rate(&mut rng, constant) },
        _ => CatastropheTail::Harmonic {
            base: random_rate(&mut rng, constant),
            amplitude: random_rate(&mut rng, constant),
        },
    };
    QueueModel::new(arrivals, services, Catastrophes { prefix, tail: Some(tail) }).unwrap()
}

/// Random point on the probability simplex of dimension `len`.
pub fn random_stochastic(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// `exp(t A) p0` for the reflecting-closure matrix of a constant-rate model,
/// by dense matrix exponential.
pub fn expm_reference(model: &QueueModel, n: usize, p0: &[f64], t: f64) -> Vec<f64> {
    let a = build_a(model, n, 0.0, Closure::Reflecting).unwrap();
    let dense = a.matrix.to_dense();
    let m = DMatrix::from_fn(n + 1, n + 1, |i, j| dense[i][j] * t);
    let p = m.exp() * DVector::from_column_slice(p0);
    p.iter().copied().collect()
}

/// States `{0, 1}` with `0 → 1` at `lambda` and `1 → 0` at `mu`.
pub fn two_state(lambda: f64, mu: f64) -> QueueModel {
    QueueModel::new(
        Arrivals::General(vec![Transition { from: 0, size: 1, rate: TimeFunction::constant(lambda) }]),
        Services::SingleServer { mu: TimeFunction::constant(mu) },
        Catastrophes::none(),
    )
    .unwrap()
}

/// `P(X(t) = 1 | X(0) = 0)` for [`two_state`].
pub fn two_state_p1(lambda: f64, mu: f64, t: f64) -> f64 {
    lambda / (lambda + mu) * (1.0 - (-(lambda + mu) * t).exp())
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

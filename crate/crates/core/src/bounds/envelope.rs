//! Exponential envelope `exp(−∫_s^t β**) ≤ R** exp(−b** (t − s))` for
//! periodic contraction rates, and the catastrophe-rate supremum `b*`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{integrate_beta, BetaCurve, BoundsError};
use crate::model::QueueModel;

/// Grid nodes per period for the envelope and `b*` sweeps.
pub const ENVELOPE_GRID: usize = 2048;
const VERIFY_PAIRS: usize = 10_000;
const VERIFY_SEED: u64 = 0x5eed_0e17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    #[serde(rename = "R_star_star")]
    pub r_star_star: f64,
    pub b_star_star: f64,
    pub period: f64,
    pub grid_nodes: usize,
    /// Increase of `ln R**` from local refinement over the raw grid maximum.
    pub refinement_delta: f64,
    pub verified_pairs: usize,
    /// Largest `exp(−∫_s^t β**) / (R** exp(−b**(t−s)))` among the verified pairs.
    pub max_ratio: f64,
}

/// Periodic deviation `F(t) = b** t − ∫_0^t β**`, tabulated on one period.
struct Deviation<'a> {
    curve: &'a BetaCurve,
    mean: f64,
    period: f64,
    h: f64,
    nodes: Vec<f64>,
}

impl Deviation<'_> {
    fn at(&self, t: f64) -> Result<f64, BoundsError> {
        let x = t.rem_euclid(self.period);
        if let BetaCurve::Supplied(f) = self.curve {
            return Ok(self.mean * x - f.integral(0.0, x));
        }
        let k = ((x / self.h).floor() as usize).min(self.nodes.len() - 2);
        let tk = k as f64 * self.h;
        Ok(self.nodes[k] + self.mean * (x - tk) - integrate_beta(self.curve, tk, x)?)
    }

    /// Golden-section search for the extremum of `F` near grid node `k`.
    fn refine(&self, k: usize, maximize: bool) -> Result<f64, BoundsError> {
        let sign = if maximize { 1.0 } else { -1.0 };
        let center = k as f64 * self.h;
        let (mut a, mut b) = (center - self.h, center + self.h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let mut f1 = sign * self.at(x1)?;
        let mut f2 = sign * self.at(x2)?;
        for _ in 0..60 {
            if f1 > f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = sign * self.at(x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = sign * self.at(x2)?;
            }
        }
        let best = f1.max(f2).max(sign * self.nodes[k]);
        Ok(sign * best)
    }
}

/// Fits `(R**, b**)` for a `period`-periodic contraction rate:
/// `b**` is the period mean and `ln R**` the oscillation `max F − min F` of the
/// deviation `F(t) = b** t − ∫_0^t β**`.
pub fn fit_envelope(curve: &BetaCurve, period: f64) -> Result<Envelope, BoundsError> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(BoundsError::Undefined(format!("period must be positive, got {period}")));
    }
    let mean = integrate_beta(curve, 0.0, period)? / period;
    if !(mean > 1e-12) {
        return Err(BoundsError::NotExponentiallyErgodic { mean });
    }
    let n = ENVELOPE_GRID;
    let h = period / n as f64;
    let mut nodes = Vec::with_capacity(n + 1);
    let mut integral = 0.0;
    nodes.push(0.0);
    for k in 1..=n {
        integral += integrate_beta(curve, (k - 1) as f64 * h, k as f64 * h)?;
        nodes.push(mean * k as f64 * h - integral);
    }
    let dev = Deviation { curve, mean, period, h, nodes };
    let (kmax, _) = dev.nodes.iter().enumerate().fold((0, f64::NEG_INFINITY), |a, (k, v)| if *v > a.1 { (k, *v) } else { a });
    let (kmin, _) = dev.nodes.iter().enumerate().fold((0, f64::INFINITY), |a, (k, v)| if *v < a.1 { (k, *v) } else { a });
    let grid_spread = dev.nodes[kmax] - dev.nodes[kmin];
    let fmax = dev.refine(kmax, true)?;
    let fmin = dev.refine(kmin, false)?;
    let mut log_r = (fmax - fmin).max(grid_spread);
    let refinement_delta = log_r - grid_spread;

    // Check the envelope on random pairs s ≤ t spanning up to two periods.
    let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..VERIFY_PAIRS {
        let s = rng.random::<f64>() * 2.0 * period;
        let t = s + rng.random::<f64>() * 2.0 * period;
        worst = worst.max(dev.at(t)? - dev.at(s)?);
    }
    let max_ratio = (worst - log_r).exp();
    if worst > log_r {
        log_r = worst;
    }
    Ok(Envelope {
        r_star_star: log_r.exp(),
        b_star_star: mean,
        period,
        grid_nodes: n,
        refinement_delta,
        verified_pairs: VERIFY_PAIRS,
        max_ratio,
    })
}

/// `b* = sup_t β_*(t)` over `[0, horizon]` on [`ENVELOPE_GRID`] nodes, and the
/// change from the half-resolution grid as a refinement estimate.
pub fn b_star_sup(model: &QueueModel, horizon: f64) -> Result<(f64, f64), BoundsError> {
    let n = ENVELOPE_GRID;
    let mut fine = f64::NEG_INFINITY;
    let mut coarse = f64::NEG_INFINITY;
    for k in 0..=n {
        let v = model.beta_star(horizon * k as f64 / n as f64)?;
        fine = fine.max(v);
        if k % 2 == 0 {
            coarse = coarse.max(v);
        }
    }
    Ok((fine, fine - coarse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::BetaDoubleStar;
    use crate::model::{examples, TimeFunction, WeightSequence};
    use std::f64::consts::PI;

    /// Brute-force sup over a fine (s, u) grid of ∫_s^u (b − β) for a
    /// closed-form antiderivative `big_f`.
    fn grid_oracle(big_f: impl Fn(f64) -> f64, n: usize) -> f64 {
        let xs: Vec<f64> = (0..=n).map(|k| big_f(2.0 * k as f64 / n as f64)).collect();
        let mut best: f64 = 0.0;
        let mut running_min = f64::INFINITY;
        for v in xs {
            running_min = running_min.min(v);
            best = best.max(v - running_min);
        }
        best
    }

    #[test]
    fn one_plus_two_cos() {
        let curve = BetaCurve::Supplied(TimeFunction::harmonic(1.0, 1.0, 2.0, 0.0).unwrap());
        let e = fit_envelope(&curve, 1.0).unwrap();
        assert!((e.b_star_star - 1.0).abs() < 1e-15);
        assert!((e.r_star_star - (2.0 / PI).exp()).abs() < 1e-12);
        assert!(e.r_star_star <= 2.0);
        assert!(e.max_ratio <= 1.0 + 1e-12);
        let oracle = grid_oracle(|t| -(2.0 * PI * t).sin() / PI, 20_000);
        assert!((oracle - 2.0 / PI).abs() < 1e-6);
    }

    #[test]
    fn one_minus_cos() {
        let curve = BetaCurve::Supplied(TimeFunction::harmonic(1.0, 1.0, -1.0, 0.0).unwrap());
        let e = fit_envelope(&curve, 1.0).unwrap();
        assert!((e.b_star_star - 1.0).abs() < 1e-15);
        assert!((e.r_star_star - (1.0 / PI).exp()).abs() < 1e-12);
    }

    #[test]
    fn constant_rate_is_exact() {
        let curve = BetaCurve::Supplied(TimeFunction::constant(0.6));
        let e = fit_envelope(&curve, 1.0).unwrap();
        assert!((e.r_star_star - 1.0).abs() < 1e-12);
        assert!((e.b_star_star - 0.6).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_mean_rejected() {
        let curve = BetaCurve::Supplied(TimeFunction::harmonic(-0.1, 1.0, 2.0, 0.0).unwrap());
        assert!(matches!(fit_envelope(&curve, 1.0), Err(BoundsError::NotExponentiallyErgodic { .. })));
        assert!(fit_envelope(&BetaCurve::Supplied(TimeFunction::zero()), 1.0).is_err());
    }

    #[test]
    fn off_grid_extremum_is_refined() {
        // Phase-shifted rate whose extrema fall between grid nodes.
        let f = TimeFunction::harmonic(1.0, 1.0, 0.8, 0.37).unwrap();
        let amp = (0.8f64.powi(2) + 0.37f64.powi(2)).sqrt();
        let e = fit_envelope(&BetaCurve::Supplied(f), 1.0).unwrap();
        assert!((e.r_star_star.ln() - amp / PI).abs() < 1e-12);
    }

    #[test]
    fn first_principles_corrected_example() {
        let m = examples::corrected_model(TimeFunction::constant(1.0));
        let curve = BetaCurve::FirstPrinciples(BetaDoubleStar::new(&m, &WeightSequence::linear(), 200).unwrap());
        let e = fit_envelope(&curve, 1.0).unwrap();
        assert!((e.b_star_star - 1.0).abs() < 1e-9);
        assert!((e.r_star_star - (1.0 / PI).exp()).abs() < 1e-8);
        assert!(e.max_ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn example_b_star() {
        let m = examples::original_model(TimeFunction::constant(1.0));
        let (b, delta) = b_star_sup(&m, 1.0).unwrap();
        assert_eq!(b, 2.0);
        assert_eq!(delta, 0.0);
    }
}

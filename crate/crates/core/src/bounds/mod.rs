//! Contraction rate `β**(t)`, its integral, the exponential envelope and the
//! two families of bounds built on them.
//!
//! `β**(t)` is the infimum over columns `j` of
//! `|a*_jj| − Σ_{i≠j} a*_ij d_i / d_j` for the reduced matrix `A*(t)`, taken
//! over the *infinite* state space. Columns `0..=N` are evaluated exactly
//! (including the weighted mass that leaves the truncated range); columns
//! beyond `N` are covered by a certified lower bound when the model and weight
//! families admit one, and otherwise the result is flagged as a truncated
//! infimum.

mod envelope;
pub mod quadrature;
mod report;

use serde::Serialize;
use thiserror::Error;

use crate::generator::{apply_weights, build_a_star, Closure};
use crate::model::{Arrivals, BSequence, ModelError, QueueModel, Services, TimeFunction, WeightSequence};

pub use envelope::{b_star_sup, fit_envelope, Envelope, ENVELOPE_GRID};
pub use report::{
    compute_report, theorem2_value, BoundAnalysis, BoundOptions, BoundReport, Discrepancy, MeanClaim,
    ClaimedConstants, Theorem1Curves, Theorem1Report, TruncationInfo,
};

/// Absolute tolerance for integrals of `β**`.
pub const INTEGRAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("bound undefined: the series {0} diverges")]
    Divergent(String),
    #[error("not exponentially ergodic: the period mean of beta** is {mean}, not positive")]
    NotExponentiallyErgodic { mean: f64 },
    #[error("quadrature did not converge: achieved {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },
    #[error("bound undefined: {0}")]
    Undefined(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `S_m = Σ_{i≥m} b_i d_i` for the level-jump family.
pub fn weighted_arrival_tail(model: &QueueModel, w: &WeightSequence, m: usize) -> Result<f64, BoundsError> {
    let m = m.max(1);
    let b = match model.arrivals() {
        Arrivals::LevelJump { b, .. } => b,
        Arrivals::General(_) => {
            return Err(ModelError::UnsupportedFamily("weighted arrival tail needs level_jump".into()).into())
        }
    };
    match b {
        BSequence::Explicit { values } => {
            Ok((m..=values.len()).map(|i| values[i - 1] * w.d(i)).sum())
        }
        BSequence::CubicTelescoping => {
            let Some((prefix, a, s)) = w.affine_form() else {
                return Err(BoundsError::Divergent(format!(
                    "sum_i b_i d_i with b_i = 4/(i(i+1)(i+2)) and {} weights",
                    w.describe()
                )));
            };
            let mut acc = 0.0;
            for i in m..prefix.len() {
                acc += model.b(i)? * prefix[i];
            }
            let start = m.max(prefix.len()).max(1);
            // Σ_{i≥k} i b_i = 4/(k+1).
            acc += a * model.b_partial_tail(start)? + s * 4.0 / (start as f64 + 1.0);
            Ok(acc)
        }
    }
}

/// Which column attains the infimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    Column(usize),
    /// The certified lower bound for columns beyond the truncation.
    Tail,
}

/// One evaluation of `β**(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnEval {
    /// Certified value: `min(truncated_inf, tail_lower)` when the tail is
    /// certified, else `truncated_inf`.
    pub value: f64,
    pub binding: Binding,
    /// Infimum over columns `0..=N` only.
    pub truncated_inf: f64,
    pub tail_lower: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum Route {
    /// Per-column closed form for level-jump arrivals with single-server (or
    /// no) service: `λ c_λ[j] + μ c_μ[j] + β_j (1 − r_j) + β_* r_j`.
    Analytic { c_lambda: Vec<f64>, c_mu: Vec<f64>, r0: Vec<f64> },
    /// Column sums of the weighted snapshot plus the weighted leak.
    Snapshot,
}

#[derive(Debug, Clone, PartialEq)]
enum TailRule {
    /// `β_* − λ S_{N+2} / d_{N+1}`.
    LevelJump { ratio: f64 },
    /// Only catastrophes leave states beyond `N`: `β_*`.
    CatastrophesOnly,
    Uncertified,
}

/// `β**(t)` for a fixed model, weight sequence and truncation level.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaDoubleStar {
    model: QueueModel,
    weights: WeightSequence,
    n: usize,
    route: Route,
    tail: TailRule,
    /// `S_{N+1}`, for the weighted leak of level-jump snapshots.
    leak_series: Option<f64>,
}

impl BetaDoubleStar {
    pub fn new(model: &QueueModel, weights: &WeightSequence, n: usize) -> Result<Self, BoundsError> {
        Self::with_route(model, weights, n, true)
    }

    /// Forces the snapshot (column-sum) route even where the closed form applies.
    pub fn from_column_sums(model: &QueueModel, weights: &WeightSequence, n: usize) -> Result<Self, BoundsError> {
        Self::with_route(model, weights, n, false)
    }

    fn with_route(model: &QueueModel, w: &WeightSequence, n: usize, analytic: bool) -> Result<Self, BoundsError> {
        if n < 1 {
            return Err(ModelError::Invalid("truncation level must be at least 1".into()).into());
        }
        let d: Vec<f64> = (0..=n + 1).map(|k| w.d(k)).collect();
        let level_jump = model.is_level_jump();
        let leak_series = if level_jump { Some(weighted_arrival_tail(model, w, n + 1)?) } else { None };
        let closed_form_services = matches!(model.services(), Services::SingleServer { .. } | Services::None);
        let route = if analytic && level_jump && closed_form_services {
            let single = matches!(model.services(), Services::SingleServer { .. });
            let mut c_lambda = Vec::with_capacity(n + 1);
            let mut c_mu = Vec::with_capacity(n + 1);
            let mut r0 = Vec::with_capacity(n + 1);
            for j in 0..=n {
                let tail_b = model.b_partial_tail(j + 1)?;
                let tail_s = weighted_arrival_tail(model, w, j + 1)?;
                c_lambda.push(tail_b - tail_s / d[j]);
                c_mu.push(if single && j >= 1 { 1.0 - d[j - 1] / d[j] } else { 0.0 });
                r0.push(d[0] / d[j]);
            }
            Route::Analytic { c_lambda, c_mu, r0 }
        } else {
            Route::Snapshot
        };
        let d0_below_tail = d[0] <= w.inf_beyond(n);
        let tail = if level_jump && closed_form_services && w.nondecreasing_from(n) && d0_below_tail {
            TailRule::LevelJump { ratio: weighted_arrival_tail(model, w, n + 2)? / d[n + 1] }
        } else if !level_jump && model.max_listed_source().is_some_and(|s| s <= n) && d0_below_tail {
            TailRule::CatastrophesOnly
        } else {
            TailRule::Uncertified
        };
        Ok(BetaDoubleStar { model: model.clone(), weights: w.clone(), n, route, tail, leak_series })
    }

    pub fn truncation(&self) -> usize {
        self.n
    }

    pub fn tail_certified(&self) -> bool {
        self.tail != TailRule::Uncertified
    }

    pub fn model(&self) -> &QueueModel {
        &self.model
    }

    pub fn weights(&self) -> &WeightSequence {
        &self.weights
    }

    /// `|a*_jj,D| − Σ_{i≠j} a*_ij,D` for every column `j ≤ N`, over the full
    /// (untruncated) column.
    pub fn column_values(&self, t: f64) -> Result<Vec<f64>, BoundsError> {
        let bs = self.model.beta_star(t)?;
        match &self.route {
            Route::Analytic { c_lambda, c_mu, r0 } => {
                let (lam, mu) = self.lambda_mu(t)?;
                let mut out = Vec::with_capacity(self.n + 1);
                for j in 0..=self.n {
                    let beta_j = if j == 0 { 0.0 } else { self.model.catastrophe_rate(j, t)? };
                    out.push(lam * c_lambda[j] + mu * c_mu[j] + beta_j * (1.0 - r0[j]) + bs * r0[j]);
                }
                Ok(out)
            }
            Route::Snapshot => {
                let (a_star, _) = build_a_star(&self.model, self.n, t, Closure::DefectTracking)?;
                let weighted = apply_weights(&a_star, &self.weights)?;
                let mut out = Vec::with_capacity(self.n + 1);
                for j in 0..=self.n {
                    let mut off = 0.0;
                    let mut diag = 0.0;
                    for (i, v) in weighted.matrix.column(j) {
                        if i == j {
                            diag = v;
                        } else {
                            off += v;
                        }
                    }
                    out.push(diag.abs() - off - self.weighted_leak(j, t)?);
                }
                Ok(out)
            }
        }
    }

    fn lambda_mu(&self, t: f64) -> Result<(f64, f64), BoundsError> {
        let lam = match self.model.arrivals() {
            Arrivals::LevelJump { lambda, .. } => lambda.eval_named("lambda", t)?,
            Arrivals::General(_) => 0.0,
        };
        let mu = match self.model.services() {
            Services::SingleServer { mu } => mu.eval_named("mu", t)?,
            _ => 0.0,
        };
        Ok((lam, mu))
    }

    /// `Σ_{i>N} rate(j → i) d_i / d_j`.
    fn weighted_leak(&self, j: usize, t: f64) -> Result<f64, BoundsError> {
        let dj = self.weights.d(j);
        match self.model.arrivals() {
            Arrivals::LevelJump { lambda, .. } => {
                Ok(lambda.eval_named("lambda", t)? * self.leak_series.unwrap_or(0.0) / dj)
            }
            Arrivals::General(list) => {
                let mut acc = 0.0;
                for tr in list.iter().filter(|tr| tr.from == j && tr.from + tr.size > self.n) {
                    acc += tr.rate.eval_named("lambda", t)? * self.weights.d(j + tr.size) / dj;
                }
                Ok(acc)
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<ColumnEval, BoundsError> {
        let cols = self.column_values(t)?;
        let (argmin, truncated_inf) = cols
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (j, v)| if *v < acc.1 { (j, *v) } else { acc });
        let tail_lower = match &self.tail {
            TailRule::LevelJump { ratio } => {
                let (lam, _) = self.lambda_mu(t)?;
                Some(self.model.beta_star(t)? - lam * ratio)
            }
            TailRule::CatastrophesOnly => Some(self.model.beta_star(t)?),
            TailRule::Uncertified => None,
        };
        let (value, binding) = match tail_lower {
            Some(tl) if tl < truncated_inf => (tl, Binding::Tail),
            _ => (truncated_inf, Binding::Column(argmin)),
        };
        Ok(ColumnEval { value, binding, truncated_inf, tail_lower })
    }

    pub fn value(&self, t: f64) -> Result<f64, BoundsError> {
        Ok(self.eval(t)?.value)
    }

    /// `β_*(t) − λ(t) Σ_{k≥1} (d_k − 1) b_k`, the closed form for the
    /// level-jump family when column 0 binds and `d_0 = 1`.
    pub fn column_zero_formula(&self, t: f64) -> Result<f64, BoundsError> {
        let (lam, _) = self.lambda_mu(t)?;
        Ok(self.model.beta_star(t)? - lam * series_coefficient(&self.model, &self.weights)?)
    }
}

/// `Σ_{k≥1} (d_k − 1) b_k = S_1 − B_1`.
pub fn series_coefficient(model: &QueueModel, w: &WeightSequence) -> Result<f64, BoundsError> {
    Ok(weighted_arrival_tail(model, w, 1)? - model.b_partial_tail(1)?)
}

/// First-principles `β**(t)` at one time.
pub fn beta_double_star(model: &QueueModel, w: &WeightSequence, n: usize, t: f64) -> Result<ColumnEval, BoundsError> {
    BetaDoubleStar::new(model, w, n)?.eval(t)
}

/// A contraction-rate curve: computed from the model, or supplied in closed form.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaCurve {
    FirstPrinciples(BetaDoubleStar),
    Supplied(TimeFunction),
}

impl BetaCurve {
    pub fn value(&self, t: f64) -> Result<f64, BoundsError> {
        match self {
            BetaCurve::FirstPrinciples(b) => b.value(t),
            BetaCurve::Supplied(f) => Ok(f.value(t)),
        }
    }

    /// `∫_{t0}^{t1} β**`: exact for supplied closed forms, adaptive quadrature
    /// at [`INTEGRAL_TOL`] otherwise.
    pub fn integral(&self, t0: f64, t1: f64) -> Result<f64, BoundsError> {
        integrate_beta(self, t0, t1)
    }

    pub fn is_supplied(&self) -> bool {
        matches!(self, BetaCurve::Supplied(_))
    }
}

pub fn integrate_beta(curve: &BetaCurve, t0: f64, t1: f64) -> Result<f64, BoundsError> {
    if t1 < t0 {
        return Err(BoundsError::Undefined(format!("integration interval [{t0}, {t1}] is reversed")));
    }
    match curve {
        BetaCurve::Supplied(f) => Ok(f.integral(t0, t1)),
        BetaCurve::FirstPrinciples(b) => quadrature::integrate(|t| b.value(t), t0, t1, INTEGRAL_TOL),
    }
}

/// Cumulative `I(t_k) = ∫_0^{t_k} β**` on an increasing grid starting at or after 0.
pub fn cumulative_integral(curve: &BetaCurve, grid: &[f64]) -> Result<Vec<f64>, BoundsError> {
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &t in grid {
        acc += integrate_beta(curve, prev, t)?;
        out.push(acc);
        prev = t;
    }
    Ok(out)
}

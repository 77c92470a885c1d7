//! Forward Kolmogorov integration on the truncated state space, pairs of
//! solutions, conditional means and empirical checks of the bounds.

pub mod dopri;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bounds::{cumulative_integral, BoundAnalysis};
use crate::generator::{build_a, build_a_star, Closure};
use crate::io::csv;
use crate::model::{ModelError, QueueModel, WeightSequence};
pub use dopri::{DopriOptions, SolverStats};

/// Entries below this abort the integration.
pub const NEGATIVITY_ABORT: f64 = -1e-9;
/// Mass above `N/2` beyond which the conditional mean is flagged.
pub const MEAN_TAIL_WARNING: f64 = 1e-6;
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("step size underflow at t = {t} (h = {h:e}); try a larger tolerance")]
    StepUnderflow { t: f64, h: f64 },
    #[error("probability p_{state}({t}) = {value:e} is negative beyond solver tolerance; try a larger N or a smaller tolerance")]
    Negative { t: f64, state: usize, value: f64 },
    #[error("non-finite error estimate at t = {t}")]
    NonFinite { t: f64 },
    #[error("step limit reached at t = {t} after {steps} steps")]
    TooManySteps { t: f64, steps: usize },
    #[error("invalid solver input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which form of the forward equations was integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    /// `p' = A(t) p`.
    Full,
    /// `p' = A*(t) p + g(t)`.
    Reduced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n: usize,
    pub system: System,
    pub closure: Closure,
    pub times: Vec<f64>,
    pub probs: Vec<Vec<f64>>,
    pub stats: SolverStats,
}

impl Trajectory {
    /// `1 − Σ p(t)`: leaked mass under defect tracking, conservation drift otherwise.
    pub fn tail_defect(&self) -> Vec<f64> {
        self.probs.iter().map(|p| 1.0 - p.iter().sum::<f64>()).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p.iter().enumerate().map(|(k, v)| k as f64 * v).sum()).collect()
    }

    pub fn norm_1d(&self, w: &WeightSequence) -> Vec<f64> {
        let d: Vec<f64> = (0..=self.n).map(|k| w.d(k)).collect();
        self.probs.iter().map(|p| p.iter().zip(&d).map(|(v, dk)| v.abs() * dk).sum()).collect()
    }

    /// Mass in states above `N/2`.
    pub fn upper_mass(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p[self.n / 2 + 1..].iter().sum()).collect()
    }

    pub fn min_entry(&self) -> f64 {
        self.probs.iter().flatten().fold(f64::INFINITY, |a, v| a.min(*v))
    }

    pub fn at(&self, t: f64) -> Option<&[f64]> {
        self.times.iter().position(|s| *s == t).map(|i| self.probs[i].as_slice())
    }

    /// `t,p0,…,pN,tail_defect,norm_1D,mean`.
    pub fn to_csv(&self, w: &WeightSequence) -> String {
        let mut header = String::from("t");
        for k in 0..=self.n {
            header.push_str(&format!(",p{k}"));
        }
        header.push_str(",tail_defect,norm_1D,mean");
        let (defect, norm, mean) = (self.tail_defect(), self.norm_1d(w), self.mean());
        csv(
            &header,
            self.times.iter().enumerate().map(|(i, t)| {
                let mut row = Vec::with_capacity(self.n + 5);
                row.push(*t);
                row.extend_from_slice(&self.probs[i]);
                row.extend([defect[i], norm[i], mean[i]]);
                row
            }),
        )
    }
}

fn check_initial(p0: &[f64], n: usize) -> Result<(), SolverError> {
    if p0.len() != n + 1 {
        return Err(SolverError::Invalid(format!("initial vector has length {}, expected {}", p0.len(), n + 1)));
    }
    if p0.iter().any(|v| !(*v >= 0.0)) {
        return Err(SolverError::Invalid("initial vector has a negative or non-finite entry".into()));
    }
    let s: f64 = p0.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(SolverError::Invalid(format!("initial vector sums to {s}, not 1")));
    }
    Ok(())
}

/// `δ_k` of length `n + 1`.
pub fn delta(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n + 1];
    v[k] = 1.0;
    v
}

/// `count` equally spaced points on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..count).map(|k| t_max * k as f64 / (count - 1) as f64).collect(),
    }
}

fn negativity_check(t: f64, y: &[f64]) -> Result<(), SolverError> {
    for (state, v) in y.iter().enumerate() {
        if *v < NEGATIVITY_ABORT {
            return Err(SolverError::Negative { t, state, value: *v });
        }
    }
    Ok(())
}

/// Integrates `p' = A(t) p` with the given closure.
pub fn solve_with_closure(
    model: &QueueModel,
    n: usize,
    p0: &[f64],
    grid: &[f64],
    tol: f64,
    closure: Closure,
) -> Result<Trajectory, SolverError> {
    check_initial(p0, n)?;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), SolverError> {
        build_a(model, n, t, closure)?.matvec(y, dy);
        Ok(())
    };
    let (probs, stats) = dopri::integrate(rhs, p0, grid, &DopriOptions::new(tol), negativity_check)?;
    Ok(Trajectory { n, system: System::Full, closure, times: grid.to_vec(), probs, stats })
}

/// Integrates the forward equations `p' = A(t) p` with the reflecting closure.
pub fn solve_forward(model: &QueueModel, n: usize, p0: &[f64], grid: &[f64], tol: f64) -> Result<Trajectory, SolverError> {
    solve_with_closure(model, n, p0, grid, tol, Closure::Reflecting)
}

/// Integrates the reduced system `p' = A*(t) p + g(t)` with the reflecting closure.
pub fn solve_reduced(model: &QueueModel, n: usize, p0: &[f64], grid: &[f64], tol: f64) -> Result<Trajectory, SolverError> {
    check_initial(p0, n)?;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), SolverError> {
        let (a, g) = build_a_star(model, n, t, Closure::Reflecting)?;
        a.matvec(y, dy);
        g.add_to(dy);
        Ok(())
    };
    let (probs, stats) = dopri::integrate(rhs, p0, grid, &DopriOptions::new(tol), negativity_check)?;
    Ok(Trajectory { n, system: System::Reduced, closure: Closure::Reflecting, times: grid.to_vec(), probs, stats })
}

/// Observed difference norms of two solutions against the convergence bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDiagnostics {
    pub times: Vec<f64>,
    pub norm_l1: Vec<f64>,
    pub norm_1d: Vec<f64>,
    /// `e^{−I(t)} ‖D y(0)‖`.
    pub bound_lognorm3: Vec<f64>,
    /// `e^{−I(t)} ‖D y(0)‖ / d`.
    pub bound_20101: Vec<f64>,
    /// `2 d*/d · e^{−I(t)}` when `d*` is finite.
    pub bound_2011: Option<Vec<f64>>,
    /// `‖D y(t)‖ / bound_lognorm3(t)`; `None` where both vanish.
    pub ratio: Vec<Option<f64>>,
    /// Whether `d‖y‖ ≤ ‖Dy‖ ≤ d*‖y‖` held at every output time (within round-off).
    pub norm_equivalence: bool,
    pub stats: [SolverStats; 2],
}

impl PairDiagnostics {
    pub fn max_ratio(&self) -> Option<f64> {
        self.ratio.iter().flatten().copied().fold(None, |a, r| Some(a.map_or(r, |m: f64| m.max(r))))
    }

    /// Passes iff no ratio exceeds `1 + slack`.
    pub fn passes(&self, slack: f64) -> bool {
        self.max_ratio().is_none_or(|r| r <= 1.0 + slack)
    }

    /// `t,norm_l1,norm_1D,bound_lognorm3,bound_20101,ratio`; undefined ratios as `nan`.
    pub fn to_csv(&self) -> String {
        csv(
            "t,norm_l1,norm_1D,bound_lognorm3,bound_20101,ratio",
            (0..self.times.len()).map(|i| {
                [
                    self.times[i],
                    self.norm_l1[i],
                    self.norm_1d[i],
                    self.bound_lognorm3[i],
                    self.bound_20101[i],
                    self.ratio[i].unwrap_or(f64::NAN),
                ]
            }),
        )
    }
}

pub fn pair_diagnostics(
    model: &QueueModel,
    n: usize,
    p0a: &[f64],
    p0b: &[f64],
    analysis: &BoundAnalysis,
    grid: &[f64],
    tol: f64,
) -> Result<PairDiagnostics, SolverError> {
    let (ta, tb) = rayon::join(|| solve_forward(model, n, p0a, grid, tol), || solve_forward(model, n, p0b, grid, tol));
    pair_from_trajectories(&ta?, &tb?, analysis)
}

/// [`pair_diagnostics`] for two already solved trajectories on the same grid.
pub fn pair_from_trajectories(ta: &Trajectory, tb: &Trajectory, analysis: &BoundAnalysis) -> Result<PairDiagnostics, SolverError> {
    if ta.times != tb.times || ta.n != tb.n {
        return Err(SolverError::Invalid("trajectories differ in grid or truncation".into()));
    }
    let (n, grid) = (ta.n, ta.times.as_slice());
    let (p0a, p0b) = (&ta.probs[0], &tb.probs[0]);
    let w = &analysis.weights;
    let d: Vec<f64> = (0..=n).map(|k| w.d(k)).collect();
    let consts = w.constants();
    let integral = cumulative_integral(&analysis.curve, grid)
        .map_err(|e| SolverError::Invalid(format!("cannot integrate beta**: {e}")))?;
    let mut diag = PairDiagnostics {
        times: grid.to_vec(),
        norm_l1: vec![],
        norm_1d: vec![],
        bound_lognorm3: vec![],
        bound_20101: vec![],
        bound_2011: consts.d_star.is_finite().then(Vec::new),
        ratio: vec![],
        norm_equivalence: true,
        stats: [ta.stats, tb.stats],
    };
    let w0: f64 = p0a.iter().zip(p0b).zip(&d).map(|((a, b), dk)| (a - b).abs() * dk).sum();
    for (i, (pa, pb)) in ta.probs.iter().zip(&tb.probs).enumerate() {
        let (mut l1, mut l1d) = (0.0, 0.0);
        for k in 0..=n {
            let y = (pa[k] - pb[k]).abs();
            l1 += y;
            l1d += y * d[k];
        }
        let e = (-integral[i]).exp();
        let bound = e * w0;
        diag.norm_l1.push(l1);
        diag.norm_1d.push(l1d);
        diag.bound_lognorm3.push(bound);
        diag.bound_20101.push(bound / consts.d);
        if let Some(u) = diag.bound_2011.as_mut() {
            u.push(2.0 * consts.d_star / consts.d * e);
        }
        diag.ratio.push(if w0 == 0.0 || (l1d == 0.0 && bound == 0.0) { None } else { Some(l1d / bound) });
        let slack = 1e-12 * l1d.max(1e-300);
        if consts.d * l1 > l1d + slack || (consts.d_star.is_finite() && l1d > consts.d_star * l1 + slack) {
            diag.norm_equivalence = false;
        }
    }
    Ok(diag)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanCurve {
    pub k: usize,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub max_upper_mass: f64,
    pub warning: Option<String>,
}

/// `E(t, k) = Σ_j j p_j(t)` from `p(0) = δ_k`.
pub fn conditional_mean(model: &QueueModel, n: usize, k: usize, grid: &[f64], tol: f64) -> Result<MeanCurve, SolverError> {
    if k > n {
        return Err(SolverError::Invalid(format!("initial state {k} exceeds truncation {n}")));
    }
    let tr = solve_forward(model, n, &delta(n, k), grid, tol)?;
    Ok(mean_curve(&tr, k))
}

fn mean_curve(tr: &Trajectory, k: usize) -> MeanCurve {
    let max_upper_mass = tr.upper_mass().into_iter().fold(0.0, f64::max);
    let warning = (max_upper_mass > MEAN_TAIL_WARNING).then(|| {
        format!(
            "mass above state {} reaches {max_upper_mass:.3e}; the mean may be under-truncated at N = {}",
            tr.n / 2,
            tr.n
        )
    });
    MeanCurve { k, times: tr.times.clone(), mean: tr.mean(), max_upper_mass, warning }
}

/// `|E(t, j) − E(t, 0)|` against `(d_0 + d_j)/W · e^{−I(t)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanDiagnostics {
    pub j: usize,
    pub times: Vec<f64>,
    pub difference: Vec<f64>,
    pub bound: Option<Vec<f64>>,
    pub max_ratio: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn mean_diagnostics(
    model: &QueueModel,
    n: usize,
    j: usize,
    analysis: &BoundAnalysis,
    grid: &[f64],
    tol: f64,
) -> Result<MeanDiagnostics, SolverError> {
    if j > n {
        return Err(SolverError::Invalid(format!("initial state {j} exceeds truncation {n}")));
    }
    let (t0, tj) = rayon::join(
        || solve_forward(model, n, &delta(n, 0), grid, tol),
        || solve_forward(model, n, &delta(n, j), grid, tol),
    );
    mean_from_trajectories(&t0?, &tj?, j, analysis)
}

/// [`mean_diagnostics`] from trajectories started at `δ_0` and `δ_j`.
pub fn mean_from_trajectories(
    t0: &Trajectory,
    tj: &Trajectory,
    j: usize,
    analysis: &BoundAnalysis,
) -> Result<MeanDiagnostics, SolverError> {
    let grid = t0.times.as_slice();
    let (m0, mj) = (mean_curve(t0, 0), mean_curve(tj, j));
    let curves = analysis
        .theorem1_curves(grid, 0.0, j)
        .map_err(|e| SolverError::Invalid(format!("cannot integrate beta**: {e}")))?;
    let difference: Vec<f64> = m0.mean.iter().zip(&mj.mean).map(|(a, b)| (a - b).abs()).collect();
    let max_ratio = curves.mean.as_ref().map(|b| {
        difference.iter().zip(b).map(|(d, b)| if *d == 0.0 { 0.0 } else { d / b }).fold(0.0, f64::max)
    });
    Ok(MeanDiagnostics {
        j,
        times: grid.to_vec(),
        difference,
        bound: curves.mean,
        max_ratio,
        warnings: [m0.warning, mj.warning].into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitCheck {
    pub window: (f64, f64),
    pub observed_sup: f64,
    pub theorem2: Option<f64>,
    pub pass: bool,
}

/// Sup of `‖p(t)‖_{1D}` over output times in `window` against the limiting-regime bound.
pub fn limiting_regime_check(tr: &Trajectory, analysis: &BoundAnalysis, window: (f64, f64)) -> LimitCheck {
    let norms = tr.norm_1d(&analysis.weights);
    let observed_sup = tr
        .times
        .iter()
        .zip(&norms)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .fold(f64::NEG_INFINITY, |a, (_, v)| a.max(*v));
    let theorem2 = analysis.report.theorem2;
    LimitCheck { window, observed_sup, theorem2, pass: theorem2.is_some_and(|b| observed_sup <= b) }
}

/// Default late window `[0.8 t_max, t_max]`.
pub fn default_window(t_max: f64) -> (f64, f64) {
    (0.8 * t_max, t_max)
}

/// Solves from each `δ_k` in parallel.
pub fn solve_many(model: &QueueModel, n: usize, starts: &[usize], grid: &[f64], tol: f64) -> Result<Vec<Trajectory>, SolverError> {
    starts.par_iter().map(|&k| solve_forward(model, n, &delta(n, k), grid, tol)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{compute_report, BoundOptions};
    use crate::model::{examples, Arrivals, Catastrophes, Services, TimeFunction, Transition};

    fn two_state(a: f64, b: f64) -> QueueModel {
        QueueModel::new(
            Arrivals::General(vec![Transition { from: 0, size: 1, rate: TimeFunction::constant(a) }]),
            Services::SingleServer { mu: TimeFunction::constant(b) },
            Catastrophes::none(),
        )
        .unwrap()
    }

    #[test]
    fn two_state_closed_form() {
        let (a, b) = (0.7, 1.9);
        let grid = uniform_grid(3.0, 31);
        let tr = solve_forward(&two_state(a, b), 1, &delta(1, 0), &grid, 1e-12).unwrap();
        for (t, p) in grid.iter().zip(&tr.probs) {
            let exact = a / (a + b) * (1.0 - (-(a + b) * t).exp());
            assert!((p[1] - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rates_are_stationary() {
        let m = QueueModel::new(Arrivals::General(vec![]), Services::None, Catastrophes::none()).unwrap();
        let p0 = [0.2, 0.3, 0.5];
        let tr = solve_forward(&m, 2, &p0, &[0.0, 1.0, 5.0], 1e-10).unwrap();
        assert!(tr.probs.iter().all(|p| p == &p0));
        let mc = conditional_mean(&m, 2, 0, &[0.0, 3.0], 1e-10).unwrap();
        assert_eq!(mc.mean, vec![0.0, 0.0]);
    }

    #[test]
    fn example_conserves_mass() {
        let m = examples::original_model(examples::default_mu());
        let grid = uniform_grid(10.0, 201);
        let tr = solve_forward(&m, 200, &delta(200, 0), &grid, 1e-10).unwrap();
        assert!(tr.tail_defect().iter().all(|d| d.abs() <= 1e-9));
        assert!(tr.min_entry() >= -1e-12);
        let csv = tr.to_csv(&WeightSequence::linear());
        assert!(csv.starts_with("t,p0,p1,"));
        assert!(csv.lines().next().unwrap().ends_with(",p200,tail_defect,norm_1D,mean"));
        assert_eq!(csv.lines().count(), 202);
    }

    #[test]
    fn defect_tracking_leaks() {
        let m = examples::original_model(examples::default_mu());
        let tr = solve_with_closure(&m, 20, &delta(20, 0), &[0.0, 1.0], 1e-10, Closure::DefectTracking).unwrap();
        let leak = tr.tail_defect()[1];
        assert!(leak > 0.0 && leak < 0.05, "{leak}");
    }

    #[test]
    fn reduced_matches_full_without_catastrophes() {
        let m = two_state(0.4, 0.9);
        let grid = uniform_grid(2.0, 5);
        let a = solve_forward(&m, 1, &delta(1, 1), &grid, 1e-11).unwrap();
        let b = solve_reduced(&m, 1, &delta(1, 1), &grid, 1e-11).unwrap();
        assert_eq!(a.probs, b.probs);
    }

    #[test]
    fn identical_pair_has_undefined_ratios() {
        let m = examples::corrected_model(examples::default_mu());
        let an = compute_report(&m, &WeightSequence::linear(), &BoundOptions { n: 30, ..Default::default() }).unwrap();
        let d = pair_diagnostics(&m, 30, &delta(30, 2), &delta(30, 2), &an, &uniform_grid(1.0, 5), 1e-10).unwrap();
        assert!(d.norm_1d.iter().all(|v| *v == 0.0));
        assert!(d.ratio.iter().all(Option::is_none));
        assert!(d.max_ratio().is_none() && d.passes(1e-6));
        assert!(d.to_csv().contains("NaN") || d.to_csv().contains("nan"));
    }

    #[test]
    fn mm1_with_catastrophes_uniform_bound() {
        let c = 0.8;
        let m = QueueModel::new(
            Arrivals::General((0..10).map(|j| Transition { from: j, size: 1, rate: TimeFunction::constant(1.5) }).collect()),
            Services::SingleServer { mu: TimeFunction::constant(1.0) },
            Catastrophes::constant(TimeFunction::constant(c)),
        )
        .unwrap();
        let w = WeightSequence::constant_one();
        let an = compute_report(&m, &w, &BoundOptions { n: 10, t_max: 4.0, ..Default::default() }).unwrap();
        let grid = uniform_grid(4.0, 41);
        let d = pair_diagnostics(&m, 10, &delta(10, 0), &delta(10, 7), &an, &grid, 1e-11).unwrap();
        assert!(d.norm_equivalence);
        for (t, y) in grid.iter().zip(&d.norm_l1) {
            assert!(*y <= 2.0 * (-c * t).exp() * (1.0 + 1e-9), "t={t}");
        }
        assert!(d.passes(1e-6));
    }

    #[test]
    fn limit_check_on_empty_system() {
        let m = QueueModel::new(
            Arrivals::General(vec![]),
            Services::SingleServer { mu: TimeFunction::constant(1.0) },
            Catastrophes::constant(TimeFunction::constant(2.0)),
        )
        .unwrap();
        let an = compute_report(&m, &WeightSequence::linear(), &BoundOptions { n: 6, ..Default::default() }).unwrap();
        let tr = solve_forward(&m, 6, &delta(6, 6), &uniform_grid(30.0, 101), 1e-10).unwrap();
        let chk = limiting_regime_check(&tr, &an, default_window(30.0));
        assert!((chk.observed_sup - 1.0).abs() < 1e-12);
        assert_eq!(chk.theorem2, Some(1.0));
        assert!(chk.pass);
    }
}

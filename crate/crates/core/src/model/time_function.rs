//! Scalar functions of time used for every intensity in a model.
//!
//! Four shapes are supported, each with an exact antiderivative:
//!
//! * `constant`: a single value.
//! * `trig_poly`: `a0 + Σ_j (a_j cos(2π f_j t) + b_j sin(2π f_j t))`.
//! * `piecewise_constant`: values held on `[breaks[i], breaks[i+1])`, the last
//!   value held forever.
//! * `tabulated`: linear interpolation between samples, held flat outside the
//!   sample range.
//!
//! A declared `period` makes the piecewise and tabulated shapes repeat on
//! `[0, period)`. For `trig_poly` the period is only checked, never imposed.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Values this close to zero (relative to the coefficient scale) are treated as
/// round-off, not as negative intensities.
const ROUNDOFF_REL: f64 = 1e-12;

/// Grid resolution used for sign checks and for certified suprema.
const CHECK_GRID: usize = 4096;

/// One harmonic of a trigonometric polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub freq: f64,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Constant(f64),
    TrigPoly { offset: f64, terms: Vec<TrigTerm> },
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

/// A locally integrable scalar function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TimeFunctionSpec", into = "TimeFunctionSpec")]
pub struct TimeFunction {
    shape: Shape,
    period: Option<f64>,
}

/// Wire form of [`TimeFunction`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum TimeFunctionSpec {
    Constant {
        value: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<f64>,
    },
    TrigPoly {
        offset: f64,
        #[serde(default)]
        terms: Vec<TrigTerm>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<f64>,
    },
    PiecewiseConstant {
        breaks: Vec<f64>,
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<f64>,
    },
    Tabulated {
        times: Vec<f64>,
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<f64>,
    },
}

impl TryFrom<TimeFunctionSpec> for TimeFunction {
    type Error = ModelError;

    fn try_from(spec: TimeFunctionSpec) -> Result<Self, Self::Error> {
        let (shape, period) = match spec {
            TimeFunctionSpec::Constant { value, period } => (Shape::Constant(value), period),
            TimeFunctionSpec::TrigPoly { offset, terms, period } => {
                (Shape::TrigPoly { offset, terms }, period)
            }
            TimeFunctionSpec::PiecewiseConstant { breaks, values, period } => {
                (Shape::PiecewiseConstant { breaks, values }, period)
            }
            TimeFunctionSpec::Tabulated { times, values, period } => {
                (Shape::Tabulated { times, values }, period)
            }
        };
        let f = TimeFunction { shape, period };
        f.validate_structure()?;
        Ok(f)
    }
}

impl From<TimeFunction> for TimeFunctionSpec {
    fn from(f: TimeFunction) -> Self {
        let period = f.period;
        match f.shape {
            Shape::Constant(value) => TimeFunctionSpec::Constant { value, period },
            Shape::TrigPoly { offset, terms } => TimeFunctionSpec::TrigPoly { offset, terms, period },
            Shape::PiecewiseConstant { breaks, values } => {
                TimeFunctionSpec::PiecewiseConstant { breaks, values, period }
            }
            Shape::Tabulated { times, values } => TimeFunctionSpec::Tabulated { times, values, period },
        }
    }
}

impl TimeFunction {
    pub fn constant(value: f64) -> Self {
        TimeFunction { shape: Shape::Constant(value), period: None }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn trig_poly(offset: f64, terms: Vec<TrigTerm>) -> Result<Self, ModelError> {
        let f = TimeFunction { shape: Shape::TrigPoly { offset, terms }, period: None };
        f.validate_structure()?;
        Ok(f)
    }

    /// `offset + a cos(2π f t) + b sin(2π f t)` with period `1/f`.
    pub fn harmonic(offset: f64, freq: f64, cos: f64, sin: f64) -> Result<Self, ModelError> {
        Self::trig_poly(offset, vec![TrigTerm { freq, cos, sin }])?.with_period(1.0 / freq)
    }

    pub fn piecewise_constant(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self, ModelError> {
        let f = TimeFunction { shape: Shape::PiecewiseConstant { breaks, values }, period: None };
        f.validate_structure()?;
        Ok(f)
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self, ModelError> {
        let f = TimeFunction { shape: Shape::Tabulated { times, values }, period: None };
        f.validate_structure()?;
        Ok(f)
    }

    pub fn with_period(mut self, period: f64) -> Result<Self, ModelError> {
        self.period = Some(period);
        self.validate_structure()?;
        Ok(self)
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn kind(&self) -> &'static str {
        match self.shape {
            Shape::Constant(_) => "constant",
            Shape::TrigPoly { .. } => "trig_poly",
            Shape::PiecewiseConstant { .. } => "piecewise_constant",
            Shape::Tabulated { .. } => "tabulated",
        }
    }

    pub fn is_constant(&self) -> bool {
        match &self.shape {
            Shape::Constant(_) => true,
            Shape::TrigPoly { terms, .. } => terms.iter().all(|t| t.cos == 0.0 && t.sin == 0.0),
            Shape::PiecewiseConstant { values, .. } | Shape::Tabulated { values, .. } => {
                values.windows(2).all(|w| w[0] == w[1])
            }
        }
    }

    /// `c · f`, keeping the shape and period.
    pub fn scaled(&self, c: f64) -> Self {
        let shape = match &self.shape {
            Shape::Constant(v) => Shape::Constant(c * v),
            Shape::TrigPoly { offset, terms } => Shape::TrigPoly {
                offset: c * offset,
                terms: terms
                    .iter()
                    .map(|t| TrigTerm { freq: t.freq, cos: c * t.cos, sin: c * t.sin })
                    .collect(),
            },
            Shape::PiecewiseConstant { breaks, values } => Shape::PiecewiseConstant {
                breaks: breaks.clone(),
                values: values.iter().map(|v| c * v).collect(),
            },
            Shape::Tabulated { times, values } => Shape::Tabulated {
                times: times.clone(),
                values: values.iter().map(|v| c * v).collect(),
            },
        };
        TimeFunction { shape, period: self.period }
    }

    fn validate_structure(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::Invalid(msg));
        if let Some(p) = self.period {
            if !(p.is_finite() && p > 0.0) {
                return bad(format!("period must be positive and finite, got {p}"));
            }
        }
        match &self.shape {
            Shape::Constant(v) => {
                if !v.is_finite() {
                    return bad(format!("constant value {v} is not finite"));
                }
            }
            Shape::TrigPoly { offset, terms } => {
                if !offset.is_finite() {
                    return bad("trig_poly offset is not finite".into());
                }
                for t in terms {
                    if !(t.freq.is_finite() && t.freq >= 0.0 && t.cos.is_finite() && t.sin.is_finite()) {
                        return bad(format!("invalid trig_poly term {t:?}"));
                    }
                }
                if let Some(p) = self.period {
                    // f(t + T) = f(t) on a grid over two periods.
                    let scale = self.coefficient_scale().max(1.0);
                    for i in 0..=CHECK_GRID {
                        let t = 2.0 * p * i as f64 / CHECK_GRID as f64;
                        let diff = (self.raw(t + p) - self.raw(t)).abs();
                        if diff > 1e-12 * scale {
                            return bad(format!(
                                "trig_poly is not {p}-periodic: f({t}+T) - f({t}) = {diff:e}"
                            ));
                        }
                    }
                }
            }
            Shape::PiecewiseConstant { breaks, values } => {
                if breaks.is_empty() || breaks.len() != values.len() {
                    return bad("piecewise_constant needs equally many breaks and values (at least one)".into());
                }
                if breaks[0] != 0.0 {
                    return bad("piecewise_constant breaks must start at 0".into());
                }
                if breaks.windows(2).any(|w| !(w[1] > w[0])) || breaks.iter().any(|b| !b.is_finite()) {
                    return bad("piecewise_constant breaks must be finite and strictly increasing".into());
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return bad("piecewise_constant values must be finite".into());
                }
                if let Some(p) = self.period {
                    if *breaks.last().unwrap() >= p {
                        return bad("piecewise_constant breaks must lie inside [0, period)".into());
                    }
                }
            }
            Shape::Tabulated { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return bad("tabulated needs equally many times and values (at least one)".into());
                }
                if times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|b| !b.is_finite()) {
                    return bad("tabulated times must be finite, nonnegative and strictly increasing".into());
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return bad("tabulated values must be finite".into());
                }
                if let Some(p) = self.period {
                    if *times.last().unwrap() > p {
                        return bad("tabulated times must lie inside [0, period]".into());
                    }
                }
            }
        }
        Ok(())
    }

    fn coefficient_scale(&self) -> f64 {
        match &self.shape {
            Shape::Constant(v) => v.abs(),
            Shape::TrigPoly { offset, terms } => {
                offset.abs() + terms.iter().map(|t| t.cos.abs() + t.sin.abs()).sum::<f64>()
            }
            Shape::PiecewiseConstant { values, .. } | Shape::Tabulated { values, .. } => {
                values.iter().fold(0.0, |m, v| m.max(v.abs()))
            }
        }
    }

    /// Maps `t` into the base period for shapes that repeat.
    fn reduce(&self, t: f64) -> f64 {
        match (self.period, &self.shape) {
            (Some(p), Shape::PiecewiseConstant { .. } | Shape::Tabulated { .. }) => t.rem_euclid(p),
            _ => t,
        }
    }

    fn raw(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Constant(v) => *v,
            Shape::TrigPoly { offset, terms } => {
                let mut acc = *offset;
                for term in terms {
                    let arg = 2.0 * PI * term.freq * t;
                    if term.cos != 0.0 {
                        acc += term.cos * arg.cos();
                    }
                    if term.sin != 0.0 {
                        acc += term.sin * arg.sin();
                    }
                }
                acc
            }
            Shape::PiecewiseConstant { breaks, values } => {
                let t = self.reduce(t);
                let idx = breaks.partition_point(|&b| b <= t);
                values[idx.saturating_sub(1)]
            }
            Shape::Tabulated { times, values } => {
                let t = self.reduce(t);
                let idx = times.partition_point(|&x| x <= t);
                if idx == 0 {
                    values[0]
                } else if idx == times.len() {
                    values[idx - 1]
                } else {
                    let (t0, t1) = (times[idx - 1], times[idx]);
                    let (v0, v1) = (values[idx - 1], values[idx]);
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                }
            }
        }
    }

    /// Signed value at `t`; no sign check.
    pub fn value(&self, t: f64) -> f64 {
        self.raw(t)
    }

    /// Evaluates the function as an intensity: negative values are errors
    /// (round-off-level negatives are returned as zero).
    pub fn eval_rate(&self, t: f64) -> Result<f64, ModelError> {
        self.eval_named(self.kind(), t)
    }

    /// As [`eval_rate`](Self::eval_rate), naming the function in any error.
    pub fn eval_named(&self, name: &str, t: f64) -> Result<f64, ModelError> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(ModelError::InvalidTime(t));
        }
        let v = self.raw(t);
        if v >= 0.0 {
            Ok(v)
        } else if v >= -ROUNDOFF_REL * self.coefficient_scale() {
            Ok(0.0)
        } else {
            Err(ModelError::NegativeRate { function: name.to_string(), t, value: v })
        }
    }

    /// Horizon over which one sign check covers all behaviour of the function.
    fn check_horizon(&self) -> f64 {
        if let Some(p) = self.period {
            return p;
        }
        match &self.shape {
            Shape::TrigPoly { terms, .. } => {
                let fmin = terms.iter().map(|t| t.freq).filter(|f| *f > 0.0).fold(f64::INFINITY, f64::min);
                if fmin.is_finite() { 1.0 / fmin } else { 1.0 }
            }
            _ => 1.0,
        }
    }

    /// Confirms the function is a valid intensity: exact for the piecewise
    /// shapes, on a dense grid over one period for trigonometric polynomials.
    pub fn check_nonnegative(&self, name: &str) -> Result<(), ModelError> {
        match &self.shape {
            Shape::Constant(_) => self.eval_named(name, 0.0).map(|_| ()),
            Shape::PiecewiseConstant { breaks, values } | Shape::Tabulated { times: breaks, values } => {
                for (b, v) in breaks.iter().zip(values) {
                    if *v < 0.0 {
                        return Err(ModelError::NegativeRate { function: name.to_string(), t: *b, value: *v });
                    }
                }
                Ok(())
            }
            Shape::TrigPoly { .. } => {
                let h = self.check_horizon();
                for i in 0..=CHECK_GRID {
                    self.eval_named(name, h * i as f64 / CHECK_GRID as f64)?;
                }
                Ok(())
            }
        }
    }

    /// Antiderivative on the unreduced axis, without period handling.
    fn base_antiderivative(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Constant(v) => v * t,
            Shape::TrigPoly { offset, terms } => {
                let mut acc = offset * t;
                for term in terms {
                    if term.freq == 0.0 {
                        acc += term.cos * t;
                        continue;
                    }
                    let w = 2.0 * PI * term.freq;
                    let arg = w * t;
                    acc += (term.cos * arg.sin() + term.sin * (1.0 - arg.cos())) / w;
                }
                acc
            }
            Shape::PiecewiseConstant { breaks, values } => {
                let mut acc = 0.0;
                for i in 0..breaks.len() {
                    let start = breaks[i];
                    if t <= start {
                        break;
                    }
                    let end = breaks.get(i + 1).copied().unwrap_or(f64::INFINITY).min(t);
                    acc += values[i] * (end - start);
                }
                acc
            }
            Shape::Tabulated { times, values } => {
                let mut acc = values[0] * t.min(times[0]);
                for i in 1..times.len() {
                    let (t0, t1) = (times[i - 1], times[i]);
                    if t <= t0 {
                        break;
                    }
                    let end = t.min(t1);
                    let v_end = values[i - 1] + (values[i] - values[i - 1]) * (end - t0) / (t1 - t0);
                    acc += 0.5 * (values[i - 1] + v_end) * (end - t0);
                }
                let last = *times.last().unwrap();
                if t > last {
                    acc += values[values.len() - 1] * (t - last);
                }
                acc
            }
        }
    }

    fn antiderivative(&self, t: f64) -> f64 {
        match (self.period, &self.shape) {
            (Some(p), Shape::PiecewiseConstant { .. } | Shape::Tabulated { .. }) => {
                let cycles = (t / p).floor();
                cycles * self.base_antiderivative(p) + self.base_antiderivative(t - cycles * p)
            }
            _ => self.base_antiderivative(t),
        }
    }

    /// Exact `∫_{t0}^{t1} f`.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        self.antiderivative(t1) - self.antiderivative(t0)
    }

    /// Certified upper bound on `sup_{[a, b]} f`.
    pub fn sup_on(&self, a: f64, b: f64) -> f64 {
        match &self.shape {
            Shape::Constant(v) => *v,
            Shape::TrigPoly { offset, terms } => {
                let crude = offset + terms.iter().map(|t| t.cos.abs() + t.sin.abs()).sum::<f64>();
                if b <= a {
                    return self.raw(a);
                }
                let lipschitz: f64 = terms
                    .iter()
                    .map(|t| 2.0 * PI * t.freq * (t.cos.abs() + t.sin.abs()))
                    .sum();
                let n = 256;
                let h = (b - a) / n as f64;
                let grid_max = (0..=n).map(|i| self.raw(a + h * i as f64)).fold(f64::NEG_INFINITY, f64::max);
                crude.min(grid_max + 0.5 * lipschitz * h)
            }
            Shape::PiecewiseConstant { .. } | Shape::Tabulated { .. } => {
                self.reduced_intervals(a, b)
                    .into_iter()
                    .map(|(lo, hi)| self.piecewise_sup(lo, hi))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    fn reduced_intervals(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        match self.period {
            None => vec![(a, b)],
            Some(p) => {
                if b - a >= p {
                    return vec![(0.0, p)];
                }
                let lo = a.rem_euclid(p);
                let hi = lo + (b - a);
                if hi <= p {
                    vec![(lo, hi)]
                } else {
                    vec![(lo, p), (0.0, hi - p)]
                }
            }
        }
    }

    fn piecewise_sup(&self, a: f64, b: f64) -> f64 {
        match &self.shape {
            Shape::PiecewiseConstant { breaks, values } => {
                let first = breaks.partition_point(|&x| x <= a).saturating_sub(1);
                let mut m = values[first];
                for i in first + 1..breaks.len() {
                    if breaks[i] >= b {
                        break;
                    }
                    m = m.max(values[i]);
                }
                m
            }
            Shape::Tabulated { times, values } => {
                let mut m = self.raw(a).max(self.raw(b));
                for (t, v) in times.iter().zip(values) {
                    if *t > a && *t < b {
                        m = m.max(*v);
                    }
                }
                m
            }
            _ => unreachable!(),
        }
    }

    /// `sup f` over one period (or over `[0, horizon]` if aperiodic),
    /// computed as a grid maximum with `n` nodes.
    pub fn grid_sup(&self, horizon: f64, n: usize) -> f64 {
        (0..=n).map(|i| self.raw(horizon * i as f64 / n as f64)).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lambda_example() -> TimeFunction {
        TimeFunction::harmonic(2.0, 1.0, 2.0, 0.0).unwrap()
    }

    #[test]
    fn example_arrival_rate_values() {
        let f = lambda_example();
        assert_eq!(f.eval_rate(0.0).unwrap(), 4.0);
        assert_eq!(f.eval_rate(0.5).unwrap(), 0.0);
        assert_eq!(TimeFunction::zero().eval_rate(3.7).unwrap(), 0.0);
    }

    #[test]
    fn negative_rate_names_function_and_time() {
        let f = TimeFunction::harmonic(0.5, 1.0, 1.0, 0.0).unwrap();
        match f.eval_named("lambda", 0.5) {
            Err(ModelError::NegativeRate { function, t, value }) => {
                assert_eq!(function, "lambda");
                assert_eq!(t, 0.5);
                assert!((value + 0.5).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(f.check_nonnegative("lambda").is_err());
        assert!(lambda_example().check_nonnegative("lambda").is_ok());
    }

    #[test]
    fn negative_time_rejected() {
        assert!(matches!(TimeFunction::constant(1.0).eval_rate(-1.0), Err(ModelError::InvalidTime(_))));
    }

    #[test]
    fn declared_period_is_checked() {
        let f = TimeFunction::trig_poly(1.0, vec![TrigTerm { freq: 1.0, cos: 1.0, sin: 0.0 }]).unwrap();
        assert!(f.clone().with_period(1.0).is_ok());
        assert!(f.clone().with_period(0.5).is_err());
        assert!(f.with_period(2.0).is_ok());
    }

    #[test]
    fn trig_integral_matches_antiderivative() {
        // 1 + 2cos(2πt): ∫_0^{1/4} = 1/4 + 1/π.
        let f = TimeFunction::harmonic(1.0, 1.0, 2.0, 0.0).unwrap();
        assert!((f.integral(0.0, 0.25) - (0.25 + 1.0 / PI)).abs() < 1e-15);
        assert!((f.integral(0.0, 1.0) - 1.0).abs() < 1e-14);
        let g = TimeFunction::harmonic(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!((g.integral(0.0, 0.5) - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn piecewise_and_tabulated_integrals() {
        let f = TimeFunction::piecewise_constant(vec![0.0, 1.0, 3.0], vec![2.0, 0.5, 1.0]).unwrap();
        assert_eq!(f.value(0.5), 2.0);
        assert_eq!(f.value(1.0), 0.5);
        assert_eq!(f.value(10.0), 1.0);
        assert!((f.integral(0.0, 4.0) - (2.0 + 1.0 + 1.0)).abs() < 1e-15);
        let periodic = f.clone().with_period(4.0).unwrap();
        assert_eq!(periodic.value(4.5), 2.0);
        assert!((periodic.integral(0.0, 8.0) - 8.0).abs() < 1e-14);
        assert!((periodic.integral(3.5, 4.5) - 1.5).abs() < 1e-14);

        let g = TimeFunction::tabulated(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(g.value(0.5), 1.0);
        assert!((g.integral(0.0, 2.0) - 2.0).abs() < 1e-15);
        assert!((g.integral(0.5, 1.5) - 1.5).abs() < 1e-15);
        assert!((g.integral(0.0, 3.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sup_on_is_an_upper_bound() {
        let f = TimeFunction::harmonic(2.0, 1.0, 0.7, 1.3).unwrap();
        for k in 0..20 {
            let a = 0.137 * k as f64;
            let b = a + 0.31;
            let s = f.sup_on(a, b);
            for i in 0..=1000 {
                let t = a + (b - a) * i as f64 / 1000.0;
                assert!(f.value(t) <= s + 1e-15);
            }
        }
        let p = TimeFunction::piecewise_constant(vec![0.0, 0.25, 0.5], vec![1.0, 3.0, 2.0])
            .unwrap()
            .with_period(1.0)
            .unwrap();
        assert_eq!(p.sup_on(0.6, 0.9), 2.0);
        assert_eq!(p.sup_on(0.9, 1.3), 3.0);
        assert_eq!(p.sup_on(0.9, 1.1), 2.0);
    }

    #[test]
    fn wire_format_roundtrip_and_strictness() {
        let f = lambda_example();
        let json = serde_json::to_string(&f).unwrap();
        let back: TimeFunction = serde_json::from_str(&json).unwrap();
        assert_eq!(f, back);
        let typo = r#"{"kind":"constant","valeu":1.0}"#;
        assert!(serde_json::from_str::<TimeFunction>(typo).is_err());
        let bad_period = r#"{"kind":"trig_poly","offset":1,"terms":[{"freq":1,"cos":1}],"period":0.3}"#;
        assert!(serde_json::from_str::<TimeFunction>(bad_period).is_err());
    }
}

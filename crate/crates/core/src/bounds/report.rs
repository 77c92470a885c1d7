use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    b_star_sup, cumulative_integral, fit_envelope, integrate_beta, series_coefficient, BetaCurve, BetaDoubleStar,
    Binding, BoundsError, Envelope, ENVELOPE_GRID,
};
use crate::io::csv;
use crate::model::{QueueModel, TimeFunction, WeightConstants, WeightSequence};

/// Claimed mean-bound coefficient `intercept + slope · j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanClaim {
    pub intercept: f64,
    pub slope: f64,
}

/// Externally asserted constants to be checked against first-principles values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimedConstants {
    /// Claimed `Σ_{k≥1} (d_k − 1) b_k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_coefficient: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_double_star: Option<TimeFunction>,
    #[serde(default, rename = "R_star_star", skip_serializing_if = "Option::is_none")]
    pub r_star_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_star_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_bound: Option<MeanClaim>,
}

#[derive(Debug, Clone)]
pub struct BoundOptions {
    pub n: usize,
    pub t_max: f64,
    /// Number of output samples on `[0, t_max]`.
    pub grid: usize,
    pub claims: Option<ClaimedConstants>,
    /// Use this curve as `β**` instead of the first-principles value.
    pub beta_override: Option<TimeFunction>,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions { n: 200, t_max: 10.0, grid: 201, claims: None, beta_override: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discrepancy {
    pub quantity: String,
    pub claimed: f64,
    pub first_principles: Option<f64>,
    pub consistent: bool,
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationInfo {
    #[serde(rename = "N")]
    pub n: usize,
    pub tail_certified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralBound {
    /// `1/d`; the bound is `coefficient · e^{−I(t)} · ‖D(p*(0) − p**(0))‖`.
    pub coefficient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformBound {
    pub applicable: bool,
    /// `2 d*/d`, when `d* < ∞`.
    pub coefficient: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCoefficient {
    pub j: usize,
    /// `(d_0 + d_j)/W`.
    pub exact: f64,
    /// `R** (d_0 + d_j)/W`, multiplying `e^{−b** t}`.
    pub envelope_exact: Option<f64>,
    /// `R** d_j/W`: the form that omits the `d_0` term.
    pub envelope_without_d0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanBound {
    pub applicable: bool,
    #[serde(rename = "W")]
    pub w: f64,
    pub d0: f64,
    pub coefficients: Vec<MeanCoefficient>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Report {
    pub general: GeneralBound,
    pub uniform: UniformBound,
    pub mean: MeanBound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ergodicity {
    /// Divergence of `∫_0^∞ β**` is certified (positive period mean).
    pub certified: bool,
    pub basis: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summability {
    pub sum_b: f64,
    /// `Σ_k B_k`; `None` when divergent.
    pub sum_partial_tails: Option<f64>,
    /// `Σ_k k B_k`; `None` when divergent.
    pub sum_k_partial_tails: Option<f64>,
    /// `Σ_k d_k b_k`.
    pub sum_weighted_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaSample {
    pub t: f64,
    pub beta: f64,
    pub integral: f64,
    pub binding: Option<Binding>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightsInfo {
    pub description: String,
    #[serde(flatten)]
    pub constants: WeightConstants,
}

/// Serializable summary of every computed bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub beta_source: &'static str,
    pub b_star: f64,
    pub b_star_grid_delta: f64,
    pub b_double_star_mean: Option<f64>,
    #[serde(rename = "R_star_star")]
    pub r_star_star: Option<f64>,
    pub b_star_star: Option<f64>,
    pub envelope: Option<Envelope>,
    pub theorem1: Theorem1Report,
    pub theorem2: Option<f64>,
    pub discrepancies: Vec<Discrepancy>,
    pub truncation: TruncationInfo,
    pub period: Option<f64>,
    pub weights: WeightsInfo,
    pub ergodicity: Ergodicity,
    /// Output samples bound by each column (`"column 0"`, `"tail"`).
    pub binding_columns: BTreeMap<String, usize>,
    pub summability: Option<Summability>,
    /// First-principles `Σ_{k≥1} (d_k − 1) b_k` for level-jump models.
    pub series_coefficient: Option<f64>,
    pub undefined: Vec<String>,
    pub assumptions: Vec<String>,
    #[serde(skip)]
    pub samples: Vec<BetaSample>,
}

impl BoundReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    /// `t, β**(t), I(t), e^{−I(t)}/d` at the output grid.
    pub fn beta_csv(&self) -> String {
        let inv_d = self.theorem1.general.coefficient;
        csv(
            "t,beta_double_star,integral_beta,bound_20101",
            self.samples.iter().map(|s| [s.t, s.beta, s.integral, inv_d * (-s.integral).exp()]),
        )
    }

    /// Whether the positive-rate envelope, and hence the limiting-regime bound, exists.
    pub fn envelope_defined(&self) -> bool {
        self.envelope.is_some()
    }
}

/// Report plus the curve it was computed from.
#[derive(Debug, Clone)]
pub struct BoundAnalysis {
    pub report: BoundReport,
    pub curve: BetaCurve,
    pub first_principles: BetaDoubleStar,
    pub weights: WeightSequence,
}

/// Convergence bound curves evaluated on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Curves {
    pub integral: Vec<f64>,
    /// `e^{−I(t)}` (the weighted-norm contraction factor).
    pub contraction: Vec<f64>,
    pub general: Vec<f64>,
    pub uniform: Option<Vec<f64>>,
    pub mean: Option<Vec<f64>>,
}

impl BoundAnalysis {
    pub fn integral(&self, t: f64) -> Result<f64, BoundsError> {
        integrate_beta(&self.curve, 0.0, t)
    }

    /// Convergence bound curves for an initial pair with `‖D(p*(0) − p**(0))‖ =
    /// weighted_initial` and the mean comparison against state `j`.
    pub fn theorem1_curves(&self, grid: &[f64], weighted_initial: f64, j: usize) -> Result<Theorem1Curves, BoundsError> {
        let integral = cumulative_integral(&self.curve, grid)?;
        let contraction: Vec<f64> = integral.iter().map(|i| (-i).exp()).collect();
        let c = self.weights.constants();
        let general = contraction.iter().map(|e| e * weighted_initial / c.d).collect();
        let uniform = c.d_star.is_finite().then(|| contraction.iter().map(|e| 2.0 * c.d_star / c.d * e).collect());
        let mean = (c.w > 0.0).then(|| {
            let coef = (self.weights.d(0) + self.weights.d(j)) / c.w;
            contraction.iter().map(|e| coef * e).collect()
        });
        Ok(Theorem1Curves { integral, contraction, general, uniform, mean })
    }

    pub fn theorem2(&self) -> Result<f64, BoundsError> {
        self.report.theorem2.ok_or_else(|| {
            BoundsError::Undefined(
                self.report.undefined.first().cloned().unwrap_or_else(|| "no exponential envelope".into()),
            )
        })
    }
}

/// `R** d_0 b* / b**`.
pub fn theorem2_value(r_star_star: f64, d0: f64, b_star: f64, b_star_star: f64) -> Result<f64, BoundsError> {
    if !(r_star_star >= 1.0 && b_star_star > 0.0 && d0 > 0.0 && b_star.is_finite() && b_star >= 0.0) {
        return Err(BoundsError::Undefined(format!(
            "the limiting-regime bound needs R** >= 1, b** > 0, d0 > 0 and finite b* >= 0 (got {r_star_star}, {b_star_star}, {d0}, {b_star})"
        )));
    }
    let v = r_star_star * d0 * b_star / b_star_star;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(BoundsError::Undefined("common catastrophe rate is zero: the limiting-regime bound is vacuous".into()))
    }
}

fn mean_of(curve: &BetaCurve, period: f64) -> Result<f64, BoundsError> {
    Ok(integrate_beta(curve, 0.0, period)? / period)
}

const MEAN_STATES: [usize; 3] = [1, 5, 20];

pub fn compute_report(
    model: &QueueModel,
    weights: &WeightSequence,
    opts: &BoundOptions,
) -> Result<BoundAnalysis, BoundsError> {
    if !(opts.t_max > 0.0) || opts.grid < 2 {
        return Err(BoundsError::Undefined("output grid needs t_max > 0 and at least two points".into()));
    }
    let fp = BetaDoubleStar::new(model, weights, opts.n)?;
    let fp_curve = BetaCurve::FirstPrinciples(fp.clone());
    let curve = match &opts.beta_override {
        Some(f) => BetaCurve::Supplied(f.clone()),
        None => fp_curve.clone(),
    };
    let period = match &opts.beta_override {
        Some(f) => f.period().or_else(|| f.is_constant().then_some(1.0)),
        None => model.common_period(),
    };
    let consts = weights.constants();
    let mut undefined = Vec::new();

    let (b_star, b_star_grid_delta) = b_star_sup(model, period.unwrap_or(opts.t_max))?;

    let grid: Vec<f64> = (0..opts.grid).map(|k| opts.t_max * k as f64 / (opts.grid - 1) as f64).collect();
    let integrals = cumulative_integral(&curve, &grid)?;
    let mut samples = Vec::with_capacity(grid.len());
    let mut binding_columns = BTreeMap::new();
    for (t, integral) in grid.iter().zip(&integrals) {
        let (beta, binding) = match &curve {
            BetaCurve::FirstPrinciples(b) => {
                let e = b.eval(*t)?;
                (e.value, Some(e.binding))
            }
            BetaCurve::Supplied(f) => (f.value(*t), None),
        };
        if let Some(b) = binding {
            let key = match b {
                Binding::Column(j) => format!("column {j}"),
                Binding::Tail => "tail".to_string(),
            };
            *binding_columns.entry(key).or_insert(0) += 1;
        }
        samples.push(BetaSample { t: *t, beta, integral: *integral, binding });
    }

    let mut b_double_star_mean = None;
    let mut envelope = None;
    let ergodicity = match period {
        Some(p) => {
            let mean = mean_of(&curve, p)?;
            b_double_star_mean = Some(mean);
            match fit_envelope(&curve, p) {
                Ok(e) => envelope = Some(e),
                Err(BoundsError::NotExponentiallyErgodic { mean }) => undefined.push(format!(
                    "beta** has nonpositive period mean {mean}; no exponential envelope, so the limiting-regime bound is undefined"
                )),
                Err(e) => return Err(e),
            }
            Ergodicity { certified: mean > 1e-12, basis: format!("period mean of beta** over period {p}") }
        }
        None => {
            undefined.push("rates are not periodic with a common period; envelope not fitted".into());
            let last = *integrals.last().unwrap();
            let half = integrals[integrals.len() / 2];
            Ergodicity {
                certified: false,
                basis: format!(
                    "heuristic only: I(t_max) = {last:.6e}, growth over second half = {:.6e}",
                    last - half
                ),
            }
        }
    };

    let theorem2 = match &envelope {
        Some(e) => match theorem2_value(e.r_star_star, weights.d(0), b_star, e.b_star_star) {
            Ok(v) => Some(v),
            Err(err) => {
                undefined.push(err.to_string());
                None
            }
        },
        None => None,
    };

    let mean_coefficients = MEAN_STATES
        .iter()
        .map(|&j| {
            let exact = (weights.d(0) + weights.d(j)) / consts.w;
            MeanCoefficient {
                j,
                exact,
                envelope_exact: envelope.map(|e| e.r_star_star * exact),
                envelope_without_d0: envelope.map(|e| e.r_star_star * weights.d(j) / consts.w),
            }
        })
        .collect();
    let theorem1 = Theorem1Report {
        general: GeneralBound { coefficient: 1.0 / consts.d },
        uniform: UniformBound {
            applicable: consts.d_star.is_finite(),
            coefficient: consts.d_star.is_finite().then(|| 2.0 * consts.d_star / consts.d),
        },
        mean: MeanBound {
            applicable: consts.w > 0.0,
            w: consts.w,
            d0: weights.d(0),
            coefficients: if consts.w > 0.0 { mean_coefficients } else { vec![] },
        },
    };

    let series = if model.is_level_jump() { Some(series_coefficient(model, weights)?) } else { None };
    let summability = match model.summability() {
        Some((sum_b, sbk, skbk)) => Some(Summability {
            sum_b,
            sum_partial_tails: sbk,
            sum_k_partial_tails: skbk,
            sum_weighted_b: super::weighted_arrival_tail(model, weights, 1)?,
        }),
        None => None,
    };

    let mut assumptions = vec!["beta_* is the infimum of the catastrophe rates over states i >= 1".to_string()];
    if !fp.tail_certified() {
        assumptions.push(format!(
            "truncated infimum: beta** validity is not certified beyond column N = {}",
            opts.n
        ));
    }
    if let Some(s) = &summability {
        if s.sum_k_partial_tails.is_none() {
            assumptions.push(
                "advisory: sum_k k B_k diverges for this b sequence; sum_k b_k and sum_k d_k b_k are finite".into(),
            );
        }
    }
    if let Some(w) = model.truncation_warning(opts.n) {
        assumptions.push(w);
    }

    let mut report = BoundReport {
        beta_source: if curve.is_supplied() { "supplied" } else { "first_principles" },
        b_star,
        b_star_grid_delta,
        b_double_star_mean,
        r_star_star: envelope.map(|e| e.r_star_star),
        b_star_star: envelope.map(|e| e.b_star_star),
        envelope,
        theorem1,
        theorem2,
        discrepancies: vec![],
        truncation: TruncationInfo { n: opts.n, tail_certified: fp.tail_certified() },
        period,
        weights: WeightsInfo { description: weights.describe(), constants: consts },
        ergodicity,
        binding_columns,
        summability,
        series_coefficient: series,
        undefined,
        assumptions,
        samples,
    };
    if let Some(claims) = &opts.claims {
        report.discrepancies = discrepancies(model, weights, &fp_curve, period, b_star, series, claims)?;
    }
    Ok(BoundAnalysis { report, curve, first_principles: fp, weights: weights.clone() })
}

fn discrepancies(
    model: &QueueModel,
    weights: &WeightSequence,
    fp_curve: &BetaCurve,
    period: Option<f64>,
    b_star: f64,
    series: Option<f64>,
    claims: &ClaimedConstants,
) -> Result<Vec<Discrepancy>, BoundsError> {
    let mut out = Vec::new();
    let horizon = period.unwrap_or(1.0);
    let fp_mean = mean_of(fp_curve, horizon)?;
    let fp_env = fit_envelope(fp_curve, horizon).ok();
    let fp_theorem2 = fp_env.and_then(|e| theorem2_value(e.r_star_star, weights.d(0), b_star, e.b_star_star).ok());

    if let (Some(claimed), Some(computed)) = (claims.series_coefficient, series) {
        out.push(Discrepancy {
            quantity: "series_coefficient".into(),
            claimed,
            first_principles: Some(computed),
            consistent: (claimed - computed).abs() <= 1e-9,
            note: "sum_{k>=1} (d_k - 1) b_k".into(),
        });
    }
    let mut claimed_env = None;
    if let Some(f) = &claims.beta_double_star {
        let claimed_curve = BetaCurve::Supplied(f.clone());
        let mut max_diff: f64 = 0.0;
        for k in 0..=ENVELOPE_GRID {
            let t = horizon * k as f64 / ENVELOPE_GRID as f64;
            max_diff = max_diff.max((f.value(t) - fp_curve.value(t)?).abs());
        }
        out.push(Discrepancy {
            quantity: "beta_double_star".into(),
            claimed: mean_of(&claimed_curve, horizon)?,
            first_principles: Some(fp_mean),
            consistent: max_diff <= 1e-9,
            note: format!("period means compared; max |claimed - first principles| over the period = {max_diff:.6e}"),
        });
        claimed_env = fit_envelope(&claimed_curve, horizon).ok();
    }
    let no_env = "first-principles beta** has nonpositive period mean; no envelope";
    if let Some(claimed) = claims.r_star_star {
        if let Some(e) = claimed_env {
            out.push(Discrepancy {
                quantity: "R_star_star (claimed beta**)".into(),
                claimed,
                first_principles: Some(e.r_star_star),
                consistent: e.r_star_star <= claimed + 1e-12,
                note: "envelope fitted to the claimed beta** curve".into(),
            });
        }
        out.push(Discrepancy {
            quantity: "R_star_star".into(),
            claimed,
            first_principles: fp_env.map(|e| e.r_star_star),
            consistent: fp_env.is_some_and(|e| e.r_star_star <= claimed + 1e-12),
            note: if fp_env.is_some() { "claimed value must bound the fitted one".into() } else { no_env.into() },
        });
    }
    if let Some(claimed) = claims.b_star_star {
        out.push(Discrepancy {
            quantity: "b_star_star".into(),
            claimed,
            first_principles: Some(fp_mean),
            consistent: fp_env.is_some() && (claimed - fp_mean).abs() <= 1e-9,
            note: "period mean of beta**".into(),
        });
    }
    if let Some(claimed) = claims.b_star {
        out.push(Discrepancy {
            quantity: "b_star".into(),
            claimed,
            first_principles: Some(b_star),
            consistent: claimed >= b_star - 1e-12,
            note: if claimed > b_star + 1e-12 {
                "claimed value is a valid but looser bound on sup beta_*".into()
            } else {
                "sup over the period of beta_*".into()
            },
        });
    }
    if let Some(claimed) = claims.theorem2 {
        out.push(Discrepancy {
            quantity: "theorem2".into(),
            claimed,
            first_principles: fp_theorem2,
            consistent: fp_theorem2.is_some_and(|v| v <= claimed + 1e-12),
            note: if fp_theorem2.is_some() {
                "R** d0 b* / b** from first-principles constants".into()
            } else {
                no_env.into()
            },
        });
    }
    if let (Some(mc), Some(r)) = (claims.mean_bound, claims.r_star_star) {
        let c = weights.constants();
        if c.w > 0.0 {
            for j in MEAN_STATES {
                let claimed = mc.intercept + mc.slope * j as f64;
                let exact = r * (weights.d(0) + weights.d(j)) / c.w;
                out.push(Discrepancy {
                    quantity: format!("mean_bound_coefficient_j{j}"),
                    claimed,
                    first_principles: Some(exact),
                    consistent: (claimed - exact).abs() <= 1e-9,
                    note: format!(
                        "exact R**(d0 + d_j)/W with the claimed R**; the claimed form equals R** d_j/W = {}",
                        r * weights.d(j) / c.w
                    ),
                });
            }
        }
    }
    let _ = model;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::examples;
    use std::f64::consts::PI;

    fn stated_claims() -> ClaimedConstants {
        ClaimedConstants {
            series_coefficient: Some(0.5),
            beta_double_star: Some(TimeFunction::harmonic(1.0, 1.0, 2.0, 0.0).unwrap()),
            r_star_star: Some(2.0),
            b_star_star: Some(1.0),
            b_star: Some(4.0),
            theorem2: Some(8.0),
            mean_bound: Some(MeanClaim { intercept: 2.0, slope: 2.0 }),
        }
    }

    #[test]
    fn theorem2_examples() {
        assert_eq!(theorem2_value(2.0, 1.0, 4.0, 1.0).unwrap(), 8.0);
        let derived = theorem2_value((2.0 / PI).exp(), 1.0, 2.0, 1.0).unwrap();
        assert!((derived - 2.0 * (2.0 / PI).exp()).abs() < 1e-15);
        assert_eq!(theorem2_value(1.0, 1.0, 0.5, 0.5).unwrap(), 1.0);
        assert!(theorem2_value(1.0, 1.0, 0.0, 0.5).is_err());
        assert!(theorem2_value(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn corrected_example_report() {
        let m = examples::corrected_model(examples::default_mu());
        let a = compute_report(&m, &WeightSequence::linear(), &BoundOptions::default()).unwrap();
        let r = &a.report;
        assert!((r.b_star_star.unwrap() - 1.0).abs() < 1e-9);
        assert!((r.r_star_star.unwrap() - (1.0 / PI).exp()).abs() < 1e-8);
        assert_eq!(r.b_star, 2.0);
        assert!((r.theorem2.unwrap() - 2.0 * (1.0 / PI).exp()).abs() < 1e-7);
        assert!(r.truncation.tail_certified);
        assert!(r.ergodicity.certified);
        assert!(!r.theorem1.uniform.applicable);
        assert_eq!(r.theorem1.general.coefficient, 1.0);
        assert_eq!(r.theorem1.mean.coefficients[1].exact, 7.0);
        assert!(r.discrepancies.is_empty());
        assert_eq!(r.binding_columns.get("column 0"), Some(&201));
        let csv = r.beta_csv();
        assert_eq!(csv.lines().count(), 202);
        assert!(csv.starts_with("t,beta_double_star,integral_beta,bound_20101\n"));
    }

    #[test]
    fn original_example_report_flags_discrepancies() {
        let m = examples::original_model(examples::default_mu());
        let opts = BoundOptions { claims: Some(stated_claims()), ..Default::default() };
        let a = compute_report(&m, &WeightSequence::linear(), &opts).unwrap();
        let r = &a.report;
        assert!(r.envelope.is_none());
        assert!(r.theorem2.is_none());
        assert!((r.b_double_star_mean.unwrap() + 2.0).abs() < 1e-9);
        let find = |q: &str| r.discrepancies.iter().find(|d| d.quantity == q).unwrap();
        let s = find("series_coefficient");
        assert!(!s.consistent);
        assert!((s.first_principles.unwrap() - 2.0).abs() < 1e-15);
        assert!(!find("beta_double_star").consistent);
        let rc = find("R_star_star (claimed beta**)");
        assert!(rc.consistent);
        assert!((rc.first_principles.unwrap() - (2.0 / PI).exp()).abs() < 1e-12);
        assert!(find("b_star").consistent);
        assert!(!find("theorem2").consistent);
        assert!(!find("mean_bound_coefficient_j5").consistent);
        let json = r.to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["b_star", "b_double_star_mean", "R_star_star", "b_star_star", "theorem1", "theorem2", "discrepancies", "truncation"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["truncation"]["tail_certified"], serde_json::Value::Bool(true));
        assert_eq!(v["weights"]["d_star"], serde_json::Value::String("inf".into()));
    }

    #[test]
    fn supplied_curve_and_curves() {
        let m = examples::corrected_model(examples::default_mu());
        let opts = BoundOptions {
            beta_override: Some(TimeFunction::constant(0.5)),
            ..Default::default()
        };
        let a = compute_report(&m, &WeightSequence::constant_one(), &opts).unwrap();
        assert_eq!(a.report.beta_source, "supplied");
        assert!((a.report.r_star_star.unwrap() - 1.0).abs() < 1e-12);
        let grid = [0.0, 1.0, 2.0];
        let c = a.theorem1_curves(&grid, 2.0, 3).unwrap();
        assert!((c.general[2] - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        // Constant-one weights: uniform bound 2e^{-ct}, no mean bound (W = 0).
        assert!((c.uniform.as_ref().unwrap()[1] - 2.0 * (-0.5f64).exp()).abs() < 1e-15);
        assert!(c.mean.is_none());
    }

    #[test]
    fn zero_model_has_no_envelope() {
        use crate::model::{Arrivals, Catastrophes, Services};
        let m = QueueModel::new(Arrivals::General(vec![]), Services::None, Catastrophes::none()).unwrap();
        let a = compute_report(&m, &WeightSequence::linear(), &BoundOptions { n: 5, ..Default::default() }).unwrap();
        assert!(a.report.samples.iter().all(|s| s.beta == 0.0));
        assert!(!a.report.envelope_defined());
        assert!(a.theorem2().is_err());
    }
}

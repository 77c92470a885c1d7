//! Positive weight sequences `{d_k}` defining the weighted l1 norm.

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Rule for `d_k` beyond an explicit prefix: `d_k = intercept + slope·k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightTail {
    Affine { intercept: f64, slope: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum WeightSpec {
    ConstantOne,
    Linear,
    Geometric { rho: f64 },
    Explicit { prefix: Vec<f64>, tail: WeightTail },
}

/// A weight sequence with a closed-form tail, so infima and suprema over all
/// `k` are exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightSpec", into = "WeightSpec")]
pub struct WeightSequence(WeightSpec);

/// `d = inf d_k`, `d* = sup d_k` (possibly infinite), `W = inf_{i≥1} d_i / i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightConstants {
    pub d: f64,
    #[serde(serialize_with = "crate::io::ser_extended")]
    pub d_star: f64,
    pub w: f64,
}

impl TryFrom<WeightSpec> for WeightSequence {
    type Error = ModelError;

    fn try_from(spec: WeightSpec) -> Result<Self, ModelError> {
        let invalid = |m: String| Err(ModelError::InvalidWeights(m));
        match &spec {
            WeightSpec::ConstantOne | WeightSpec::Linear => {}
            WeightSpec::Geometric { rho } => {
                if !(rho.is_finite() && *rho > 1.0) {
                    return invalid(format!("geometric weights need rho > 1, got {rho}"));
                }
            }
            WeightSpec::Explicit { prefix, tail: WeightTail::Affine { intercept, slope } } => {
                if prefix.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                    return invalid("explicit weights must be positive and finite".into());
                }
                if !(slope.is_finite() && *slope >= 0.0 && intercept.is_finite()) {
                    return invalid("affine weight tail needs a finite nonnegative slope".into());
                }
                let first = intercept + slope * prefix.len() as f64;
                if !(first > 0.0) {
                    return invalid(format!(
                        "affine weight tail is not positive at k = {}: inf d_k = 0",
                        prefix.len()
                    ));
                }
            }
        }
        Ok(WeightSequence(spec))
    }
}

impl From<WeightSequence> for WeightSpec {
    fn from(w: WeightSequence) -> Self {
        w.0
    }
}

impl WeightSequence {
    pub fn constant_one() -> Self {
        WeightSequence(WeightSpec::ConstantOne)
    }

    /// `d_0 = 1`, `d_k = k + 1`.
    pub fn linear() -> Self {
        WeightSequence(WeightSpec::Linear)
    }

    pub fn geometric(rho: f64) -> Result<Self, ModelError> {
        WeightSpec::Geometric { rho }.try_into()
    }

    pub fn explicit(prefix: Vec<f64>, intercept: f64, slope: f64) -> Result<Self, ModelError> {
        WeightSpec::Explicit { prefix, tail: WeightTail::Affine { intercept, slope } }.try_into()
    }

    /// Parses the command-line form `linear | one | geometric:RHO`.
    pub fn parse_named(s: &str) -> Result<Self, ModelError> {
        match s {
            "linear" => Ok(Self::linear()),
            "one" | "constant_one" => Ok(Self::constant_one()),
            _ => match s.strip_prefix("geometric:") {
                Some(rho) => {
                    let rho: f64 = rho
                        .parse()
                        .map_err(|_| ModelError::InvalidWeights(format!("bad geometric ratio '{rho}'")))?;
                    Self::geometric(rho)
                }
                None => Err(ModelError::InvalidWeights(format!("unknown weight family '{s}'"))),
            },
        }
    }

    pub fn d(&self, k: usize) -> f64 {
        match &self.0 {
            WeightSpec::ConstantOne => 1.0,
            WeightSpec::Linear => k as f64 + 1.0,
            WeightSpec::Geometric { rho } => rho.powi(k as i32),
            WeightSpec::Explicit { prefix, tail: WeightTail::Affine { intercept, slope } } => {
                prefix.get(k).copied().unwrap_or_else(|| intercept + slope * k as f64)
            }
        }
    }

    pub fn constants(&self) -> WeightConstants {
        match &self.0 {
            WeightSpec::ConstantOne => WeightConstants { d: 1.0, d_star: 1.0, w: 0.0 },
            WeightSpec::Linear => WeightConstants { d: 1.0, d_star: f64::INFINITY, w: 1.0 },
            WeightSpec::Geometric { rho } => {
                // rho^i / i is convex in i with its real minimiser at 1/ln(rho).
                let x = 1.0 / rho.ln();
                let lo = (x.floor() as usize).max(1);
                let w = [lo, lo + 1]
                    .iter()
                    .map(|&i| rho.powi(i as i32) / i as f64)
                    .fold(f64::INFINITY, f64::min);
                WeightConstants { d: 1.0, d_star: f64::INFINITY, w }
            }
            WeightSpec::Explicit { prefix, tail: WeightTail::Affine { intercept, slope } } => {
                let p = prefix.len();
                let tail_first = intercept + slope * p as f64;
                let prefix_min = prefix.iter().copied().fold(f64::INFINITY, f64::min);
                let prefix_max = prefix.iter().copied().fold(0.0, f64::max);
                let d = prefix_min.min(tail_first);
                let d_star = if *slope > 0.0 { f64::INFINITY } else { prefix_max.max(tail_first) };
                let mut w = prefix
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(i, d)| d / i as f64)
                    .fold(f64::INFINITY, f64::min);
                // (a + s i)/i = s + a/i over i >= max(p, 1).
                let start = p.max(1) as f64;
                let tail_inf = if *intercept >= 0.0 { *slope } else { slope + intercept / start };
                w = w.min(tail_inf);
                WeightConstants { d, d_star, w }
            }
        }
    }

    /// True when `d_k ≤ d_{k+1}` for every `k ≥ n`.
    pub fn nondecreasing_from(&self, n: usize) -> bool {
        match &self.0 {
            WeightSpec::ConstantOne | WeightSpec::Linear | WeightSpec::Geometric { .. } => true,
            WeightSpec::Explicit { prefix, tail: WeightTail::Affine { .. } } => {
                // Tail is nondecreasing; check the prefix from n and the seam.
                (n..=prefix.len()).all(|k| self.d(k) <= self.d(k + 1))
            }
        }
    }

    /// `inf_{k > n} d_k`.
    pub fn inf_beyond(&self, n: usize) -> f64 {
        match &self.0 {
            WeightSpec::ConstantOne => 1.0,
            WeightSpec::Linear | WeightSpec::Geometric { .. } => self.d(n + 1),
            WeightSpec::Explicit { prefix, .. } => {
                let mut m = self.d(prefix.len().max(n + 1));
                for k in n + 1..prefix.len() {
                    m = m.min(prefix[k]);
                }
                m
            }
        }
    }

    /// `(prefix, intercept, slope)` such that `d_k = prefix[k]` for
    /// `k < prefix.len()` and `intercept + slope·k` beyond; `None` for
    /// geometric weights.
    pub(crate) fn affine_form(&self) -> Option<(&[f64], f64, f64)> {
        match &self.0 {
            WeightSpec::ConstantOne => Some((&[], 1.0, 0.0)),
            WeightSpec::Linear => Some((&[], 1.0, 1.0)),
            WeightSpec::Geometric { .. } => None,
            WeightSpec::Explicit { prefix, tail: WeightTail::Affine { intercept, slope } } => {
                Some((prefix, *intercept, *slope))
            }
        }
    }

    pub fn describe(&self) -> String {
        match &self.0 {
            WeightSpec::ConstantOne => "one".into(),
            WeightSpec::Linear => "linear".into(),
            WeightSpec::Geometric { rho } => format!("geometric:{rho}"),
            WeightSpec::Explicit { prefix, tail: WeightTail::Affine { intercept, slope } } => {
                format!("explicit(prefix {}, tail {intercept} + {slope} k)", prefix.len())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force `(inf d_k, sup d_k, inf d_i/i)` over `k ≤ n`.
    fn scan(w: &WeightSequence, n: usize) -> (f64, f64, f64) {
        let mut d = f64::INFINITY;
        let mut d_star: f64 = 0.0;
        let mut ww = f64::INFINITY;
        for k in 0..=n {
            let dk = w.d(k);
            d = d.min(dk);
            d_star = d_star.max(dk);
            if k >= 1 {
                ww = ww.min(dk / k as f64);
            }
        }
        (d, d_star, ww)
    }

    #[test]
    fn named_family_constants() {
        let c = WeightSequence::linear().constants();
        assert_eq!((c.d, c.d_star, c.w), (1.0, f64::INFINITY, 1.0));
        let c = WeightSequence::constant_one().constants();
        assert_eq!((c.d, c.d_star, c.w), (1.0, 1.0, 0.0));
        let c = WeightSequence::geometric(2.0).unwrap().constants();
        assert_eq!((c.d, c.d_star, c.w), (1.0, f64::INFINITY, 2.0));
    }

    #[test]
    fn constants_agree_with_scans() {
        // Linear: W is a limit, so the scan brackets it from above.
        let (d, _, w) = scan(&WeightSequence::linear(), 100_000);
        assert_eq!(d, 1.0);
        assert!(w >= 1.0 && w - 1.0 < 1e-4);
        let (_, _, w) = scan(&WeightSequence::geometric(2.0).unwrap(), 100);
        assert_eq!(w, 2.0);
        for rho in [1.05, 1.3, 1.9, 3.0] {
            let g = WeightSequence::geometric(rho).unwrap();
            let (_, _, w) = scan(&g, 300);
            assert!((g.constants().w - w).abs() < 1e-12, "rho {rho}");
        }
        let e = WeightSequence::explicit(vec![2.0, 0.5, 3.0], 1.0, 0.5).unwrap();
        let (d, _, w) = scan(&e, 100_000);
        let c = e.constants();
        assert_eq!(c.d, d);
        assert_eq!(c.d_star, f64::INFINITY);
        assert!(c.w <= w && w - c.w < 1e-4);
        let flat = WeightSequence::explicit(vec![2.0, 4.0], 3.0, 0.0).unwrap();
        let c = flat.constants();
        assert_eq!((c.d, c.d_star), (2.0, 4.0));
        assert_eq!(c.w, 0.0);
    }

    #[test]
    fn zero_infimum_rejected() {
        assert!(WeightSequence::explicit(vec![1.0], 0.0, 0.0).is_err());
        assert!(WeightSequence::explicit(vec![1.0, -1.0], 1.0, 0.0).is_err());
        assert!(WeightSequence::geometric(1.0).is_err());
    }

    #[test]
    fn parse_named_forms() {
        assert_eq!(WeightSequence::parse_named("linear").unwrap(), WeightSequence::linear());
        assert_eq!(WeightSequence::parse_named("one").unwrap(), WeightSequence::constant_one());
        assert_eq!(WeightSequence::parse_named("geometric:1.5").unwrap().d(2), 2.25);
        assert!(WeightSequence::parse_named("geometric:x").is_err());
        assert!(WeightSequence::parse_named("quadratic").is_err());
    }

    #[test]
    fn monotonicity_helpers() {
        let e = WeightSequence::explicit(vec![5.0, 1.0, 2.0], 0.0, 1.0).unwrap();
        assert!(!e.nondecreasing_from(0));
        assert!(e.nondecreasing_from(1));
        assert_eq!(e.inf_beyond(0), 1.0);
        assert_eq!(e.inf_beyond(1), 2.0);
        assert_eq!(WeightSequence::linear().inf_beyond(4), 6.0);
    }
}

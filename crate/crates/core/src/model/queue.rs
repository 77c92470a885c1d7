//! Queue-length process specification: arrivals, services and catastrophes.

use serde::{Deserialize, Serialize};

use super::{ModelError, TimeFunction};

/// `b_k` for the level-jump family (`k ≥ 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BSequence {
    /// `b_k = 4 / (k (k+1) (k+2))`, summing to one.
    CubicTelescoping,
    /// `b_1, b_2, …` listed; zero beyond the list.
    Explicit { values: Vec<f64> },
}

/// A single elementwise transition `from → from ± size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub from: usize,
    pub size: usize,
    pub rate: TimeFunction,
}

/// Behaviour of `β_k(t)` beyond the explicit prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum CatastropheTail {
    /// `β_k = rate(t)` for every tail state.
    Constant { rate: TimeFunction },
    /// `β_k = base(t) + amplitude(t) / k`; nonincreasing in `k`, infimum `base(t)`.
    Harmonic { base: TimeFunction, amplitude: TimeFunction },
    Zero,
}

/// Catastrophe intensities `β_k(t)`, `k ≥ 1`: `prefix[k-1]` for listed
/// states, then the tail rule. Without a tail rule the last prefix entry
/// repeats, which is only accepted where the prefix is nonincreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catastrophes {
    #[serde(default)]
    pub prefix: Vec<TimeFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<CatastropheTail>,
}

impl Catastrophes {
    pub fn none() -> Self {
        Catastrophes { prefix: vec![], tail: Some(CatastropheTail::Zero) }
    }

    pub fn constant(rate: TimeFunction) -> Self {
        Catastrophes { prefix: vec![], tail: Some(CatastropheTail::Constant { rate }) }
    }

    pub fn harmonic(base: TimeFunction, amplitude: TimeFunction) -> Self {
        Catastrophes { prefix: vec![], tail: Some(CatastropheTail::Harmonic { base, amplitude }) }
    }

    fn functions(&self) -> Vec<(String, &TimeFunction)> {
        let mut out: Vec<(String, &TimeFunction)> =
            self.prefix.iter().enumerate().map(|(i, f)| (format!("gamma[{}]", i + 1), f)).collect();
        match &self.tail {
            Some(CatastropheTail::Constant { rate }) => out.push(("gamma.tail.rate".into(), rate)),
            Some(CatastropheTail::Harmonic { base, amplitude }) => {
                out.push(("gamma.tail.base".into(), base));
                out.push(("gamma.tail.amplitude".into(), amplitude));
            }
            Some(CatastropheTail::Zero) | None => {}
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arrivals {
    /// Jump `j → i` (`i > j`) at rate `λ(t) · b_i`.
    LevelJump { lambda: TimeFunction, b: BSequence },
    /// `λ_{i,i+k}(t)` listed per `(from, size)`.
    General(Vec<Transition>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Services {
    None,
    /// One-step service `j → j-1` at rate `μ(t)` for `j ≥ 1`.
    SingleServer { mu: TimeFunction },
    /// `μ_{i,i-k}(t)` listed per `(from, size)`.
    General(Vec<Transition>),
}

/// Wire form of [`QueueModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueueModelSpec {
    family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<TimeFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<BSequence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arrivals: Option<Vec<Transition>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu: Option<TimeFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    services: Option<Vec<Transition>>,
    gamma: Catastrophes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Family {
    LevelJump,
    General,
}

/// Validated intensity specification of the queue-length process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QueueModelSpec", into = "QueueModelSpec")]
pub struct QueueModel {
    arrivals: Arrivals,
    services: Services,
    catastrophes: Catastrophes,
    /// `B_k` for explicit `b` lists, indexed by `k - 1`.
    b_suffix: Vec<f64>,
}

impl TryFrom<QueueModelSpec> for QueueModel {
    type Error = ModelError;

    fn try_from(s: QueueModelSpec) -> Result<Self, ModelError> {
        let invalid = |m: &str| Err(ModelError::Invalid(m.to_string()));
        let arrivals = match s.family {
            Family::LevelJump => {
                if s.arrivals.is_some() {
                    return invalid("level_jump family takes `lambda` and `b`, not `arrivals`");
                }
                match (s.lambda, s.b) {
                    (Some(lambda), Some(b)) => Arrivals::LevelJump { lambda, b },
                    _ => return invalid("level_jump family requires `lambda` and `b`"),
                }
            }
            Family::General => {
                if s.lambda.is_some() || s.b.is_some() {
                    return invalid("general family takes `arrivals`, not `lambda`/`b`");
                }
                Arrivals::General(s.arrivals.unwrap_or_default())
            }
        };
        let services = match (s.mu, s.services) {
            (Some(_), Some(_)) => return invalid("give either `mu` or `services`, not both"),
            (Some(mu), None) => Services::SingleServer { mu },
            (None, Some(list)) => Services::General(list),
            (None, None) => Services::None,
        };
        QueueModel::new(arrivals, services, s.gamma)
    }
}

impl From<QueueModel> for QueueModelSpec {
    fn from(m: QueueModel) -> Self {
        let (family, lambda, b, arrivals) = match m.arrivals {
            Arrivals::LevelJump { lambda, b } => (Family::LevelJump, Some(lambda), Some(b), None),
            Arrivals::General(list) => (Family::General, None, None, Some(list)),
        };
        let (mu, services) = match m.services {
            Services::None => (None, None),
            Services::SingleServer { mu } => (Some(mu), None),
            Services::General(list) => (None, Some(list)),
        };
        QueueModelSpec { family, lambda, b, arrivals, mu, services, gamma: m.catastrophes }
    }
}

/// Exact `b_k = 4/(k(k+1)(k+2))`.
fn cubic_b(k: usize) -> f64 {
    let k = k as f64;
    4.0 / (k * (k + 1.0) * (k + 2.0))
}

/// Exact `B_k = Σ_{i≥k} 4/(i(i+1)(i+2)) = 2/(k(k+1))`.
fn cubic_tail(k: usize) -> f64 {
    let k = k as f64;
    2.0 / (k * (k + 1.0))
}

impl QueueModel {
    pub fn new(arrivals: Arrivals, services: Services, catastrophes: Catastrophes) -> Result<Self, ModelError> {
        let mut b_suffix = Vec::new();
        match &arrivals {
            Arrivals::LevelJump { lambda, b } => {
                lambda.check_nonnegative("lambda")?;
                if let BSequence::Explicit { values } = b {
                    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                        return Err(ModelError::Invalid("b_k must be finite and nonnegative".into()));
                    }
                    b_suffix = vec![0.0; values.len()];
                    let mut acc = 0.0;
                    for i in (0..values.len()).rev() {
                        acc += values[i];
                        b_suffix[i] = acc;
                    }
                }
            }
            Arrivals::General(list) => {
                for tr in list {
                    if tr.size == 0 {
                        return Err(ModelError::Invalid(format!("arrival from {} has size 0", tr.from)));
                    }
                    tr.rate.check_nonnegative(&format!("lambda[{},{}]", tr.from, tr.from + tr.size))?;
                }
            }
        }
        match &services {
            Services::None => {}
            Services::SingleServer { mu } => mu.check_nonnegative("mu")?,
            Services::General(list) => {
                for tr in list {
                    if tr.size == 0 || tr.size > tr.from {
                        return Err(ModelError::Invalid(format!(
                            "service from {} of size {} is out of range",
                            tr.from, tr.size
                        )));
                    }
                    tr.rate.check_nonnegative(&format!("mu[{},{}]", tr.from, tr.from - tr.size))?;
                }
            }
        }
        for (name, f) in catastrophes.functions() {
            f.check_nonnegative(&name)?;
        }
        if catastrophes.prefix.is_empty() && catastrophes.tail.is_none() {
            return Err(ModelError::Invalid("catastrophes need a prefix or a tail rule".into()));
        }
        Ok(QueueModel { arrivals, services, catastrophes, b_suffix })
    }

    /// Level-jump arrivals with single-server service.
    pub fn level_jump(
        lambda: TimeFunction,
        b: BSequence,
        mu: TimeFunction,
        catastrophes: Catastrophes,
    ) -> Result<Self, ModelError> {
        Self::new(Arrivals::LevelJump { lambda, b }, Services::SingleServer { mu }, catastrophes)
    }

    pub fn arrivals(&self) -> &Arrivals {
        &self.arrivals
    }

    pub fn services(&self) -> &Services {
        &self.services
    }

    pub fn catastrophes(&self) -> &Catastrophes {
        &self.catastrophes
    }

    pub fn is_level_jump(&self) -> bool {
        matches!(self.arrivals, Arrivals::LevelJump { .. })
    }

    /// Every time function in the model, with a descriptive name.
    pub fn functions(&self) -> Vec<(String, &TimeFunction)> {
        let mut out = Vec::new();
        match &self.arrivals {
            Arrivals::LevelJump { lambda, .. } => out.push(("lambda".to_string(), lambda)),
            Arrivals::General(list) => {
                for tr in list {
                    out.push((format!("lambda[{},{}]", tr.from, tr.from + tr.size), &tr.rate));
                }
            }
        }
        match &self.services {
            Services::None => {}
            Services::SingleServer { mu } => out.push(("mu".to_string(), mu)),
            Services::General(list) => {
                for tr in list {
                    out.push((format!("mu[{},{}]", tr.from, tr.from - tr.size), &tr.rate));
                }
            }
        }
        out.extend(self.catastrophes.functions());
        out
    }

    /// Common period of all time functions: every periodic function must
    /// declare the same period and every other one must be constant.
    pub fn common_period(&self) -> Option<f64> {
        let mut period: Option<f64> = None;
        for (_, f) in self.functions() {
            match f.period() {
                Some(p) => match period {
                    None => period = Some(p),
                    Some(q) if (p - q).abs() <= 1e-12 * q => {}
                    Some(_) => return None,
                },
                None if f.is_constant() => {}
                None => return None,
            }
        }
        Some(period.unwrap_or(1.0))
    }

    /// `b_k` (level-jump family only).
    pub fn b(&self, k: usize) -> Result<f64, ModelError> {
        match &self.arrivals {
            Arrivals::LevelJump { b, .. } => Ok(if k == 0 {
                0.0
            } else {
                match b {
                    BSequence::CubicTelescoping => cubic_b(k),
                    BSequence::Explicit { values } => values.get(k - 1).copied().unwrap_or(0.0),
                }
            }),
            Arrivals::General(_) => Err(ModelError::UnsupportedFamily("b_k requires the level_jump family".into())),
        }
    }

    /// `B_k = Σ_{i≥k} b_i` for `k ≥ 1`.
    pub fn b_partial_tail(&self, k: usize) -> Result<f64, ModelError> {
        if k == 0 {
            return Err(ModelError::Invalid("B_k is defined for k >= 1".into()));
        }
        match &self.arrivals {
            Arrivals::LevelJump { b: BSequence::CubicTelescoping, .. } => Ok(cubic_tail(k)),
            Arrivals::LevelJump { b: BSequence::Explicit { .. }, .. } => {
                Ok(self.b_suffix.get(k - 1).copied().unwrap_or(0.0))
            }
            Arrivals::General(_) => {
                Err(ModelError::UnsupportedFamily("B_k requires the level_jump family".into()))
            }
        }
    }

    /// Largest state index with a listed (non-catastrophe) transition out of
    /// it; `None` for the level-jump family, where every state has arrivals.
    pub fn max_listed_source(&self) -> Option<usize> {
        let arr = match &self.arrivals {
            Arrivals::LevelJump { .. } => return None,
            Arrivals::General(list) => list.iter().map(|t| t.from).max().unwrap_or(0),
        };
        let srv = match &self.services {
            Services::None => 0,
            Services::SingleServer { .. } => return None,
            Services::General(list) => list.iter().map(|t| t.from).max().unwrap_or(0),
        };
        Some(arr.max(srv))
    }

    /// `β_k(t)` for `k ≥ 1`.
    pub fn catastrophe_rate(&self, k: usize, t: f64) -> Result<f64, ModelError> {
        debug_assert!(k >= 1);
        let c = &self.catastrophes;
        if k <= c.prefix.len() {
            return c.prefix[k - 1].eval_named(&format!("gamma[{k}]"), t);
        }
        match &c.tail {
            Some(CatastropheTail::Constant { rate }) => rate.eval_named("gamma.tail.rate", t),
            Some(CatastropheTail::Harmonic { base, amplitude }) => Ok(base.eval_named("gamma.tail.base", t)?
                + amplitude.eval_named("gamma.tail.amplitude", t)? / k as f64),
            Some(CatastropheTail::Zero) => Ok(0.0),
            None => c.prefix.last().unwrap().eval_named(&format!("gamma[{}]", c.prefix.len()), t),
        }
    }

    /// `β_*(t) = inf_{i≥1} β_i(t)`, exact over the infinite state space.
    pub fn beta_star(&self, t: f64) -> Result<f64, ModelError> {
        let c = &self.catastrophes;
        let mut inf = f64::INFINITY;
        let mut prev = f64::INFINITY;
        let mut monotone = true;
        for k in 1..=c.prefix.len() {
            let v = self.catastrophe_rate(k, t)?;
            monotone &= v <= prev;
            prev = v;
            inf = inf.min(v);
        }
        let tail_inf = match &c.tail {
            Some(CatastropheTail::Constant { rate }) => rate.eval_named("gamma.tail.rate", t)?,
            Some(CatastropheTail::Harmonic { base, .. }) => base.eval_named("gamma.tail.base", t)?,
            Some(CatastropheTail::Zero) => 0.0,
            None => {
                if !monotone {
                    return Err(ModelError::TailInfimumRequired { t });
                }
                prev
            }
        };
        Ok(inf.min(tail_inf))
    }

    /// Certified `sup_{[a,b]} β_k`.
    pub fn catastrophe_sup(&self, k: usize, a: f64, b: f64) -> f64 {
        let c = &self.catastrophes;
        if k <= c.prefix.len() {
            return c.prefix[k - 1].sup_on(a, b);
        }
        match &c.tail {
            Some(CatastropheTail::Constant { rate }) => rate.sup_on(a, b),
            Some(CatastropheTail::Harmonic { base, amplitude }) => {
                base.sup_on(a, b) + amplitude.sup_on(a, b) / k as f64
            }
            Some(CatastropheTail::Zero) => 0.0,
            None => c.prefix.last().unwrap().sup_on(a, b),
        }
    }

    /// Total outflow rate of state `j` at time `t` over the infinite state space.
    pub fn total_outflow(&self, j: usize, t: f64) -> Result<f64, ModelError> {
        let mut r = 0.0;
        match &self.arrivals {
            Arrivals::LevelJump { lambda, .. } => {
                r += lambda.eval_named("lambda", t)? * self.b_partial_tail(j + 1)?;
            }
            Arrivals::General(list) => {
                for tr in list.iter().filter(|tr| tr.from == j) {
                    r += tr.rate.eval_named("lambda", t)?;
                }
            }
        }
        match &self.services {
            Services::None => {}
            Services::SingleServer { mu } => {
                if j >= 1 {
                    r += mu.eval_named("mu", t)?;
                }
            }
            Services::General(list) => {
                for tr in list.iter().filter(|tr| tr.from == j) {
                    r += tr.rate.eval_named("mu", t)?;
                }
            }
        }
        if j >= 1 {
            r += self.catastrophe_rate(j, t)?;
        }
        Ok(r)
    }

    /// Advisory summability figures for the level-jump family:
    /// `(Σ b_k, Σ_k B_k, Σ_k k B_k)`, `None` where the series diverges.
    pub fn summability(&self) -> Option<(f64, Option<f64>, Option<f64>)> {
        match &self.arrivals {
            Arrivals::LevelJump { b: BSequence::CubicTelescoping, .. } => Some((1.0, Some(2.0), None)),
            Arrivals::LevelJump { b: BSequence::Explicit { values }, .. } => {
                let sum_b: f64 = values.iter().sum();
                // Σ_k B_k = Σ_i i b_i and Σ_k k B_k = Σ_i b_i i(i+1)/2.
                let sum_bk: f64 = values.iter().enumerate().map(|(i, b)| (i + 1) as f64 * b).sum();
                let sum_kbk: f64 = values
                    .iter()
                    .enumerate()
                    .map(|(i, b)| b * ((i + 1) * (i + 2)) as f64 / 2.0)
                    .sum();
                Some((sum_b, Some(sum_bk), Some(sum_kbk)))
            }
            Arrivals::General(_) => None,
        }
    }

    /// Warning text when the truncation at `n` drops more than half of the
    /// level-jump arrival mass out of state 0.
    pub fn truncation_warning(&self, n: usize) -> Option<String> {
        let lost = self.b_partial_tail(n + 1).ok()?;
        let total = self.b_partial_tail(1).ok()?;
        (lost > 0.5 * total).then(|| {
            format!("truncation N = {n} drops B_(N+1) = {lost:.3e} of the arrival mass out of state 0")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::examples;

    #[test]
    fn cubic_partial_tails() {
        let m = examples::original_model(TimeFunction::constant(1.0));
        assert_eq!(m.b_partial_tail(1).unwrap(), 1.0);
        assert!((m.b_partial_tail(2).unwrap() - 1.0 / 3.0).abs() < 1e-16);
        assert!((m.b_partial_tail(3).unwrap() - 1.0 / 6.0).abs() < 1e-16);
        assert!((m.b(1).unwrap() - 2.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn closed_form_tail_matches_partial_sums() {
        // Oracle: B_k = 1 - Σ_{i<k} b_i, accumulated term by term.
        let m = examples::original_model(TimeFunction::constant(1.0));
        let mut partial = 0.0;
        for k in 1..=1000 {
            let oracle = 1.0 - partial;
            assert!((m.b_partial_tail(k).unwrap() - oracle).abs() < 1e-12, "k = {k}");
            partial += 4.0 / (k as f64 * (k as f64 + 1.0) * (k as f64 + 2.0));
        }
    }

    #[test]
    fn explicit_b_suffix_sums() {
        let m = QueueModel::level_jump(
            TimeFunction::constant(1.0),
            BSequence::Explicit { values: vec![0.5, 0.25, 0.25] },
            TimeFunction::constant(1.0),
            Catastrophes::none(),
        )
        .unwrap();
        assert_eq!(m.b_partial_tail(1).unwrap(), 1.0);
        assert_eq!(m.b_partial_tail(2).unwrap(), 0.5);
        assert_eq!(m.b_partial_tail(4).unwrap(), 0.0);
        let (sb, sbk, skbk) = m.summability().unwrap();
        assert_eq!(sb, 1.0);
        assert_eq!(sbk.unwrap(), 0.5 + 0.5 + 0.75);
        assert_eq!(skbk.unwrap(), 0.5 * 1.0 + 0.25 * 3.0 + 0.25 * 6.0);
    }

    #[test]
    fn b_tail_unsupported_for_general_family() {
        let m = QueueModel::new(Arrivals::General(vec![]), Services::None, Catastrophes::none()).unwrap();
        assert!(matches!(m.b_partial_tail(1), Err(ModelError::UnsupportedFamily(_))));
    }

    #[test]
    fn beta_star_of_harmonic_tail() {
        let m = examples::original_model(TimeFunction::constant(1.0));
        assert_eq!(m.beta_star(0.0).unwrap(), 2.0);
        // Oracle: brute-force min over the first 10^6 states stays above the limit.
        let brute = (1..=1_000_000).map(|k| m.catastrophe_rate(k, 0.0).unwrap()).fold(f64::INFINITY, f64::min);
        assert!(brute >= 2.0 && brute - 2.0 < 1e-5);
    }

    #[test]
    fn beta_star_trivial_cases() {
        let c = QueueModel::new(
            Arrivals::General(vec![]),
            Services::None,
            Catastrophes::constant(TimeFunction::constant(0.7)),
        )
        .unwrap();
        assert_eq!(c.beta_star(1.3).unwrap(), 0.7);
        let z = QueueModel::new(Arrivals::General(vec![]), Services::None, Catastrophes::none()).unwrap();
        assert_eq!(z.beta_star(0.0).unwrap(), 0.0);
    }

    #[test]
    fn beta_star_without_tail_rule() {
        let mk = |vals: &[f64]| {
            QueueModel::new(
                Arrivals::General(vec![]),
                Services::None,
                Catastrophes {
                    prefix: vals.iter().map(|v| TimeFunction::constant(*v)).collect(),
                    tail: None,
                },
            )
            .unwrap()
        };
        assert_eq!(mk(&[3.0, 2.0, 1.5]).beta_star(0.0).unwrap(), 1.5);
        assert!(matches!(
            mk(&[3.0, 1.0, 1.5]).beta_star(0.0),
            Err(ModelError::TailInfimumRequired { .. })
        ));
    }

    #[test]
    fn prefix_overrides_tail() {
        let m = QueueModel::new(
            Arrivals::General(vec![]),
            Services::None,
            Catastrophes {
                prefix: vec![TimeFunction::constant(0.5)],
                tail: Some(CatastropheTail::Constant { rate: TimeFunction::constant(2.0) }),
            },
        )
        .unwrap();
        assert_eq!(m.catastrophe_rate(1, 0.0).unwrap(), 0.5);
        assert_eq!(m.catastrophe_rate(2, 0.0).unwrap(), 2.0);
        assert_eq!(m.beta_star(0.0).unwrap(), 0.5);
    }

    #[test]
    fn negative_rates_rejected_at_validation() {
        let bad = TimeFunction::harmonic(1.0, 1.0, 2.0, 0.0).unwrap();
        let err = QueueModel::level_jump(
            bad,
            BSequence::CubicTelescoping,
            TimeFunction::constant(1.0),
            Catastrophes::none(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::NegativeRate { ref function, .. } if function == "lambda"));
    }

    #[test]
    fn common_period_detection() {
        let m = examples::original_model(TimeFunction::constant(1.0));
        assert_eq!(m.common_period(), Some(1.0));
        let mu = TimeFunction::harmonic(2.0, 0.5, 0.0, 1.0).unwrap();
        assert_eq!(examples::original_model(mu).common_period(), None);
    }

    #[test]
    fn truncation_warning_threshold() {
        let m = examples::original_model(TimeFunction::constant(1.0));
        // B_2 = 1/3 < 0.5, B_1 = 1.
        assert!(m.truncation_warning(1).is_none());
        assert!(m.truncation_warning(0).is_some());
    }
}

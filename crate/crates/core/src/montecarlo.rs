//! Sample paths of the queue-length process on the infinite state space by
//! thinning, with per-state majorants refreshed on unit-length windows.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::io::fmt_f64;
use crate::model::{Arrivals, BSequence, CatastropheTail, ModelError, QueueModel, Services, TimeFunction};
use crate::solver::Trajectory;

pub const BOOTSTRAP_RESAMPLES: usize = 200;
const MAX_EVENTS_PER_PATH: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonteCarloError {
    #[error("majorant violated at t = {t} in state {state}: rate {rate} exceeds bound {majorant}")]
    MajorantViolation { t: f64, state: usize, rate: f64, majorant: f64 },
    #[error("path {path} exceeded {MAX_EVENTS_PER_PATH} proposals")]
    Runaway { path: usize },
    #[error("invalid simulation input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpKind {
    Arrival,
    Service,
    Catastrophe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub from: usize,
    pub to: usize,
    pub kind: JumpKind,
}

/// Suprema of every rate function over one window.
struct WindowSup {
    lambda: f64,
    arrivals: Vec<f64>,
    mu: f64,
    services: Vec<f64>,
    cat_prefix: Vec<f64>,
    cat_tail: TailSup,
}

enum TailSup {
    Constant(f64),
    Harmonic { base: f64, amplitude: f64 },
    Zero,
}

impl WindowSup {
    fn new(model: &QueueModel, a: f64, b: f64) -> Self {
        let sup = |f: &TimeFunction| f.sup_on(a, b).max(0.0);
        let lambda = match model.arrivals() {
            Arrivals::LevelJump { lambda, .. } => sup(lambda),
            Arrivals::General(_) => 0.0,
        };
        let arrivals = match model.arrivals() {
            Arrivals::General(list) => list.iter().map(|tr| sup(&tr.rate)).collect(),
            Arrivals::LevelJump { .. } => vec![],
        };
        let (mu, services) = match model.services() {
            Services::None => (0.0, vec![]),
            Services::SingleServer { mu } => (sup(mu), vec![]),
            Services::General(list) => (0.0, list.iter().map(|tr| sup(&tr.rate)).collect()),
        };
        let c = model.catastrophes();
        let cat_prefix: Vec<f64> = c.prefix.iter().map(sup).collect();
        let cat_tail = match &c.tail {
            Some(CatastropheTail::Constant { rate }) => TailSup::Constant(sup(rate)),
            Some(CatastropheTail::Harmonic { base, amplitude }) => {
                TailSup::Harmonic { base: sup(base), amplitude: amplitude.sup_on(a, b) }
            }
            Some(CatastropheTail::Zero) => TailSup::Zero,
            None => TailSup::Constant(*cat_prefix.last().unwrap_or(&0.0)),
        };
        WindowSup { lambda, arrivals, mu, services, cat_prefix, cat_tail }
    }

    fn catastrophe(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        if k <= self.cat_prefix.len() {
            return self.cat_prefix[k - 1];
        }
        match self.cat_tail {
            TailSup::Constant(v) => v,
            TailSup::Harmonic { base, amplitude } => base + (amplitude / k as f64).max(0.0),
            TailSup::Zero => 0.0,
        }
    }
}

/// Per-state transition lookup and majorants.
struct Sampler<'a> {
    model: &'a QueueModel,
    windows: Vec<WindowSup>,
    arrivals_from: Vec<Vec<usize>>,
    services_from: Vec<Vec<usize>>,
}

impl<'a> Sampler<'a> {
    fn new(model: &'a QueueModel, t_max: f64) -> Self {
        let count = (t_max.ceil() as usize).max(1);
        let windows = (0..count).map(|w| WindowSup::new(model, w as f64, ((w + 1) as f64).min(t_max))).collect();
        let index = |list: &[crate::model::Transition]| {
            let max = list.iter().map(|t| t.from).max().map_or(0, |m| m + 1);
            let mut v = vec![vec![]; max];
            for (i, tr) in list.iter().enumerate() {
                v[tr.from].push(i);
            }
            v
        };
        let arrivals_from = match model.arrivals() {
            Arrivals::General(list) => index(list),
            _ => vec![],
        };
        let services_from = match model.services() {
            Services::General(list) => index(list),
            _ => vec![],
        };
        Sampler { model, windows, arrivals_from, services_from }
    }

    fn majorant(&self, w: usize, x: usize) -> Result<f64, ModelError> {
        let s = &self.windows[w];
        let mut r = 0.0;
        if let Arrivals::LevelJump { .. } = self.model.arrivals() {
            r += s.lambda * self.model.b_partial_tail(x + 1)?;
        }
        if let Some(ids) = self.arrivals_from.get(x) {
            r += ids.iter().map(|i| s.arrivals[*i]).sum::<f64>();
        }
        if x >= 1 {
            r += s.mu;
        }
        if let Some(ids) = self.services_from.get(x) {
            r += ids.iter().map(|i| s.services[*i]).sum::<f64>();
        }
        Ok(r + s.catastrophe(x))
    }

    /// Picks the transition selected by `u ∈ [0, majorant)`, or `None` for a
    /// rejected proposal.
    fn select(
        &self,
        x: usize,
        t: f64,
        u: f64,
        majorant: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Option<(usize, JumpKind)>, MonteCarloError> {
        let mut options: Vec<(f64, usize, JumpKind)> = Vec::with_capacity(4);
        let mut level_jump = None;
        match self.model.arrivals() {
            Arrivals::LevelJump { lambda, b } => {
                let r = lambda.eval_named("lambda", t)? * self.model.b_partial_tail(x + 1)?;
                level_jump = Some(b);
                options.push((r, usize::MAX, JumpKind::Arrival));
            }
            Arrivals::General(list) => {
                for i in self.arrivals_from.get(x).into_iter().flatten() {
                    let tr = &list[*i];
                    options.push((tr.rate.eval_named("lambda", t)?, x + tr.size, JumpKind::Arrival));
                }
            }
        }
        match self.model.services() {
            Services::None => {}
            Services::SingleServer { mu } => {
                if x >= 1 {
                    options.push((mu.eval_named("mu", t)?, x - 1, JumpKind::Service));
                }
            }
            Services::General(list) => {
                for i in self.services_from.get(x).into_iter().flatten() {
                    let tr = &list[*i];
                    options.push((tr.rate.eval_named("mu", t)?, x - tr.size, JumpKind::Service));
                }
            }
        }
        if x >= 1 {
            options.push((self.model.catastrophe_rate(x, t)?, 0, JumpKind::Catastrophe));
        }
        let total: f64 = options.iter().map(|o| o.0).sum();
        if total > majorant * (1.0 + 1e-12) {
            return Err(MonteCarloError::MajorantViolation { t, state: x, rate: total, majorant });
        }
        let mut acc = 0.0;
        for (r, to, kind) in options {
            acc += r;
            if u < acc {
                let to = if to == usize::MAX { level_jump_target(self.model, level_jump.unwrap(), x, rng)? } else { to };
                return Ok(Some((to, kind)));
            }
        }
        Ok(None)
    }
}

/// Target `i > x` with probability `b_i / B_{x+1}`.
fn level_jump_target(model: &QueueModel, b: &BSequence, x: usize, rng: &mut ChaCha8Rng) -> Result<usize, ModelError> {
    let tail = model.b_partial_tail(x + 1)?;
    // u ∈ (0, 1]; the target is the least i > x with B_{i+1} ≤ u B_{x+1}.
    let u = 1.0 - rng.random::<f64>();
    let c = u * tail;
    match b {
        BSequence::CubicTelescoping => {
            // B_m = 2/(m(m+1)), so solve m(m+1) ≥ 2/c for m = i + 1.
            let m = (0.5 * ((1.0 + 8.0 / c).sqrt() - 1.0)).ceil().max(1.0);
            let mut i = (m as usize).saturating_sub(1).max(x + 1);
            while i > x + 1 && model.b_partial_tail(i)? <= c {
                i -= 1;
            }
            while model.b_partial_tail(i + 1)? > c {
                i += 1;
            }
            Ok(i)
        }
        BSequence::Explicit { values } => {
            let mut i = x + 1;
            while i < values.len() && model.b_partial_tail(i + 1)? > c {
                i += 1;
            }
            Ok(i)
        }
    }
}

fn simulate_one(
    sampler: &Sampler,
    x0: usize,
    t_max: f64,
    eval_times: &[f64],
    seed: u64,
    path: usize,
    record: bool,
) -> Result<(Vec<usize>, Vec<Event>), MonteCarloError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    let mut states = Vec::with_capacity(eval_times.len());
    let mut events = Vec::new();
    let mut x = x0;
    let mut t = 0.0;
    let mut proposals = 0usize;
    let mut e = 0;
    let mut majorant_cache: Option<(usize, usize, f64)> = None;
    while t < t_max {
        let w = (t.floor() as usize).min(sampler.windows.len() - 1);
        let window_end = ((w + 1) as f64).min(t_max);
        let lam = match majorant_cache {
            Some((cw, cx, v)) if cw == w && cx == x => v,
            _ => {
                let v = sampler.majorant(w, x)?;
                majorant_cache = Some((w, x, v));
                v
            }
        };
        let cand = if lam > 0.0 {
            let z: f64 = Exp1.sample(&mut rng);
            t + z / lam
        } else {
            f64::INFINITY
        };
        if cand >= window_end {
            t = window_end;
            continue;
        }
        proposals += 1;
        if proposals > MAX_EVENTS_PER_PATH {
            return Err(MonteCarloError::Runaway { path });
        }
        let u = rng.random::<f64>() * lam;
        if let Some((to, kind)) = sampler.select(x, cand, u, lam, &mut rng)? {
            while e < eval_times.len() && eval_times[e] < cand {
                states.push(x);
                e += 1;
            }
            if record {
                events.push(Event { t: cand, from: x, to, kind });
            }
            x = to;
        }
        t = cand;
    }
    while e < eval_times.len() {
        states.push(x);
        e += 1;
    }
    Ok((states, events))
}

/// Empirical distribution at one time with binomial standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Empirical {
    pub p: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub seed: u64,
    pub x0: usize,
    pub t_max: f64,
    pub eval_times: Vec<f64>,
    /// `states[path][i]` is the state at `eval_times[i]`.
    pub states: Vec<Vec<usize>>,
    pub events: Option<Vec<Vec<Event>>>,
}

/// Simulates `paths` independent paths from state `x0`. Path `k` uses the
/// ChaCha8 stream `k` of `seed`, so results do not depend on thread count.
pub fn simulate_paths(
    model: &QueueModel,
    x0: usize,
    t_max: f64,
    eval_times: &[f64],
    paths: usize,
    seed: u64,
    record_events: bool,
) -> Result<PathEnsemble, MonteCarloError> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(MonteCarloError::Invalid(format!("t_max must be positive and finite, got {t_max}")));
    }
    if eval_times.windows(2).any(|w| !(w[1] >= w[0])) || eval_times.iter().any(|t| !(*t >= 0.0 && *t <= t_max)) {
        return Err(MonteCarloError::Invalid("evaluation times must be sorted and lie in [0, t_max]".into()));
    }
    let sampler = Sampler::new(model, t_max);
    let runs: Vec<(Vec<usize>, Vec<Event>)> = (0..paths)
        .into_par_iter()
        .map(|p| simulate_one(&sampler, x0, t_max, eval_times, seed, p, record_events))
        .collect::<Result<_, _>>()?;
    let (states, events): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    Ok(PathEnsemble {
        seed,
        x0,
        t_max,
        eval_times: eval_times.to_vec(),
        states,
        events: record_events.then_some(events),
    })
}

fn counts_to_empirical(counts: &[usize], m: usize) -> Empirical {
    let mf = m as f64;
    let p: Vec<f64> = counts.iter().map(|c| *c as f64 / mf).collect();
    let stderr = p.iter().map(|q| (q * (1.0 - q) / mf).sqrt()).collect();
    Empirical { p, stderr }
}

impl PathEnsemble {
    /// Draws every `(path, time)` state independently from a solved
    /// distribution; the reference ensemble for the TV self-consistency check.
    pub fn from_distribution(tr: &Trajectory, paths: usize, seed: u64) -> Result<Self, MonteCarloError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dists: Vec<WeightedIndex<f64>> = tr
            .probs
            .iter()
            .map(|p| WeightedIndex::new(p.iter().map(|v| v.max(0.0))))
            .collect::<Result<_, _>>()
            .map_err(|e| MonteCarloError::Invalid(format!("bad distribution: {e}")))?;
        let states = (0..paths).map(|_| dists.iter().map(|d| d.sample(&mut rng)).collect()).collect();
        Ok(PathEnsemble {
            seed,
            x0: 0,
            t_max: tr.times.last().copied().unwrap_or(0.0),
            eval_times: tr.times.clone(),
            states,
            events: None,
        })
    }

    pub fn paths(&self) -> usize {
        self.states.len()
    }

    fn time_index(&self, t: f64) -> Option<usize> {
        self.eval_times.iter().position(|s| *s == t)
    }

    fn counts(&self, i: usize, sample: impl Iterator<Item = usize>) -> Vec<usize> {
        let mut c = Vec::new();
        for p in sample {
            let s = self.states[p][i];
            if s >= c.len() {
                c.resize(s + 1, 0);
            }
            c[s] += 1;
        }
        c
    }

    /// Empirical distribution at `eval_times[i]`, over states `0..=max observed`.
    pub fn distribution(&self, i: usize) -> Empirical {
        counts_to_empirical(&self.counts(i, 0..self.paths()), self.paths())
    }

    /// `t,state,empirical_p,stderr` for every evaluation time and observed state.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,state,empirical_p,stderr\n");
        for (i, t) in self.eval_times.iter().enumerate() {
            let e = self.distribution(i);
            for (k, (p, s)) in e.p.iter().zip(&e.stderr).enumerate() {
                out.push_str(&format!("{},{k},{},{}\n", fmt_f64(*t), fmt_f64(*p), fmt_f64(*s)));
            }
        }
        out
    }

    /// One JSON object per event, in path order.
    pub fn events_jsonl(&self) -> Option<String> {
        #[derive(Serialize)]
        struct Line<'a> {
            path: usize,
            #[serde(flatten)]
            event: &'a Event,
        }
        let events = self.events.as_ref()?;
        let mut out = String::new();
        for (path, list) in events.iter().enumerate() {
            for event in list {
                out.push_str(&serde_json::to_string(&Line { path, event }).expect("events serialize"));
                out.push('\n');
            }
        }
        Some(out)
    }

    /// Completed sojourns in `state` and total time spent there; for a
    /// constant exit rate `r`, `exposure / completed` estimates `1/r` with
    /// right-censoring at `t_max` handled exactly.
    pub fn holding_stats(&self, state: usize) -> Option<HoldingStats> {
        let events = self.events.as_ref()?;
        let (mut completed, mut exposure) = (0usize, 0.0);
        for list in events {
            let mut x = self.x0;
            let mut entered = 0.0;
            for ev in list {
                if x == state {
                    exposure += ev.t - entered;
                    completed += 1;
                }
                x = ev.to;
                entered = ev.t;
            }
            if x == state {
                exposure += self.t_max - entered;
            }
        }
        Some(HoldingStats { completed, exposure })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldingStats {
    pub completed: usize,
    pub exposure: f64,
}

impl HoldingStats {
    pub fn mean(&self) -> f64 {
        self.exposure / self.completed as f64
    }

    pub fn stderr(&self) -> f64 {
        self.mean() / (self.completed as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvComparison {
    pub t: f64,
    pub tv: f64,
    /// Bootstrap standard deviation over [`BOOTSTRAP_RESAMPLES`] resamples.
    pub stderr: f64,
}

fn tv_distance(counts: &[usize], m: usize, p: &[f64]) -> f64 {
    let mf = m as f64;
    let len = counts.len().max(p.len());
    let mut s = 0.0;
    for k in 0..len {
        let q = counts.get(k).map_or(0.0, |c| *c as f64 / mf);
        s += (q - p.get(k).copied().unwrap_or(0.0)).abs();
    }
    0.5 * s
}

/// `½ Σ_k |p̂_k − p_k|` at time `t`; empirical mass beyond the trajectory's
/// truncation counts in full.
pub fn compare_tv(ens: &PathEnsemble, tr: &Trajectory, t: f64) -> Result<TvComparison, MonteCarloError> {
    let i = ens.time_index(t).ok_or_else(|| MonteCarloError::Invalid(format!("t = {t} is not an ensemble evaluation time")))?;
    let p = tr.at(t).ok_or_else(|| MonteCarloError::Invalid(format!("t = {t} is not a trajectory output time")))?;
    let m = ens.paths();
    if m == 0 {
        return Err(MonteCarloError::Invalid("empty ensemble".into()));
    }
    let tv = tv_distance(&ens.counts(i, 0..m), m, p);
    let mut rng = ChaCha8Rng::seed_from_u64(ens.seed);
    rng.set_stream(u64::MAX);
    let boots: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
            tv_distance(&ens.counts(i, idx.into_iter()), m, p)
        })
        .collect();
    let mean = boots.iter().sum::<f64>() / boots.len() as f64;
    let var = boots.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (boots.len() - 1) as f64;
    Ok(TvComparison { t, tv, stderr: var.sqrt() })
}

//! The `catbound` command line: `bound`, `solve`, `verify`, `simulate` and
//! `example`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{compute_report, BoundAnalysis, BoundOptions, BoundsError, ClaimedConstants};
use crate::io::{write_atomic, ModelFile};
use crate::model::{examples, QueueModel, TimeFunction, WeightSequence};
use crate::montecarlo::{compare_tv, simulate_paths, TvComparison};
use crate::solver::{
    default_window, delta, limiting_regime_check, mean_from_trajectories, pair_from_trajectories, solve_forward,
    solve_many, solve_reduced, uniform_grid, LimitCheck,
};
use crate::{exit, Error};

/// Initial states compared against state 0 by `verify`.
pub const VERIFY_STATES: [usize; 3] = [1, 5, 20];
/// Largest accepted observed/bound ratio is `1 + RATIO_SLACK`.
pub const RATIO_SLACK: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "catbound", version, about = "Convergence and limiting-regime bounds for queues with catastrophes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute beta**, its exponential envelope and the derived bounds.
    Bound(BoundArgs),
    /// Integrate the forward equations from a point mass.
    Solve(SolveArgs),
    /// Check the bounds against solved pairs of trajectories.
    Verify(VerifyArgs),
    /// Simulate sample paths and compare them with the forward equations.
    Simulate(SimulateArgs),
    /// Write a built-in example model and run bound, solve and verify on it.
    Example(ExampleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Weights: linear, one, geometric:RHO or file:PATH (default: the model
    /// file's weights, else linear).
    #[arg(long)]
    pub weights: Option<String>,
    /// Truncation level N.
    #[arg(long, default_value_t = 200)]
    pub trunc: usize,
    #[arg(long, default_value_t = 10.0)]
    pub tmax: f64,
    /// Number of output times on [0, tmax].
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
    /// Absolute local error tolerance of the ODE solver.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Print a machine-readable summary instead of text.
    #[arg(long)]
    pub json: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.trunc < 1 {
            return Err(Error::Invalid("--trunc must be at least 1".into()));
        }
        if !(self.tmax > 0.0 && self.tmax.is_finite()) {
            return Err(Error::Invalid("--tmax must be positive".into()));
        }
        if self.grid < 2 {
            return Err(Error::Invalid("--grid must be at least 2".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Invalid("--tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub cfg: RunConfig,
    /// Use this beta** instead of the computed one: a number or a time-function JSON object.
    #[arg(long)]
    pub beta_override: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub cfg: RunConfig,
    /// Initial state k (p(0) = delta_k).
    #[arg(long, default_value_t = 0)]
    pub initial: usize,
    /// Integrate the reduced system instead of the forward equations.
    #[arg(long)]
    pub reduced: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub cfg: RunConfig,
    /// Use this beta** instead of the computed one: a number or a time-function JSON object.
    #[arg(long)]
    pub beta_override: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub cfg: RunConfig,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub initial: usize,
    /// Also write the per-path event log as JSON lines.
    #[arg(long)]
    pub events: bool,
    /// Times at which to report the total-variation distance.
    #[arg(long, value_delimiter = ',', default_value = "2,5")]
    pub tv_at: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExampleVariant {
    /// lambda(t) = 2 + 2cos 2pi t with the stated constants.
    Paper,
    /// lambda(t) scaled by 1/4.
    Corrected,
}

impl ExampleVariant {
    fn name(self) -> &'static str {
        match self {
            ExampleVariant::Paper => "paper",
            ExampleVariant::Corrected => "corrected",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExampleArgs {
    #[arg(value_enum)]
    pub variant: ExampleVariant,
    #[command(flatten)]
    pub cfg: RunConfig,
    /// Service rate mu(t): a number or a time-function JSON object (default 1).
    #[arg(long)]
    pub mu: Option<String>,
}

pub fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Bound(a) => cmd_bound(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Example(a) => cmd_example(&a),
    }
}

struct Loaded {
    model: QueueModel,
    weights: WeightSequence,
    claims: Option<ClaimedConstants>,
}

fn parse_weights(s: &str) -> Result<WeightSequence, Error> {
    match s.strip_prefix("file:") {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Invalid(format!("cannot read {path}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("weights file {path}: {e}")))
        }
        None => Ok(WeightSequence::parse_named(s)?),
    }
}

/// A bare number is a constant; anything else is parsed as a time-function object.
pub fn parse_time_function(s: &str) -> Result<TimeFunction, Error> {
    if let Ok(v) = s.trim().parse::<f64>() {
        if !v.is_finite() {
            return Err(Error::Invalid(format!("non-finite constant {s}")));
        }
        return Ok(TimeFunction::constant(v));
    }
    serde_json::from_str(s).map_err(|e| Error::Invalid(format!("time function {s:?}: {e}")))
}

fn resolve(file: ModelFile, weights: Option<&str>) -> Result<Loaded, Error> {
    let weights = match weights {
        Some(s) => parse_weights(s)?,
        None => file.weights.unwrap_or_else(WeightSequence::linear),
    };
    Ok(Loaded { model: file.model, weights, claims: file.claims })
}

fn load(path: &Path, weights: Option<&str>) -> Result<Loaded, Error> {
    resolve(ModelFile::load(path)?, weights)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Error> {
    let path = dir.join(name);
    write_atomic(&path, contents.as_bytes()).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    Ok(path)
}

fn emit<T: Serialize>(cfg: &RunConfig, text: &str, value: &T) {
    if cfg.json {
        println!("{}", serde_json::to_string_pretty(value).expect("summaries serialize"));
    } else {
        print!("{text}");
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"))
}

fn run_bound(l: &Loaded, cfg: &RunConfig, beta_override: Option<TimeFunction>) -> Result<BoundAnalysis, Error> {
    let opts = BoundOptions { n: cfg.trunc, t_max: cfg.tmax, grid: cfg.grid, claims: l.claims.clone(), beta_override };
    let analysis = compute_report(&l.model, &l.weights, &opts)?;
    write(&cfg.out, "bounds.json", &analysis.report.to_json())?;
    write(&cfg.out, "beta.csv", &analysis.report.beta_csv())?;
    Ok(analysis)
}

fn bound_text(a: &BoundAnalysis) -> String {
    let r = &a.report;
    let mut s = String::new();
    writeln!(s, "beta** source      {}", r.beta_source).unwrap();
    writeln!(s, "weights            {}", r.weights.description).unwrap();
    writeln!(s, "truncation N       {} (tail certified: {})", r.truncation.n, r.truncation.tail_certified).unwrap();
    writeln!(s, "b*                 {:.6}", r.b_star).unwrap();
    writeln!(s, "mean of beta**     {}", opt(r.b_double_star_mean)).unwrap();
    writeln!(s, "R**                {}", opt(r.r_star_star)).unwrap();
    writeln!(s, "b**                {}", opt(r.b_star_star)).unwrap();
    writeln!(s, "limsup bound       {}", opt(r.theorem2)).unwrap();
    for reason in &r.undefined {
        writeln!(s, "undefined          {reason}").unwrap();
    }
    if !r.discrepancies.is_empty() {
        writeln!(s, "\n{:<34} {:>14} {:>18}  status", "quantity", "claimed", "first principles").unwrap();
        for d in &r.discrepancies {
            writeln!(
                s,
                "{:<34} {:>14.6} {:>18}  {}",
                d.quantity,
                d.claimed,
                opt(d.first_principles),
                if d.consistent { "ok" } else { "DISCREPANCY" }
            )
            .unwrap();
        }
    }
    s
}

fn undefined_error(a: &BoundAnalysis) -> Error {
    let reason = a.report.undefined.first().cloned().unwrap_or_else(|| "no exponential envelope".into());
    Error::Bounds(BoundsError::Undefined(reason))
}

pub fn cmd_bound(args: &BoundArgs) -> Result<i32, Error> {
    args.cfg.validate()?;
    let l = load(&args.model, args.cfg.weights.as_deref())?;
    let over = args.beta_override.as_deref().map(parse_time_function).transpose()?;
    let a = run_bound(&l, &args.cfg, over)?;
    emit(&args.cfg, &bound_text(&a), &a.report);
    if a.report.theorem2.is_none() {
        return Err(undefined_error(&a));
    }
    Ok(exit::OK)
}

#[derive(Debug, Serialize)]
struct SolveSummary {
    system: crate::solver::System,
    initial: usize,
    steps: usize,
    rejected: usize,
    max_local_error: f64,
    max_mass_drift: f64,
    min_entry: f64,
    final_mean: f64,
    max_upper_mass: f64,
    warning: Option<String>,
    file: PathBuf,
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32, Error> {
    args.cfg.validate()?;
    let l = load(&args.model, args.cfg.weights.as_deref())?;
    let summary = run_solve(&l, &args.cfg, args.initial, args.reduced)?;
    let text = format!(
        "steps {} (rejected {}), max local error {:.3e}, max mass drift {:.3e}, min entry {:.3e}, E(tmax) = {:.6}\n{}",
        summary.steps,
        summary.rejected,
        summary.max_local_error,
        summary.max_mass_drift,
        summary.min_entry,
        summary.final_mean,
        summary.warning.as_deref().map(|w| format!("warning: {w}\n")).unwrap_or_default()
    );
    emit(&args.cfg, &text, &summary);
    Ok(exit::OK)
}

fn run_solve(l: &Loaded, cfg: &RunConfig, initial: usize, reduced: bool) -> Result<SolveSummary, Error> {
    let n = cfg.trunc;
    if initial > n {
        return Err(Error::Invalid(format!("--initial {initial} exceeds --trunc {n}")));
    }
    let grid = uniform_grid(cfg.tmax, cfg.grid);
    let p0 = delta(n, initial);
    let tr = if reduced {
        solve_reduced(&l.model, n, &p0, &grid, cfg.tol)?
    } else {
        solve_forward(&l.model, n, &p0, &grid, cfg.tol)?
    };
    let file = write(&cfg.out, "trajectory.csv", &tr.to_csv(&l.weights))?;
    let max_upper_mass = tr.upper_mass().into_iter().fold(0.0, f64::max);
    Ok(SolveSummary {
        system: tr.system,
        initial,
        steps: tr.stats.steps,
        rejected: tr.stats.rejected,
        max_local_error: tr.stats.max_local_error,
        max_mass_drift: tr.tail_defect().into_iter().fold(0.0, |a, d| a.max(d.abs())),
        min_entry: tr.min_entry(),
        final_mean: *tr.mean().last().unwrap(),
        max_upper_mass,
        warning: (max_upper_mass > crate::solver::MEAN_TAIL_WARNING).then(|| {
            format!("mass above state {} reaches {max_upper_mass:.3e}; consider a larger --trunc", n / 2)
        }),
        file,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PairSummary {
    pub j: usize,
    pub max_ratio: Option<f64>,
    pub norm_equivalence: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanSummary {
    pub j: usize,
    pub max_ratio: Option<f64>,
    pub pass: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub slack: f64,
    pub pairs: Vec<PairSummary>,
    pub means: Vec<MeanSummary>,
    pub limit: LimitCheck,
    pub pass: bool,
}

fn run_verify(l: &Loaded, cfg: &RunConfig, a: &BoundAnalysis) -> Result<VerifySummary, Error> {
    let n = cfg.trunc;
    let grid = uniform_grid(cfg.tmax, cfg.grid);
    let js: Vec<usize> = VERIFY_STATES.iter().copied().filter(|j| *j <= n).collect();
    let starts: Vec<usize> = std::iter::once(0).chain(js.iter().copied()).collect();
    let trs = solve_many(&l.model, n, &starts, &grid, cfg.tol)?;
    let (mut pairs, mut means) = (vec![], vec![]);
    for (i, j) in js.iter().enumerate() {
        let pair = pair_from_trajectories(&trs[0], &trs[i + 1], a)?;
        write(&cfg.out, &format!("pair_j{j}.csv"), &pair.to_csv())?;
        pairs.push(PairSummary {
            j: *j,
            max_ratio: pair.max_ratio(),
            norm_equivalence: pair.norm_equivalence,
            pass: pair.passes(RATIO_SLACK),
        });
        let mean = mean_from_trajectories(&trs[0], &trs[i + 1], *j, a)?;
        means.push(MeanSummary {
            j: *j,
            max_ratio: mean.max_ratio,
            pass: mean.max_ratio.is_none_or(|r| r <= 1.0 + RATIO_SLACK),
            warnings: mean.warnings,
        });
    }
    let limit = limiting_regime_check(&trs[0], a, default_window(cfg.tmax));
    let pass = pairs.iter().all(|p| p.pass) && means.iter().all(|m| m.pass);
    let summary = VerifySummary { slack: RATIO_SLACK, pairs, means, limit, pass };
    write(&cfg.out, "verify.json", &serde_json::to_string_pretty(&summary).expect("summaries serialize"))?;
    Ok(summary)
}

fn verify_text(v: &VerifySummary) -> String {
    let mut s = String::new();
    writeln!(s, "{:>4} {:>16} {:>16}  norm-equiv", "j", "contraction", "mean").unwrap();
    for (p, m) in v.pairs.iter().zip(&v.means) {
        writeln!(s, "{:>4} {:>16} {:>16}  {}", p.j, opt(p.max_ratio), opt(m.max_ratio), p.norm_equivalence).unwrap();
    }
    writeln!(
        s,
        "sup ||p||_1D on [{}, {}] = {:.6} vs limsup bound {} ({})",
        v.limit.window.0,
        v.limit.window.1,
        v.limit.observed_sup,
        opt(v.limit.theorem2),
        if v.limit.theorem2.is_none() {
            "undefined"
        } else if v.limit.pass {
            "ok"
        } else {
            "exceeded"
        }
    )
    .unwrap();
    let warnings: std::collections::BTreeSet<&String> = v.means.iter().flat_map(|m| &m.warnings).collect();
    for w in warnings {
        writeln!(s, "warning: {w}").unwrap();
    }
    writeln!(s, "verification {}", if v.pass { "PASSED" } else { "FAILED" }).unwrap();
    s
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<i32, Error> {
    args.cfg.validate()?;
    let l = load(&args.model, args.cfg.weights.as_deref())?;
    let over = args.beta_override.as_deref().map(parse_time_function).transpose()?;
    let opts = BoundOptions {
        n: args.cfg.trunc,
        t_max: args.cfg.tmax,
        grid: args.cfg.grid,
        claims: None,
        beta_override: over,
    };
    let a = compute_report(&l.model, &l.weights, &opts)?;
    let v = run_verify(&l, &args.cfg, &a)?;
    emit(&args.cfg, &verify_text(&v), &v);
    if !v.pass {
        return Err(Error::VerificationFailed(format!("an observed/bound ratio exceeds 1 + {RATIO_SLACK:e}")));
    }
    Ok(exit::OK)
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    paths: usize,
    seed: u64,
    initial: usize,
    tv: Vec<TvComparison>,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32, Error> {
    args.cfg.validate()?;
    if args.paths == 0 {
        return Err(Error::Invalid("--paths must be positive".into()));
    }
    let n = args.cfg.trunc;
    if args.initial > n {
        return Err(Error::Invalid(format!("--initial {} exceeds --trunc {n}", args.initial)));
    }
    let l = load(&args.model, args.cfg.weights.as_deref())?;
    let tv_at: Vec<f64> = args.tv_at.iter().copied().filter(|t| *t >= 0.0 && *t <= args.cfg.tmax).collect();
    let mut grid = uniform_grid(args.cfg.tmax, args.cfg.grid);
    grid.extend(&tv_at);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let ens = simulate_paths(&l.model, args.initial, args.cfg.tmax, &grid, args.paths, args.seed, args.events)?;
    write(&args.cfg.out, "ensemble.csv", &ens.to_csv())?;
    if let Some(events) = ens.events_jsonl() {
        write(&args.cfg.out, "events.jsonl", &events)?;
    }
    let tr = solve_forward(&l.model, n, &delta(n, args.initial), &grid, args.cfg.tol)?;
    let tv = tv_at.iter().map(|t| compare_tv(&ens, &tr, *t)).collect::<Result<Vec<_>, _>>()?;
    let summary = SimulateSummary { paths: args.paths, seed: args.seed, initial: args.initial, tv };
    write(&args.cfg.out, "tv.json", &serde_json::to_string_pretty(&summary).expect("summaries serialize"))?;
    let mut text = format!("{} paths, seed {}\n{:>8} {:>12} {:>12}\n", args.paths, args.seed, "t", "TV", "stderr");
    for c in &summary.tv {
        writeln!(text, "{:>8} {:>12.6} {:>12.6}", c.t, c.tv, c.stderr).unwrap();
    }
    emit(&args.cfg, &text, &summary);
    Ok(exit::OK)
}

/// The model file written by `example`.
pub fn example_file(variant: ExampleVariant, mu: TimeFunction) -> ModelFile {
    match variant {
        ExampleVariant::Paper => ModelFile {
            model: examples::original_model(mu),
            weights: Some(WeightSequence::linear()),
            claims: Some(examples::stated_claims()),
        },
        ExampleVariant::Corrected => ModelFile {
            model: examples::corrected_model(mu),
            weights: Some(WeightSequence::linear()),
            claims: None,
        },
    }
}

#[derive(Debug, Serialize)]
struct ExampleSummary<'a> {
    variant: &'static str,
    model_file: PathBuf,
    bound: &'a crate::bounds::BoundReport,
    verify: &'a VerifySummary,
}

pub fn cmd_example(args: &ExampleArgs) -> Result<i32, Error> {
    args.cfg.validate()?;
    let mu = args.mu.as_deref().map(parse_time_function).transpose()?.unwrap_or_else(examples::default_mu);
    let file = example_file(args.variant, mu);
    let name = format!("example_{}.json", args.variant.name());
    let model_file = write(&args.cfg.out, &name, &file.to_json())?;
    let l = resolve(ModelFile::load(&model_file)?, args.cfg.weights.as_deref())?;
    let a = run_bound(&l, &args.cfg, None)?;
    let solve = run_solve(&l, &args.cfg, 0, false)?;
    let v = run_verify(&l, &args.cfg, &a)?;
    let summary = ExampleSummary { variant: args.variant.name(), model_file, bound: &a.report, verify: &v };
    let mut text = format!("example {} written to {}\n\n", args.variant.name(), summary.model_file.display());
    text.push_str(&bound_text(&a));
    writeln!(
        text,
        "\nsolve from 0: {} steps, max mass drift {:.3e}, E(tmax) = {:.6}\n",
        solve.steps, solve.max_mass_drift, solve.final_mean
    )
    .unwrap();
    text.push_str(&verify_text(&v));
    emit(&args.cfg, &text, &summary);
    if !v.pass {
        return Err(Error::VerificationFailed(format!("an observed/bound ratio exceeds 1 + {RATIO_SLACK:e}")));
    }
    Ok(exit::OK)
}

//! Dormand–Prince 5(4) with absolute max-norm error control. Steps are
//! clipped so that every output time is hit exactly.

use super::SolverError;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Fifth-order weights minus fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct SolverStats {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub max_local_error: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct DopriOptions {
    /// Absolute local error bound per step, max norm.
    pub tol: f64,
    pub max_steps: usize,
}

impl DopriOptions {
    pub fn new(tol: f64) -> Self {
        DopriOptions { tol, max_steps: 10_000_000 }
    }
}

/// Integrates `y' = f(t, y)` from `grid[0]` and returns `y` at every grid
/// time. `check` runs after each accepted step.
pub fn integrate<F, C>(
    mut f: F,
    y0: &[f64],
    grid: &[f64],
    opts: &DopriOptions,
    mut check: C,
) -> Result<(Vec<Vec<f64>>, SolverStats), SolverError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), SolverError>,
    C: FnMut(f64, &[f64]) -> Result<(), SolverError>,
{
    if grid.is_empty() {
        return Ok((vec![], SolverStats::default()));
    }
    if !(opts.tol > 0.0) {
        return Err(SolverError::Invalid(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if grid.windows(2).any(|w| !(w[1] >= w[0])) || !grid.iter().all(|t| t.is_finite()) {
        return Err(SolverError::Invalid("output grid must be finite and nondecreasing".into()));
    }
    let n = y0.len();
    let mut stats = SolverStats::default();
    let mut t = grid[0];
    let mut y = y0.to_vec();
    let mut out = Vec::with_capacity(grid.len());
    let mut idx = 0;
    while idx < grid.len() && grid[idx] == t {
        out.push(y.clone());
        idx += 1;
    }
    if idx == grid.len() {
        return Ok((out, stats));
    }

    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    f(t, &y, &mut k[0])?;
    stats.rhs_evals += 1;
    let fmax = k[0].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let span = grid[grid.len() - 1] - t;
    let mut h = if fmax > 0.0 { 0.5 * (opts.tol / fmax).powf(0.2) } else { span };
    h = h.clamp(1e-6 * span.max(1e-300), span);

    while idx < grid.len() {
        let target = grid[idx];
        let remaining = target - t;
        let (h_step, hits) = if h >= remaining * (1.0 - 1e-12) { (remaining, true) } else { (h, false) };

        macro_rules! stage {
            ($dst:expr, $c:expr, $( $a:expr => $ki:expr ),+) => {{
                for i in 0..n {
                    tmp[i] = y[i] + h_step * (0.0 $( + $a * k[$ki][i] )+);
                }
                let (_, rest) = k.split_at_mut($dst);
                f(t + $c * h_step, &tmp, &mut rest[0])?;
            }};
        }
        stage!(1, C2, A21 => 0);
        stage!(2, C3, A31 => 0, A32 => 1);
        stage!(3, C4, A41 => 0, A42 => 1, A43 => 2);
        stage!(4, C5, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
        stage!(5, 1.0, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
        for i in 0..n {
            y_new[i] = y[i] + h_step * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        let t_new = if hits { target } else { t + h_step };
        {
            let (_, rest) = k.split_at_mut(6);
            f(t_new, &y_new, &mut rest[0])?;
        }
        stats.rhs_evals += 6;

        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = h_step
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            err = err.max(e.abs());
        }
        if !err.is_finite() {
            return Err(SolverError::NonFinite { t });
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * (opts.tol / err).powf(0.2)).clamp(0.2, 5.0) };
        if err <= opts.tol {
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            stats.steps += 1;
            stats.max_local_error = stats.max_local_error.max(err);
            check(t, &y)?;
            if hits {
                while idx < grid.len() && grid[idx] == t {
                    out.push(y.clone());
                    idx += 1;
                }
                h = h.max(h_step * fac);
            } else {
                h = h_step * fac;
            }
            if stats.steps >= opts.max_steps {
                return Err(SolverError::TooManySteps { t, steps: stats.steps });
            }
        } else {
            stats.rejected += 1;
            h = h_step * fac;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(SolverError::StepUnderflow { t, h });
            }
        }
    }
    Ok((out, stats))
}

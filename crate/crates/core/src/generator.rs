//! Truncated snapshots of the transposed generator `A(t)`, the reduced
//! matrix `A*(t)` with its forcing vector, and the weighted `D A*(t) D⁻¹`.
//!
//! Matrices are column-oriented: entry `(i, j)` with `i ≠ j` is the flow rate
//! from state `j` into state `i`, so column `j` lists everything leaving `j`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::model::{Arrivals, ModelError, QueueModel, Services, WeightSequence};

/// How transitions to states beyond the truncation level are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// Drop out-of-range jumps and shrink the diagonal: columns sum to zero.
    Reflecting,
    /// Keep the true diagonal: the column deficit is the leaked rate.
    DefectTracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    A,
    AStar,
    AStarWeighted,
}

/// Compressed sparse column storage with row indices sorted per column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseColumns {
    dim: usize,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseColumns {
    fn with_capacity(dim: usize, nnz: usize) -> Self {
        let mut col_ptr = Vec::with_capacity(dim + 1);
        col_ptr.push(0);
        SparseColumns { dim, col_ptr, rows: Vec::with_capacity(nnz), vals: Vec::with_capacity(nnz) }
    }

    /// Appends the next column; `entries` must be sorted by row with no duplicates.
    fn push_column(&mut self, entries: &[(usize, f64)]) {
        for &(i, v) in entries {
            self.rows.push(i);
            self.vals.push(v);
        }
        self.col_ptr.push(self.rows.len());
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        self.rows[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        match self.rows[r.clone()].binary_search(&i) {
            Ok(pos) => self.vals[r.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        self.column(j).map(|(_, v)| v).sum()
    }

    /// `y = M x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.dim {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.rows[k]] += self.vals[k] * xj;
            }
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.dim]; self.dim];
        for j in 0..self.dim {
            for (i, v) in self.column(j) {
                m[i][j] = v;
            }
        }
        m
    }

    fn map_entries(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for j in 0..self.dim {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                out.vals[k] = f(self.rows[k], j, self.vals[k]);
            }
        }
        out
    }
}

/// Snapshot of one of the generator variants at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedGenerator {
    pub n: usize,
    pub t: f64,
    pub closure: Closure,
    pub variant: Variant,
    pub matrix: SparseColumns,
}

impl TruncatedGenerator {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn diagonal(&self, j: usize) -> f64 {
        self.matrix.get(j, j)
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        self.matrix.column_sum(j)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.matvec(x, y)
    }

    /// Coordinate-list dump: one `i j value` line per stored entry, sorted by
    /// `(j, i)`, values at 17 significant digits.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for j in 0..=self.n {
            for (i, v) in self.matrix.column(j) {
                writeln!(s, "{i} {j} {}", crate::io::fmt_f64(v)).unwrap();
            }
        }
        s
    }
}

/// `g(t) = (β_*(t), 0, …, 0)` of length `N + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingVector {
    pub beta_star: f64,
    pub len: usize,
}

impl ForcingVector {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.len];
        v[0] = self.beta_star;
        v
    }

    pub fn add_to(&self, y: &mut [f64]) {
        y[0] += self.beta_star;
    }
}

/// Sorts entries by row and merges duplicates.
fn normalize(entries: &mut Vec<(usize, f64)>) {
    entries.sort_by_key(|e| e.0);
    let mut w = 0;
    for r in 0..entries.len() {
        if w > 0 && entries[w - 1].0 == entries[r].0 {
            entries[w - 1].1 += entries[r].1;
        } else {
            entries[w] = entries[r];
            w += 1;
        }
    }
    entries.truncate(w);
}

fn assemble(
    model: &QueueModel,
    n: usize,
    t: f64,
    closure: Closure,
    beta_star: Option<f64>,
) -> Result<SparseColumns, ModelError> {
    if n < 1 {
        return Err(ModelError::Invalid("truncation level must be at least 1".into()));
    }
    let dim = n + 1;
    let mut betas = vec![0.0; dim];
    for (j, b) in betas.iter_mut().enumerate().skip(1) {
        *b = model.catastrophe_rate(j, t)?;
    }
    let level_jump = match model.arrivals() {
        Arrivals::LevelJump { lambda, .. } => {
            let lam = lambda.eval_named("lambda", t)?;
            let b: Vec<f64> = (0..=n).map(|i| model.b(i)).collect::<Result<_, _>>()?;
            Some((lam, b))
        }
        Arrivals::General(_) => None,
    };
    let mu = match model.services() {
        Services::SingleServer { mu } => Some(mu.eval_named("mu", t)?),
        _ => None,
    };
    let nnz = if level_jump.is_some() { dim * (dim + 5) / 2 } else { 4 * dim };
    let mut m = SparseColumns::with_capacity(dim, nnz);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(dim + 2);
    for j in 0..dim {
        entries.clear();
        // Rate to states beyond n (dropped entries).
        let mut leak = 0.0;
        if let Some((lam, b)) = &level_jump {
            for i in j + 1..dim {
                entries.push((i, lam * b[i]));
            }
            leak += lam * model.b_partial_tail(n + 1)?;
        }
        if let Arrivals::General(list) = model.arrivals() {
            for tr in list.iter().filter(|tr| tr.from == j) {
                let r = tr.rate.eval_named(&format!("lambda[{},{}]", j, j + tr.size), t)?;
                if j + tr.size <= n {
                    entries.push((j + tr.size, r));
                } else {
                    leak += r;
                }
            }
        }
        if let (Some(mu), true) = (mu, j >= 1) {
            entries.push((j - 1, mu));
        }
        if let Services::General(list) = model.services() {
            for tr in list.iter().filter(|tr| tr.from == j) {
                let r = tr.rate.eval_named(&format!("mu[{},{}]", j, j - tr.size), t)?;
                entries.push((j - tr.size, r));
            }
        }
        if j >= 1 {
            entries.push((0, betas[j]));
        }
        let in_range: f64 = entries.iter().map(|e| e.1).sum();
        let mut diag = match closure {
            Closure::Reflecting => -in_range,
            Closure::DefectTracking => -(in_range + leak),
        };
        if let Some(bs) = beta_star {
            if j == 0 {
                diag -= bs;
            } else {
                entries.push((0, -bs));
            }
        }
        entries.push((j, diag));
        normalize(&mut entries);
        m.push_column(&entries);
    }
    Ok(m)
}

/// Snapshot of `A(t) = Q(t)ᵀ` truncated to states `0..=n`.
pub fn build_a(model: &QueueModel, n: usize, t: f64, closure: Closure) -> Result<TruncatedGenerator, ModelError> {
    let matrix = assemble(model, n, t, closure, None)?;
    Ok(TruncatedGenerator { n, t, closure, variant: Variant::A, matrix })
}

/// Snapshot of `A*(t)` and `g(t)`: `β_*(t)` is subtracted from every entry of
/// row 0 and moved into the forcing term, so `A p = A* p + g` whenever
/// `Σ p = 1`.
pub fn build_a_star(
    model: &QueueModel,
    n: usize,
    t: f64,
    closure: Closure,
) -> Result<(TruncatedGenerator, ForcingVector), ModelError> {
    let bs = model.beta_star(t)?;
    let matrix = assemble(model, n, t, closure, Some(bs))?;
    Ok((
        TruncatedGenerator { n, t, closure, variant: Variant::AStar, matrix },
        ForcingVector { beta_star: bs, len: n + 1 },
    ))
}

/// `D A* D⁻¹`: entry `(i, j)` scaled by `d_i / d_j`.
pub fn apply_weights(a_star: &TruncatedGenerator, w: &WeightSequence) -> Result<TruncatedGenerator, ModelError> {
    if a_star.variant != Variant::AStar {
        return Err(ModelError::Invalid(format!("weights apply to A*, got {:?}", a_star.variant)));
    }
    let d: Vec<f64> = (0..=a_star.n).map(|k| w.d(k)).collect();
    let matrix = a_star.matrix.map_entries(|i, j, v| if i == j { v } else { v * d[i] / d[j] });
    Ok(TruncatedGenerator { variant: Variant::AStarWeighted, matrix, ..a_star.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{examples, Catastrophes, TimeFunction, Transition};

    fn zero_model() -> QueueModel {
        QueueModel::new(
            Arrivals::General(vec![]),
            Services::SingleServer { mu: TimeFunction::zero() },
            Catastrophes::none(),
        )
        .unwrap()
    }

    #[test]
    fn example_entries_at_zero() {
        let mu = 1.25;
        let m = examples::original_model(TimeFunction::constant(mu));
        let a = build_a(&m, 5, 0.0, Closure::DefectTracking).unwrap();
        assert!((a.get(1, 0) - 8.0 / 3.0).abs() < 1e-15);
        assert!((a.get(0, 1) - (mu + 3.0)).abs() < 1e-15);
        // Row 0 of column 2 is the catastrophe rate only; service goes to state 1.
        assert!((a.get(0, 2) - 2.5).abs() < 1e-15);
        assert_eq!(a.get(1, 2), mu);
        // Level-jump arrivals from 1 land on i > 1 at λ b_i.
        assert!((a.get(3, 1) - 4.0 * 4.0 / 60.0).abs() < 1e-15);
        // Defect-tracking diagonal is the true outflow: λ B_1 for state 0.
        assert_eq!(a.diagonal(0), -4.0);
    }

    #[test]
    fn zero_rates_give_zero_matrix() {
        let a = build_a(&zero_model(), 4, 0.3, Closure::Reflecting).unwrap();
        assert!(a.matrix.to_dense().iter().flatten().all(|v| *v == 0.0));
        let (s, g) = build_a_star(&zero_model(), 4, 0.3, Closure::Reflecting).unwrap();
        assert_eq!(s.matrix.to_dense(), a.matrix.to_dense());
        assert_eq!(g.beta_star, 0.0);
    }

    #[test]
    fn reflecting_columns_sum_to_zero_defect_tracks_leak() {
        let m = examples::original_model(TimeFunction::constant(1.0));
        let n = 10;
        let t = 0.17;
        let r = build_a(&m, n, t, Closure::Reflecting).unwrap();
        let d = build_a(&m, n, t, Closure::DefectTracking).unwrap();
        let lam = examples::example_lambda().value(t);
        for j in 0..=n {
            assert!(r.column_sum(j).abs() < 1e-12);
            let leak = lam * m.b_partial_tail(n + 1).unwrap();
            assert!((d.column_sum(j) + leak).abs() < 1e-12, "column {j}");
        }
    }

    #[test]
    fn a_star_columns_lose_beta_star() {
        // Constant-rate M/M/1 with catastrophe rate c.
        let c = 0.8;
        let m = QueueModel::new(
            Arrivals::General((0..60).map(|i| Transition { from: i, size: 1, rate: TimeFunction::constant(1.0) }).collect()),
            Services::SingleServer { mu: TimeFunction::constant(1.5) },
            Catastrophes::constant(TimeFunction::constant(c)),
        )
        .unwrap();
        let n = 40;
        let (s, g) = build_a_star(&m, n, 0.0, Closure::DefectTracking).unwrap();
        assert_eq!(g.to_vec()[0], c);
        for j in 0..n {
            // Explicit column summation.
            let sum: f64 = s.matrix.to_dense().iter().map(|row| row[j]).sum();
            assert!((sum + c).abs() < 1e-12, "column {j}: {sum}");
        }
        // Column n also leaks its arrival.
        assert!((s.column_sum(n) + c + 1.0).abs() < 1e-12);
    }

    #[test]
    fn weights_scale_off_diagonals() {
        let m = examples::original_model(TimeFunction::constant(1.0));
        let (s, _) = build_a_star(&m, 6, 0.0, Closure::DefectTracking).unwrap();
        let one = apply_weights(&s, &WeightSequence::constant_one()).unwrap();
        assert_eq!(one.matrix, s.matrix);
        let lin = apply_weights(&s, &WeightSequence::linear()).unwrap();
        assert!((lin.get(2, 0) - 3.0 * s.get(2, 0)).abs() < 1e-15);
        for j in 0..=6 {
            assert_eq!(lin.diagonal(j), s.diagonal(j));
        }
        assert!(apply_weights(&lin, &WeightSequence::linear()).is_err());
    }

    #[test]
    fn example_a_star_row_zero() {
        let mu = 1.0;
        let m = examples::original_model(TimeFunction::constant(mu));
        let (s, _) = build_a_star(&m, 8, 0.0, Closure::DefectTracking).unwrap();
        for j in 1..=8 {
            let gamma = 2.0 + 1.0 / j as f64;
            let expected = if j == 1 { mu } else { 0.0 } + gamma - 2.0;
            assert!((s.get(0, j) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn dump_format() {
        let m = examples::original_model(TimeFunction::constant(1.0));
        let a = build_a(&m, 2, 0.0, Closure::Reflecting).unwrap();
        let text = a.dump();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), a.matrix.nnz());
        assert!(lines[0].starts_with("0 0 "));
        assert!(lines[1].starts_with("1 0 "));
        let v: f64 = lines[1].split(' ').nth(2).unwrap().parse().unwrap();
        assert_eq!(v, a.get(1, 0));
    }

    #[test]
    fn level_jump_storage_is_linear_per_column() {
        let m = examples::original_model(TimeFunction::constant(1.0));
        let n = 50;
        let a = build_a(&m, n, 0.0, Closure::Reflecting).unwrap();
        for j in 0..=n {
            // Arrivals to j+1..=n, diagonal, service, row 0.
            assert!(a.matrix.column(j).count() <= n - j + 3);
        }
    }
}

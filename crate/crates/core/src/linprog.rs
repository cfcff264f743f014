//! Small dense linear-program solver.
//!
//! Maximizes `c·x` subject to `A x ≤ b` and per-variable bounds `lo ≤ x ≤ hi`
//! using a two-phase tableau simplex. Pricing is Dantzig's rule, switching to
//! Bland's rule during runs of degenerate pivots so the method cannot cycle.
//! Intended for the few-dozen-variable programs that arise from zonotope
//! membership and under-approximation; there is no sparsity support.

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;

const PIVOT_EPS: f64 = 1e-9;
const PRICE_EPS: f64 = 1e-10;
const DROP_EPS: f64 = 1e-14;
const DEGENERATE_RUN: usize = 10;

/// `maximize objective·x  s.t.  rows·x ≤ rhs,  lower ≤ x ≤ upper`.
///
/// Variables default to `0 ≤ x < ∞`; use [`LinearProgram::set_bounds`] with
/// infinite values for free variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub solution: Option<Vec<f64>>,
    pub objective_value: Option<f64>,
}

impl LpOutcome {
    fn without_solution(status: LpStatus) -> Self {
        Self {
            status,
            solution: None,
            objective_value: None,
        }
    }
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    /// Adds `row·x ≤ rhs`.
    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.rows.push(row);
        self.rhs.push(rhs);
        self
    }

    /// Adds `row·x ≥ rhs`.
    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.add_le(row.into_iter().map(|v| -v).collect(), -rhs)
    }

    /// Adds `row·x = rhs` as a pair of inequalities.
    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.add_le(row.clone(), rhs);
        self.add_ge(row, rhs)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        for row in &self.rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "constraint row",
                    expected: n,
                    found: row.len(),
                });
            }
        }
        if self
            .objective
            .iter()
            .chain(self.rows.iter().flatten())
            .chain(&self.rhs)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("linear program coefficients"));
        }
        if self
            .lower
            .iter()
            .chain(&self.upper)
            .any(|v| v.is_nan())
            || self.lower.contains(&f64::INFINITY)
            || self.upper.contains(&f64::NEG_INFINITY)
        {
            return Err(Error::InvalidArgument(
                "variable bounds must be ordered and not NaN".into(),
            ));
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`, scaled per row by
    /// `max(1, |rhs|, Σ|a_j x_j|)`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, b) in self.rows.iter().zip(&self.rhs) {
            let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            let scale = row
                .iter()
                .zip(x)
                .map(|(a, v)| (a * v).abs())
                .sum::<f64>()
                .max(b.abs())
                .max(1.0);
            worst = worst.max((lhs - b) / scale);
        }
        for ((v, l), u) in x.iter().zip(&self.lower).zip(&self.upper) {
            worst = worst.max(l - v).max(v - u);
        }
        worst
    }
}

/// How an original variable is expressed through nonnegative tableau columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    Shift { lower: f64, col: usize },
    Mirror { upper: f64, col: usize },
    Split { pos: usize, neg: usize },
}

struct Tableau {
    cells: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
    iterations: usize,
    max_iterations: usize,
}

enum RunResult {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn rhs(&self, row: usize) -> f64 {
        self.cells[row][self.width]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.width;
        let p = self.cells[row][col];
        for v in self.cells[row].iter_mut() {
            *v /= p;
        }
        self.cells[row][col] = 1.0;
        let pivot_row = self.cells[row].clone();
        for (i, r) in self.cells.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let factor = r[col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..=width {
                let v = r[j] - factor * pivot_row[j];
                r[j] = if v.abs() < DROP_EPS { 0.0 } else { v };
            }
            r[col] = 0.0;
        }
        self.basis[row] = col;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut r = cost.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb == 0.0 {
                continue;
            }
            for (j, rj) in r.iter_mut().enumerate() {
                *rj -= cb * self.cells[i][j];
            }
        }
        r
    }

    fn objective_value(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &b)| cost[b] * self.rhs(i))
            .sum()
    }

    /// Primal simplex maximizing `cost` over the columns for which `allowed` holds.
    fn run(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> RunResult {
        let scale = cost.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        let price_eps = PRICE_EPS * scale;
        let mut degenerate_streak = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return RunResult::IterationLimit;
            }
            let reduced = self.reduced_costs(cost);
            let mut in_basis = vec![false; self.width];
            for &b in &self.basis {
                in_basis[b] = true;
            }
            let candidates = (0..self.width)
                .filter(|&j| !in_basis[j] && allowed(j) && reduced[j] > price_eps);
            let entering = if degenerate_streak >= DEGENERATE_RUN {
                candidates.min()
            } else {
                candidates.fold(None, |best: Option<usize>, j| match best {
                    Some(b) if reduced[b] >= reduced[j] => Some(b),
                    _ => Some(j),
                })
            };
            let Some(col) = entering else {
                return RunResult::Optimal;
            };

            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.cells.len() {
                let a = self.cells[i][col];
                if a <= PIVOT_EPS {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leaving = match leaving {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * best.abs().max(1.0);
                        if ratio < best && !tie || tie && self.basis[i] < self.basis[k] {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
            let Some((row, ratio)) = leaving else {
                return RunResult::Unbounded;
            };
            if ratio <= 1e-12 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.pivot(row, col);
            self.iterations += 1;
        }
    }
}

/// Solves `lp`. Returns `Err` only for malformed programs; solver trouble is
/// reported through [`LpStatus::NumericalFailure`].
pub fn solve(lp: &LinearProgram, tol: f64) -> Result<LpOutcome> {
    lp.validate()?;
    let n = lp.num_vars();

    // Map original variables onto nonnegative columns.
    let mut maps = Vec::with_capacity(n);
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    let mut ncols = 0usize;
    for j in 0..n {
        let (lo, mut hi) = (lp.lower[j], lp.upper[j]);
        if lo > hi {
            if lo - hi > tol {
                return Ok(LpOutcome::without_solution(LpStatus::Infeasible));
            }
            hi = lo;
        }
        let map = match (lo.is_finite(), hi.is_finite()) {
            (true, _) => {
                let col = ncols;
                ncols += 1;
                if hi.is_finite() {
                    bound_rows.push((col, hi - lo));
                }
                VarMap::Shift { lower: lo, col }
            }
            (false, true) => {
                let col = ncols;
                ncols += 1;
                VarMap::Mirror { upper: hi, col }
            }
            (false, false) => {
                let (pos, neg) = (ncols, ncols + 1);
                ncols += 2;
                VarMap::Split { pos, neg }
            }
        };
        maps.push(map);
    }

    let express = |coeffs: &[f64]| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; ncols];
        let mut constant = 0.0;
        for (a, map) in coeffs.iter().zip(&maps) {
            match *map {
                VarMap::Shift { lower, col } => {
                    out[col] += a;
                    constant += a * lower;
                }
                VarMap::Mirror { upper, col } => {
                    out[col] -= a;
                    constant += a * upper;
                }
                VarMap::Split { pos, neg } => {
                    out[pos] += a;
                    out[neg] -= a;
                }
            }
        }
        (out, constant)
    };

    let mut rows: Vec<(Vec<f64>, f64)> = lp
        .rows
        .iter()
        .zip(&lp.rhs)
        .map(|(row, b)| {
            let (coeffs, constant) = express(row);
            (coeffs, b - constant)
        })
        .collect();
    for (col, width) in bound_rows {
        let mut coeffs = vec![0.0; ncols];
        coeffs[col] = 1.0;
        rows.push((coeffs, width));
    }

    let m = rows.len();
    let n_art = rows.iter().filter(|(_, b)| *b < 0.0).count();
    let slack0 = ncols;
    let art0 = ncols + m;
    let width = ncols + m + n_art;
    let mut cells = vec![vec![0.0; width + 1]; m];
    let mut basis = vec![0; m];
    let mut next_art = art0;
    for (i, (coeffs, b)) in rows.iter().enumerate() {
        let sign = if *b < 0.0 { -1.0 } else { 1.0 };
        for (j, a) in coeffs.iter().enumerate() {
            cells[i][j] = sign * a;
        }
        cells[i][slack0 + i] = sign;
        cells[i][width] = sign * b;
        if *b < 0.0 {
            cells[i][next_art] = 1.0;
            basis[i] = next_art;
            next_art += 1;
        } else {
            basis[i] = slack0 + i;
        }
    }
    let mut tableau = Tableau {
        cells,
        basis,
        width,
        iterations: 0,
        max_iterations: 50 * (n + lp.num_constraints()).max(1) + 50 * m,
    };

    if n_art > 0 {
        let mut phase1 = vec![0.0; width];
        for c in phase1.iter_mut().skip(art0) {
            *c = -1.0;
        }
        match tableau.run(&phase1, &|_| true) {
            RunResult::Optimal => {}
            RunResult::Unbounded | RunResult::IterationLimit => {
                return Ok(LpOutcome::without_solution(LpStatus::NumericalFailure))
            }
        }
        let rhs_scale = rows.iter().fold(1.0f64, |s, (_, b)| s.max(b.abs()));
        let infeasibility = -tableau.objective_value(&phase1);
        if infeasibility > tol * rhs_scale {
            return Ok(LpOutcome::without_solution(LpStatus::Infeasible));
        }
        // Drive zero-valued artificials out of the basis where possible.
        for i in 0..m {
            if tableau.basis[i] < art0 {
                continue;
            }
            let col = (0..art0)
                .filter(|j| !tableau.basis.contains(j))
                .max_by(|&a, &b| {
                    tableau.cells[i][a]
                        .abs()
                        .total_cmp(&tableau.cells[i][b].abs())
                        .then(b.cmp(&a))
                });
            if let Some(col) = col {
                if tableau.cells[i][col].abs() > PIVOT_EPS {
                    tableau.pivot(i, col);
                }
            }
        }
    }

    let (obj_cols, obj_constant) = express(&lp.objective);
    let mut phase2 = vec![0.0; width];
    phase2[..ncols].copy_from_slice(&obj_cols);
    match tableau.run(&phase2, &|j| j < art0) {
        RunResult::Optimal => {}
        RunResult::Unbounded => return Ok(LpOutcome::without_solution(LpStatus::Unbounded)),
        RunResult::IterationLimit => {
            return Ok(LpOutcome::without_solution(LpStatus::NumericalFailure))
        }
    }

    let mut y = vec![0.0; width];
    for (i, &b) in tableau.basis.iter().enumerate() {
        y[b] = tableau.rhs(i).max(0.0);
    }
    let mut x: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shift { lower, col } => lower + y[col],
            VarMap::Mirror { upper, col } => upper - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    if lp.max_violation(&x) > tol {
        return Ok(LpOutcome::without_solution(LpStatus::NumericalFailure));
    }
    for ((v, l), u) in x.iter_mut().zip(&lp.lower).zip(&lp.upper) {
        *v = v.clamp(*l, u.max(*l));
    }
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
    debug_assert!(
        (value - (tableau.objective_value(&phase2) + obj_constant)).abs()
            <= 1e-6 * value.abs().max(1.0)
    );
    Ok(LpOutcome {
        status: LpStatus::Optimal,
        solution: Some(x),
        objective_value: Some(value),
    })
}

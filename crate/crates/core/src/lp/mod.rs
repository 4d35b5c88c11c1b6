//! Dense linear programming engine.
//!
//! Problems are stated as
//!
//! ```text
//! min  c'z
//! s.t. A_eq z  = b_eq   (dual_eq, free)
//!      A_ub z <= b_ub   (dual_ub >= 0)
//!      l <= z <= u
//! ```
//!
//! [`solve_lp`] runs a bounded-variable primal simplex and reports the
//! multipliers of both row families together with the reduced costs, which
//! act as multipliers of the variable bounds. [`solve_milp`] adds best-bound
//! branch and bound over a set of binary variables.

mod milp;
mod simplex;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use milp::{solve_milp, solve_milp_with, MilpProblem};
pub use simplex::solve_lp_with;

/// Optimality tolerances shared by the LP and MILP solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Primal feasibility.
    pub feas: f64,
    /// Complementary slackness products.
    pub cs: f64,
    /// Primal/dual objective gap, relative once |obj| > 1.
    pub gap: f64,
    /// Integrality of binary variables.
    pub int: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feas: 1e-7,
            cs: 1e-6,
            gap: 1e-6,
            int: 1e-6,
        }
    }
}

impl Tolerances {
    /// Gap threshold scaled by the magnitude of the objective.
    pub fn gap_for(&self, objective: f64) -> f64 {
        self.gap * objective.abs().max(1.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub eq_matrix: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub ub_matrix: Vec<Vec<f64>>,
    pub ub_rhs: Vec<f64>,
    /// `(lower, upper)` per variable; either side may be infinite.
    pub var_bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// An empty program over `n` variables with zero cost and bounds `[0, inf)`.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            var_bounds: vec![(0.0, f64::INFINITY); n],
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_eq(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn num_ub(&self) -> usize {
        self.ub_rhs.len()
    }

    pub fn num_rows(&self) -> usize {
        self.num_eq() + self.num_ub()
    }

    fn dense_row(&self, terms: &[(usize, f64)]) -> Vec<f64> {
        let mut row = vec![0.0; self.num_vars()];
        for &(j, a) in terms {
            row[j] += a;
        }
        row
    }

    /// Appends `sum(a_j z_j) = rhs`; returns the row index.
    pub fn add_eq(&mut self, terms: &[(usize, f64)], rhs: f64) -> usize {
        let row = self.dense_row(terms);
        self.eq_matrix.push(row);
        self.eq_rhs.push(rhs);
        self.eq_rhs.len() - 1
    }

    /// Appends `sum(a_j z_j) <= rhs`; returns the row index.
    pub fn add_ub(&mut self, terms: &[(usize, f64)], rhs: f64) -> usize {
        let row = self.dense_row(terms);
        self.ub_matrix.push(row);
        self.ub_rhs.push(rhs);
        self.ub_rhs.len() - 1
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.var_bounds[j] = (lower, upper);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        if self.var_bounds.len() != n {
            return bad(format!(
                "{} bounds for {} variables",
                self.var_bounds.len(),
                n
            ));
        }
        if self.eq_matrix.len() != self.eq_rhs.len() {
            return bad("equality matrix/rhs row counts differ".into());
        }
        if self.ub_matrix.len() != self.ub_rhs.len() {
            return bad("inequality matrix/rhs row counts differ".into());
        }
        for (family, rows) in [("eq", &self.eq_matrix), ("ub", &self.ub_matrix)] {
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return bad(format!("{family} row {i} has {} columns, expected {n}", row.len()));
                }
                if row.iter().any(|a| !a.is_finite()) {
                    return bad(format!("{family} row {i} has a non-finite coefficient"));
                }
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return bad("non-finite objective coefficient".into());
        }
        if self.eq_rhs.iter().chain(&self.ub_rhs).any(|b| !b.is_finite()) {
            return bad("non-finite right-hand side".into());
        }
        for (j, &(lo, hi)) in self.var_bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
            {
                return bad(format!("variable {j} has invalid bounds [{lo}, {hi}]"));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        dot(&self.objective, z)
    }

    /// Largest violation of rows and bounds at `z`.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, b) in self.eq_matrix.iter().zip(&self.eq_rhs) {
            worst = worst.max((dot(row, z) - b).abs());
        }
        for (row, b) in self.ub_matrix.iter().zip(&self.ub_rhs) {
            worst = worst.max(dot(row, z) - b);
        }
        for (&(lo, hi), &v) in self.var_bounds.iter().zip(z) {
            worst = worst.max(lo - v).max(v - hi);
        }
        worst
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: Status,
    /// Empty unless a primal point is available (optimal, or a MILP incumbent
    /// under a time limit).
    pub primal: Vec<f64>,
    pub dual_eq: Vec<f64>,
    /// Nonnegative multipliers of the `<=` rows.
    pub dual_ub: Vec<f64>,
    /// `c - A' y` per variable; the multipliers of the active variable bounds.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub wall_time: f64,
    /// Simplex pivots for an LP, explored nodes for a MILP.
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn without_point(status: Status, wall_time: f64, iterations: usize) -> Self {
        Self {
            status,
            primal: Vec::new(),
            dual_eq: Vec::new(),
            dual_ub: Vec::new(),
            reduced_costs: Vec::new(),
            objective: f64::NAN,
            wall_time,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn has_point(&self) -> bool {
        !self.primal.is_empty()
    }
}

/// Solves an LP with default tolerances.
pub fn solve_lp(problem: &LinearProgram, time_limit: Duration) -> Result<LpSolution> {
    solve_lp_with(problem, time_limit, &Tolerances::default())
}

/// Dual objective `b_eq'λ - b_ub'μ + Σ bound terms` of an optimal solution.
///
/// Each reduced cost is attributed to the bound the variable sits on: a
/// positive value to a finite lower bound, a negative one to a finite upper
/// bound.
pub fn dual_objective(problem: &LinearProgram, solution: &LpSolution) -> f64 {
    let mut value = dot(&problem.eq_rhs, &solution.dual_eq) - dot(&problem.ub_rhs, &solution.dual_ub);
    for (&(lo, hi), &d) in problem.var_bounds.iter().zip(&solution.reduced_costs) {
        if d > 0.0 && lo.is_finite() {
            value += d * lo;
        } else if d < 0.0 && hi.is_finite() {
            value += d * hi;
        }
    }
    value
}

/// Checks the optimality conditions of an `Optimal` solution.
///
/// Returns a description of the first violated condition, if any.
pub fn check_optimality(
    problem: &LinearProgram,
    solution: &LpSolution,
    tol: &Tolerances,
) -> std::result::Result<(), String> {
    let z = &solution.primal;
    let scale = |row: &[f64], b: f64| 1.0 + b.abs() + row.iter().zip(z).map(|(a, v)| (a * v).abs()).fold(0.0, f64::max);
    for (i, (row, b)) in problem.eq_matrix.iter().zip(&problem.eq_rhs).enumerate() {
        let r = (dot(row, z) - b).abs();
        if r > tol.feas * scale(row, *b) {
            return Err(format!("equality row {i} residual {r:e}"));
        }
    }
    for (i, (row, b)) in problem.ub_matrix.iter().zip(&problem.ub_rhs).enumerate() {
        let slack = b - dot(row, z);
        if slack < -tol.feas * scale(row, *b) {
            return Err(format!("inequality row {i} violated by {:e}", -slack));
        }
        let mu = solution.dual_ub[i];
        if mu < -tol.feas {
            return Err(format!("inequality dual {i} negative: {mu:e}"));
        }
        if mu * slack.max(0.0) > tol.cs * (1.0 + mu.abs()).max(1.0) {
            return Err(format!("complementarity on row {i}: {mu:e} * {slack:e}"));
        }
    }
    for (j, (&(lo, hi), &v)) in problem.var_bounds.iter().zip(z).enumerate() {
        if v < lo - tol.feas * (1.0 + lo.abs()) || v > hi + tol.feas * (1.0 + hi.abs()) {
            return Err(format!("variable {j} = {v} outside [{lo}, {hi}]"));
        }
    }
    let primal = problem.objective_value(z);
    let dual = dual_objective(problem, solution);
    if (primal - dual).abs() > tol.gap_for(primal) {
        return Err(format!("duality gap: primal {primal} dual {dual}"));
    }
    Ok(())
}

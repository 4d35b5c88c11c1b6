//! Bounded-variable primal simplex on a dense tableau.
//!
//! Every row gets an initial basic column: the slack of a `<=` row when the
//! starting point satisfies it, otherwise a signed artificial. Those columns
//! stay in the tableau for the whole solve, so the simplex multipliers can be
//! read off their reduced costs at the end. Variables with equal bounds are
//! substituted out before the tableau is built.
//!
//! Pricing is Dantzig's rule with a two-pass Harris ratio test; after a run
//! of degenerate pivots the solver switches to Bland's rule until it makes
//! progress again.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use super::{dot, LinearProgram, LpSolution, Status, Tolerances};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Column {
    Structural(usize),
    Slack(usize),
    /// Artificial for `row` with coefficient `+1.0` or `-1.0`.
    Artificial { row: usize, negative: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Place {
    Basic(usize),
    Lower,
    Upper,
    Free,
}

struct Tableau<'a> {
    lp: &'a LinearProgram,
    m: usize,
    nc: usize,
    tab: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    place: Vec<Place>,
    basis: Vec<usize>,
    columns: Vec<Column>,
    enterable: Vec<bool>,
    /// Tableau column that formed the initial basis of each row and its sign.
    initial: Vec<(usize, f64)>,
    /// Right-hand side after substituting fixed variables.
    rhs: Vec<f64>,
    fixed: Vec<Option<f64>>,
    iterations: usize,
    scratch_idx: Vec<usize>,
    scratch_val: Vec<f64>,
}

enum Outcome {
    Optimal,
    Unbounded,
    TimeLimit,
}

/// Entry of the full constraint matrix `[A_eq; A_ub]`.
fn coeff(lp: &LinearProgram, row: usize, j: usize) -> f64 {
    let m_eq = lp.num_eq();
    if row < m_eq {
        lp.eq_matrix[row][j]
    } else {
        lp.ub_matrix[row - m_eq][j]
    }
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a LinearProgram) -> Self {
        let m_eq = lp.num_eq();
        let m = lp.num_rows();
        let n = lp.num_vars();

        let mut rhs: Vec<f64> = lp.eq_rhs.iter().chain(&lp.ub_rhs).copied().collect();
        let mut fixed = vec![None; n];
        let mut columns = Vec::with_capacity(n + m);
        let mut lb = Vec::with_capacity(n + m);
        let mut ub = Vec::with_capacity(n + m);
        let mut x = Vec::with_capacity(n + m);
        let mut place = Vec::with_capacity(n + m);

        for (j, &(lo, hi)) in lp.var_bounds.iter().enumerate() {
            if lo == hi {
                fixed[j] = Some(lo);
                if lo != 0.0 {
                    for (i, r) in rhs.iter_mut().enumerate() {
                        *r -= coeff(lp, i, j) * lo;
                    }
                }
                continue;
            }
            columns.push(Column::Structural(j));
            lb.push(lo);
            ub.push(hi);
            let (value, at) = if lo.is_finite() {
                (lo, Place::Lower)
            } else if hi.is_finite() {
                (hi, Place::Upper)
            } else {
                (0.0, Place::Free)
            };
            x.push(value);
            place.push(at);
        }
        let n_struct = columns.len();

        // Residual of the starting point.
        let mut resid = rhs.clone();
        for (k, col) in columns.iter().enumerate() {
            let Column::Structural(j) = *col else { unreachable!() };
            if x[k] != 0.0 {
                for (i, r) in resid.iter_mut().enumerate() {
                    *r -= coeff(lp, i, j) * x[k];
                }
            }
        }

        for i in 0..lp.num_ub() {
            columns.push(Column::Slack(i));
            lb.push(0.0);
            ub.push(f64::INFINITY);
            x.push(0.0);
            place.push(Place::Lower);
        }
        let mut initial = vec![(usize::MAX, 1.0); m];
        let mut basis = vec![usize::MAX; m];
        for row in 0..m {
            let r = resid[row];
            if row >= m_eq && r >= 0.0 {
                let k = n_struct + (row - m_eq);
                initial[row] = (k, 1.0);
                basis[row] = k;
                x[k] = r;
                place[k] = Place::Basic(row);
            } else {
                let negative = r < 0.0;
                let k = columns.len();
                columns.push(Column::Artificial { row, negative });
                lb.push(0.0);
                ub.push(f64::INFINITY);
                x.push(r.abs());
                place.push(Place::Basic(row));
                initial[row] = (k, if negative { -1.0 } else { 1.0 });
                basis[row] = k;
            }
        }

        let nc = columns.len();
        let mut tab = vec![0.0; m * nc];
        for (k, col) in columns.iter().enumerate() {
            match *col {
                Column::Structural(j) => {
                    for i in 0..m {
                        tab[i * nc + k] = coeff(lp, i, j) * initial[i].1;
                    }
                }
                Column::Slack(i) => {
                    let row = m_eq + i;
                    tab[row * nc + k] = initial[row].1;
                }
                Column::Artificial { row, negative } => {
                    let s = if negative { -1.0 } else { 1.0 };
                    tab[row * nc + k] = s * initial[row].1;
                }
            }
        }

        let enterable = vec![true; nc];
        Self {
            lp,
            m,
            nc,
            tab,
            d: vec![0.0; nc],
            cost: vec![0.0; nc],
            lb,
            ub,
            x,
            place,
            basis,
            columns,
            enterable,
            initial,
            rhs,
            fixed,
            iterations: 0,
            scratch_idx: Vec::with_capacity(nc),
            scratch_val: Vec::with_capacity(nc),
        }
    }

    fn has_artificials(&self) -> bool {
        self.columns
            .iter()
            .any(|c| matches!(c, Column::Artificial { .. }))
    }

    fn set_costs(&mut self, phase_one: bool) {
        for (k, col) in self.columns.iter().enumerate() {
            self.cost[k] = match (*col, phase_one) {
                (Column::Artificial { .. }, true) => 1.0,
                (Column::Structural(j), false) => self.lp.objective[j],
                _ => 0.0,
            };
        }
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * self.nc..(i + 1) * self.nc];
                for (dj, &t) in self.d.iter_mut().zip(row) {
                    *dj -= cb * t;
                }
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    /// Entering column and direction (+1 increase, -1 decrease).
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for k in 0..self.nc {
            if !self.enterable[k] {
                continue;
            }
            let dk = self.d[k];
            let dir = match self.place[k] {
                Place::Basic(_) => continue,
                Place::Lower if dk < -DUAL_TOL => 1.0,
                Place::Upper if dk > DUAL_TOL => -1.0,
                Place::Free if dk.abs() > DUAL_TOL => -dk.signum(),
                _ => continue,
            };
            if bland {
                return Some((k, dir));
            }
            if dk.abs() > best_score {
                best_score = dk.abs();
                best = Some((k, dir));
            }
        }
        best
    }

    /// Returns `(row, step)` for a basis change, `(usize::MAX, step)` for a
    /// bound flip of the entering column, or `None` when unbounded.
    fn ratio_test(&self, q: usize, dir: f64, bland: bool) -> Option<(usize, f64)> {
        let nc = self.nc;
        let range = self.ub[q] - self.lb[q];

        // Pass 1: largest step allowed with relaxed bounds.
        let mut theta_max = f64::INFINITY;
        for i in 0..self.m {
            let alpha = dir * self.tab[i * nc + q];
            let b = self.basis[i];
            let xb = self.x[b];
            let lim = if alpha > PIVOT_TOL && self.lb[b].is_finite() {
                (xb - self.lb[b] + if bland { 0.0 } else { PRIMAL_TOL }) / alpha
            } else if alpha < -PIVOT_TOL && self.ub[b].is_finite() {
                (self.ub[b] - xb + if bland { 0.0 } else { PRIMAL_TOL }) / -alpha
            } else {
                continue;
            };
            theta_max = theta_max.min(lim);
        }
        if range.is_finite() && range <= theta_max {
            return Some((usize::MAX, range));
        }
        if !theta_max.is_finite() {
            return None;
        }

        // Pass 2: among rows within the relaxed step, the largest pivot.
        let mut chosen = usize::MAX;
        let mut chosen_alpha = 0.0;
        let mut chosen_step = 0.0;
        for i in 0..self.m {
            let alpha = dir * self.tab[i * nc + q];
            let b = self.basis[i];
            let xb = self.x[b];
            let lim = if alpha > PIVOT_TOL && self.lb[b].is_finite() {
                (xb - self.lb[b]) / alpha
            } else if alpha < -PIVOT_TOL && self.ub[b].is_finite() {
                (self.ub[b] - xb) / -alpha
            } else {
                continue;
            };
            if lim > theta_max + if bland { 1e-12 } else { 0.0 } {
                continue;
            }
            let better = if chosen == usize::MAX {
                true
            } else if bland {
                b < self.basis[chosen]
            } else {
                alpha.abs() > chosen_alpha
            };
            if better {
                chosen = i;
                chosen_alpha = alpha.abs();
                chosen_step = lim.max(0.0);
            }
        }
        Some((chosen, chosen_step))
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.nc;
        let piv = self.tab[r * nc + q];
        self.scratch_idx.clear();
        self.scratch_val.clear();
        {
            let row = &mut self.tab[r * nc..(r + 1) * nc];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v /= piv;
                    self.scratch_idx.push(j);
                    self.scratch_val.push(*v);
                }
            }
            row[q] = 1.0;
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * nc + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * nc..(i + 1) * nc];
            for (&j, &v) in self.scratch_idx.iter().zip(&self.scratch_val) {
                row[j] -= f * v;
            }
            row[q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            for (&j, &v) in self.scratch_idx.iter().zip(&self.scratch_val) {
                self.d[j] -= f * v;
            }
        }
        self.d[q] = 0.0;
    }

    fn iterate(&mut self, deadline: Instant, max_iter: usize) -> Result<Outcome> {
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            if Instant::now() >= deadline {
                return Ok(Outcome::TimeLimit);
            }
            if self.iterations >= max_iter {
                return Err(Error::Numerical(format!(
                    "no convergence after {} pivots",
                    self.iterations
                )));
            }
            let Some((q, dir)) = self.price(bland) else {
                return Ok(Outcome::Optimal);
            };
            let Some((r, step)) = self.ratio_test(q, dir, bland) else {
                return Ok(Outcome::Unbounded);
            };
            self.iterations += 1;

            let nc = self.nc;
            if step != 0.0 {
                for i in 0..self.m {
                    let a = self.tab[i * nc + q];
                    if a != 0.0 {
                        self.x[self.basis[i]] -= dir * step * a;
                    }
                }
            }
            if r == usize::MAX {
                self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
                self.place[q] = if dir > 0.0 { Place::Upper } else { Place::Lower };
            } else {
                let entering_value = self.x[q] + dir * step;
                let leaving = self.basis[r];
                let alpha = dir * self.tab[r * nc + q];
                if alpha > 0.0 {
                    self.x[leaving] = self.lb[leaving];
                    self.place[leaving] = Place::Lower;
                } else {
                    self.x[leaving] = self.ub[leaving];
                    self.place[leaving] = Place::Upper;
                }
                self.basis[r] = q;
                self.place[q] = Place::Basic(r);
                self.x[q] = entering_value;
                self.pivot(r, q);
            }

            if step <= 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
        }
    }

    fn artificial_sum(&self) -> f64 {
        self.basis
            .iter()
            .filter(|&&b| matches!(self.columns[b], Column::Artificial { .. }))
            .map(|&b| self.x[b].abs())
            .sum()
    }

    /// Pivots zero-level artificials out of the basis where possible and
    /// freezes every artificial at zero.
    fn retire_artificials(&mut self) {
        let nc = self.nc;
        for r in 0..self.m {
            let b = self.basis[r];
            if !matches!(self.columns[b], Column::Artificial { .. }) {
                continue;
            }
            let mut best = usize::MAX;
            let mut best_abs = 1e-7;
            for k in 0..nc {
                if matches!(self.columns[k], Column::Artificial { .. })
                    || matches!(self.place[k], Place::Basic(_))
                {
                    continue;
                }
                let a = self.tab[r * nc + k].abs();
                if a > best_abs {
                    best_abs = a;
                    best = k;
                }
            }
            if best != usize::MAX {
                self.x[b] = 0.0;
                self.place[b] = Place::Lower;
                self.basis[r] = best;
                self.place[best] = Place::Basic(r);
                self.pivot(r, best);
            }
        }
        for k in 0..nc {
            if matches!(self.columns[k], Column::Artificial { .. }) {
                self.enterable[k] = false;
                self.ub[k] = 0.0;
                if !matches!(self.place[k], Place::Basic(_)) {
                    self.x[k] = 0.0;
                }
            }
        }
    }

    /// Column of `[A_eq; A_ub | slacks | artificials]` for tableau column `k`.
    fn original_column(&self, k: usize) -> Vec<f64> {
        let m_eq = self.lp.num_eq();
        let mut col = vec![0.0; self.m];
        match self.columns[k] {
            Column::Structural(j) => {
                for (i, c) in col.iter_mut().enumerate() {
                    *c = coeff(self.lp, i, j);
                }
            }
            Column::Slack(i) => col[m_eq + i] = 1.0,
            Column::Artificial { row, negative } => col[row] = if negative { -1.0 } else { 1.0 },
        }
        col
    }

    /// Recomputes basic values from the basis matrix when the updated
    /// tableau has drifted.
    fn refine_primal(&mut self) -> Result<()> {
        let m = self.m;
        if m == 0 {
            return Ok(());
        }
        let mut rhs = self.rhs.clone();
        for k in 0..self.nc {
            if matches!(self.place[k], Place::Basic(_)) || self.x[k] == 0.0 {
                continue;
            }
            let col = self.original_column(k);
            for (r, c) in rhs.iter_mut().zip(&col) {
                *r -= c * self.x[k];
            }
        }
        let mut bmat = DMatrix::zeros(m, m);
        for (i, &b) in self.basis.iter().enumerate() {
            let col = self.original_column(b);
            for (r, c) in col.into_iter().enumerate() {
                bmat[(r, i)] = c;
            }
        }
        let lu = bmat.lu();
        let xb = lu
            .solve(&DVector::from_vec(rhs))
            .ok_or_else(|| Error::Numerical("singular basis".into()))?;
        for (i, &b) in self.basis.iter().enumerate() {
            self.x[b] = xb[i];
        }
        Ok(())
    }

    fn primal(&self) -> Vec<f64> {
        let mut z: Vec<f64> = self.fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
        for (k, col) in self.columns.iter().enumerate() {
            if let Column::Structural(j) = *col {
                z[j] = self.x[k];
            }
        }
        z
    }

    /// Row multipliers `y = c_B' B^-1` in the `[A_eq; A_ub]` row order.
    fn multipliers(&self) -> Vec<f64> {
        self.initial
            .iter()
            .map(|&(k, sign)| sign * (self.cost[k] - self.d[k]))
            .collect()
    }
}

/// Solves `problem` by the bounded-variable primal simplex.
pub fn solve_lp_with(
    problem: &LinearProgram,
    time_limit: Duration,
    tol: &Tolerances,
) -> Result<LpSolution> {
    problem.validate()?;
    let start = Instant::now();
    let deadline = start.checked_add(time_limit).unwrap_or(start + Duration::from_secs(u32::MAX as u64));
    let mut t = Tableau::new(problem);
    let max_iter = 50 * (t.m + t.nc) + 1000;
    let elapsed = |t: &Tableau| (start.elapsed().as_secs_f64(), t.iterations);

    if t.has_artificials() {
        t.set_costs(true);
        match t.iterate(deadline, max_iter)? {
            Outcome::TimeLimit => {
                let (w, it) = elapsed(&t);
                return Ok(LpSolution::without_point(Status::TimeLimit, w, it));
            }
            Outcome::Unbounded => {
                return Err(Error::Numerical("phase one reported unbounded".into()));
            }
            Outcome::Optimal => {}
        }
        let scale = 1.0 + t.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if t.artificial_sum() > tol.feas * scale {
            let (w, it) = elapsed(&t);
            return Ok(LpSolution::without_point(Status::Infeasible, w, it));
        }
        t.retire_artificials();
    }

    t.set_costs(false);
    match t.iterate(deadline, max_iter)? {
        Outcome::TimeLimit => {
            let (w, it) = elapsed(&t);
            return Ok(LpSolution::without_point(Status::TimeLimit, w, it));
        }
        Outcome::Unbounded => {
            let (w, it) = elapsed(&t);
            return Ok(LpSolution::without_point(Status::Unbounded, w, it));
        }
        Outcome::Optimal => {}
    }

    let mut z = t.primal();
    if problem.max_violation(&z) > 1e-9 * (1.0 + z.iter().fold(0.0f64, |a, b| a.max(b.abs()))) {
        t.refine_primal()?;
        z = t.primal();
    }

    let y = t.multipliers();
    let m_eq = problem.num_eq();
    let dual_eq = y[..m_eq].to_vec();
    let dual_ub: Vec<f64> = y[m_eq..].iter().map(|v| -v).collect();
    let reduced_costs = (0..problem.num_vars())
        .map(|j| {
            let ay: f64 = (0..t.m).map(|i| coeff(problem, i, j) * y[i]).sum();
            problem.objective[j] - ay
        })
        .collect();
    let objective = dot(&problem.objective, &z);
    Ok(LpSolution {
        status: Status::Optimal,
        primal: z,
        dual_eq,
        dual_ub,
        reduced_costs,
        objective,
        wall_time: start.elapsed().as_secs_f64(),
        iterations: t.iterations,
    })
}

//! Best-bound branch and bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{simplex::solve_lp_with, LinearProgram, LpSolution, Status, Tolerances};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MilpProblem {
    pub base: LinearProgram,
    /// Variables restricted to {0, 1}.
    pub binary_vars: Vec<usize>,
}

impl MilpProblem {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let n = self.base.num_vars();
        let mut seen = vec![false; n];
        for &j in &self.binary_vars {
            if j >= n {
                return Err(Error::InvalidProblem(format!("binary index {j} out of range")));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidProblem(format!("binary index {j} repeated")));
            }
            if self.base.var_bounds[j] != (0.0, 1.0) {
                return Err(Error::InvalidProblem(format!(
                    "binary variable {j} must have bounds [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

struct Node {
    bound: f64,
    depth: usize,
    /// `(variable, value)` fixings relative to the root.
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: the smallest bound pops first, deeper nodes first on ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
    }
}

/// Most fractional binary, lowest index on ties.
fn branching_candidate(z: &[f64], binaries: &[usize], int_tol: f64) -> Option<usize> {
    let mut best = None;
    let mut best_frac = int_tol;
    for &j in binaries {
        let frac = (z[j] - z[j].floor()).min(z[j].ceil() - z[j]);
        if frac > best_frac {
            best_frac = frac;
            best = Some(j);
        }
    }
    best
}

pub fn solve_milp(problem: &MilpProblem, time_limit: Duration) -> Result<LpSolution> {
    solve_milp_with(problem, time_limit, &Tolerances::default())
}

pub fn solve_milp_with(
    problem: &MilpProblem,
    time_limit: Duration,
    tol: &Tolerances,
) -> Result<LpSolution> {
    problem.validate()?;
    let start = Instant::now();
    let deadline = start + time_limit;
    let mut work = problem.base.clone();
    let root_bounds = problem.base.var_bounds.clone();

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        depth: 0,
        fixings: Vec::new(),
    });
    let mut incumbent: Option<LpSolution> = None;
    let mut nodes = 0usize;
    let mut timed_out = false;
    let prune_tol = |inc: f64| 1e-9 * inc.abs().max(1.0);

    while let Some(node) = heap.pop() {
        if let Some(inc) = &incumbent {
            if node.bound >= inc.objective - prune_tol(inc.objective) {
                continue;
            }
        }
        let now = Instant::now();
        if now >= deadline {
            timed_out = true;
            break;
        }
        nodes += 1;
        work.var_bounds.clone_from(&root_bounds);
        for &(j, v) in &node.fixings {
            work.var_bounds[j] = (v, v);
        }
        let relax = solve_lp_with(&work, deadline - now, tol)?;
        match relax.status {
            Status::TimeLimit => {
                timed_out = true;
                break;
            }
            Status::Infeasible => continue,
            Status::Unbounded => {
                if nodes == 1 {
                    let mut sol = LpSolution::without_point(Status::Unbounded, 0.0, nodes);
                    sol.wall_time = start.elapsed().as_secs_f64();
                    return Ok(sol);
                }
                // A bounded root cannot have an unbounded child.
                return Err(Error::Numerical("unbounded node below a bounded root".into()));
            }
            Status::Optimal => {}
        }
        if let Some(inc) = &incumbent {
            if relax.objective >= inc.objective - prune_tol(inc.objective) {
                continue;
            }
        }
        match branching_candidate(&relax.primal, &problem.binary_vars, tol.int) {
            None => incumbent = Some(relax),
            Some(j) => {
                for v in [1.0, 0.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, v));
                    heap.push(Node {
                        bound: relax.objective,
                        depth: node.depth + 1,
                        fixings,
                    });
                }
            }
        }
    }

    let wall_time = start.elapsed().as_secs_f64();
    let status = if timed_out {
        Status::TimeLimit
    } else if incumbent.is_some() {
        Status::Optimal
    } else {
        Status::Infeasible
    };
    Ok(match incumbent {
        Some(mut sol) => {
            for &j in &problem.binary_vars {
                sol.primal[j] = sol.primal[j].round();
            }
            sol.status = status;
            sol.wall_time = wall_time;
            sol.iterations = nodes;
            sol
        }
        None => LpSolution::without_point(status, wall_time, nodes),
    })
}

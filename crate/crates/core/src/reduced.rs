//! KKT LPs restricted to a given active set.
//!
//! Fixing which lower-level inequalities bind removes the complementarity
//! disjunctions. An active inequality becomes an equality and keeps a
//! nonnegative multiplier; an inactive one is dropped and its multiplier is
//! fixed at zero. What remains is a plain LP without binaries or big-M
//! constants.

use std::time::{Duration, Instant};

use crate::bilevel::{assemble_common, decode, encode, BilevelSolution, KktLayout};
use crate::dcopf::{build_dcopf, inequality_slacks, ActiveSet, DcopfSolution};
use crate::error::Result;
use crate::lp::{dot, solve_lp, LinearProgram, Status};
use crate::network::NetworkCase;

/// Absolute tolerance used when checking candidates against the full KKT
/// system. Equality residuals are scaled by the magnitude of their terms.
pub const FEASIBILITY_TOL: f64 = 1e-5;

pub fn build_reduced(case: &NetworkCase, active: &ActiveSet) -> Result<LinearProgram> {
    active.validate(case)?;
    let layout = KktLayout::new(case, false);
    let (mut lp, lower) = assemble_common(case, &layout);
    let ll = &lower.lp;
    for j in 0..layout.n_mu() {
        if active.get(j) {
            let terms: Vec<(usize, f64)> = ll.ub_matrix[j]
                .iter()
                .enumerate()
                .filter(|(_, a)| **a != 0.0)
                .map(|(k, a)| (layout.y0 + k, *a))
                .collect();
            lp.add_eq(&terms, ll.ub_rhs[j]);
        } else {
            lp.set_bounds(layout.mu(j), 0.0, 0.0);
        }
    }
    Ok(lp)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeasibilityOptions {
    pub tol: f64,
    /// Also require `min(μ_j, slack_j) <= tol` for every inequality.
    pub complementarity: bool,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        Self {
            tol: FEASIBILITY_TOL,
            complementarity: true,
        }
    }
}

/// Every way in which `(c_s, d)` fails the full KKT system of the market
/// clearing, as human-readable strings. Empty means feasible.
pub fn feasibility_violations(
    case: &NetworkCase,
    c_s: f64,
    d: &DcopfSolution,
    opts: &FeasibilityOptions,
) -> Vec<String> {
    let tol = opts.tol;
    let mut out = Vec::new();
    if d.p_g.len() != case.n_gen() || d.theta.len() != case.n_bus() || d.alpha.len() != case.n_bus() {
        out.push("dimension mismatch".to_string());
        return out;
    }
    let (lo, hi) = crate::bilevel::bid_bounds(case);
    if !(c_s >= lo - tol && c_s <= hi + tol) {
        out.push(format!("bid {c_s} outside [{lo}, {hi}]"));
    }

    let lower = build_dcopf(case, c_s);
    let layout = KktLayout::new(case, false);
    let z = encode(case, &layout, c_s, d);
    let y = &z[layout.y0..layout.y0 + layout.n_y()];
    let lambda = &z[layout.lambda0..layout.lambda0 + layout.n_lambda()];
    let mu = &z[layout.mu0..layout.mu0 + layout.n_mu()];

    for (r, (row, b)) in lower.eq_matrix.iter().zip(&lower.eq_rhs).enumerate() {
        let scale = 1.0 + b.abs() + row.iter().zip(y).map(|(a, v)| (a * v).abs()).fold(0.0, f64::max);
        let resid = dot(row, y) - b;
        if resid.abs() > tol * scale {
            out.push(format!("equality row {r} residual {resid:e}"));
        }
    }
    let slacks = inequality_slacks(case, &d.p_g, &d.flows);
    for (j, s) in slacks.iter().enumerate() {
        if *s < -tol {
            out.push(format!("inequality {j} violated by {:e}", -s));
        }
        if mu[j] < -tol {
            out.push(format!("multiplier {j} negative: {:e}", mu[j]));
        }
        if opts.complementarity && s.min(mu[j]) > tol {
            out.push(format!("inequality {j} slack {s:e} with multiplier {:e}", mu[j]));
        }
    }
    for k in 0..layout.n_y() {
        let mut terms = vec![lower.objective[k]];
        for (r, row) in lower.eq_matrix.iter().enumerate() {
            terms.push(-row[k] * lambda[r]);
        }
        for (j, row) in lower.ub_matrix.iter().enumerate() {
            terms.push(row[k] * mu[j]);
        }
        let resid: f64 = terms.iter().sum();
        let scale = 1.0 + terms.iter().fold(0.0, |a: f64, t| a.max(t.abs()));
        if resid.abs() > tol * scale {
            let what = if k < case.n_gen() {
                format!("generator {k}")
            } else {
                format!("angle {}", k - case.n_gen())
            };
            out.push(format!("stationarity for {what} residual {resid:e}"));
        }
    }
    out
}

pub fn check_feasibility(case: &NetworkCase, c_s: f64, d: &DcopfSolution, opts: &FeasibilityOptions) -> bool {
    feasibility_violations(case, c_s, d, opts).is_empty()
}

/// Candidate produced by one reduced LP.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub set: ActiveSet,
    pub status: Status,
    pub c_s: f64,
    pub profit: f64,
    pub dispatch: Option<DcopfSolution>,
    pub feasible: bool,
}

/// Solves the reduced LP for one active set and checks the result.
pub fn solve_reduced(
    case: &NetworkCase,
    active: &ActiveSet,
    time_limit: Duration,
    opts: &FeasibilityOptions,
) -> Result<Candidate> {
    let lp = build_reduced(case, active)?;
    let layout = KktLayout::new(case, false);
    let sol = solve_lp(&lp, time_limit)?;
    if sol.status != Status::Optimal {
        return Ok(Candidate {
            set: active.clone(),
            status: sol.status,
            c_s: f64::NAN,
            profit: f64::NAN,
            dispatch: None,
            feasible: false,
        });
    }
    let (c_s, profit, dispatch) = decode(case, &layout, &sol.primal, sol.objective);
    let feasible = check_feasibility(case, c_s, &dispatch, opts);
    Ok(Candidate {
        set: active.clone(),
        status: sol.status,
        c_s,
        profit,
        dispatch: Some(dispatch),
        feasible,
    })
}

/// True if `a` should replace the incumbent `b`: strictly more profit, or
/// equal profit and a lower bid.
fn better(a: &Candidate, b: &Candidate) -> bool {
    let tol = 1e-9 * a.profit.abs().max(b.profit.abs()).max(1.0);
    if a.profit > b.profit + tol {
        return true;
    }
    a.profit >= b.profit - tol && a.c_s < b.c_s
}

/// Solves one reduced LP per set and keeps the most profitable candidate
/// that passes the feasibility check. `lp_count` is the number of sets.
pub fn solve_with_sets(
    case: &NetworkCase,
    sets: &[ActiveSet],
    time_limit: Duration,
    opts: &FeasibilityOptions,
) -> Result<BilevelSolution> {
    let start = Instant::now();
    let deadline = start + time_limit;
    let mut best: Option<Candidate> = None;
    let mut timed_out = false;
    for set in sets {
        let left = deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            timed_out = true;
            break;
        }
        let cand = solve_reduced(case, set, left, opts)?;
        if cand.status == Status::TimeLimit {
            timed_out = true;
            break;
        }
        if !cand.feasible {
            continue;
        }
        if best.as_ref().map_or(true, |b| better(&cand, b)) {
            best = Some(cand);
        }
    }
    let wall_time = start.elapsed().as_secs_f64();
    let status = if timed_out { Status::TimeLimit } else { Status::Optimal };
    Ok(match best {
        Some(c) => BilevelSolution {
            c_s_star: c.c_s,
            profit: c.profit,
            dispatch: c.dispatch,
            status,
            wall_time,
            lp_count: sets.len(),
        },
        None if timed_out => BilevelSolution::without_point(Status::TimeLimit, wall_time, sets.len()),
        None => BilevelSolution::without_point(Status::Infeasible, wall_time, sets.len()),
    })
}

/// Every structurally valid active set of `case`: each generator at its
/// lower limit, its upper limit or neither, and likewise for each line.
/// There are `3^(n_gen + n_line)` of them, so this is only usable on toys.
pub fn enumerate_active_sets(case: &NetworkCase) -> Vec<ActiveSet> {
    let (ng, nl) = (case.n_gen(), case.n_line());
    let units = ng + nl;
    let total = 3usize.pow(units as u32);
    let mut out = Vec::with_capacity(total);
    for mut code in 0..total {
        let mut set = ActiveSet::for_case(case);
        for u in 0..units {
            let state = code % 3;
            code /= 3;
            let (lo, hi) = if u < ng { (u, ng + u) } else { (2 * ng + (u - ng), 2 * ng + nl + (u - ng)) };
            match state {
                1 => set.set(lo, true),
                2 => set.set(hi, true),
                _ => {}
            }
        }
        out.push(set);
    }
    out
}

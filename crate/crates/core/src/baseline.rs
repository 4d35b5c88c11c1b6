//! Big-M KKT MILP baseline.
//!
//! Each lower-level inequality `G_j y <= h_j` with multiplier `μ_j` gets a
//! binary `u_j` and the rows
//!
//! ```text
//! G_j y <= h_j
//! h_j − G_j y <= M_p u_j
//! μ_j        <= M_d (1 − u_j)
//! ```
//!
//! so `u_j = 0` marks the inequality active.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::bilevel::{assemble_common, decode, BilevelSolution, KktLayout};
use crate::dcopf::{inequality_slacks, DcopfSolution};
use crate::error::{Error, Result};
use crate::lp::{solve_milp, MilpProblem};
use crate::network::NetworkCase;

/// Safety factor applied to the largest values seen while sampling.
pub const BIG_M_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BigM {
    /// MW scale bounding primal slacks.
    pub m_primal: f64,
    /// $/MWh scale bounding inequality multipliers.
    pub m_dual: f64,
}

impl BigM {
    pub fn new(m_primal: f64, m_dual: f64) -> Result<Self> {
        for (name, v) in [("m_primal", m_primal), ("m_dual", m_dual)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { m_primal, m_dual })
    }
}

/// Largest magnitudes of the lower-level multipliers and primal slacks seen
/// over the market-clearing solves of a sampling run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DualMaxima {
    pub solves: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub primal_slack: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

impl DualMaxima {
    pub fn observe(&mut self, case: &NetworkCase, sol: &DcopfSolution) {
        self.solves += 1;
        self.alpha = self.alpha.max(max_abs(&sol.alpha));
        self.gamma = self.gamma.max(sol.gamma.abs());
        self.phi_min = self.phi_min.max(max_abs(&sol.phi_min));
        self.phi_max = self.phi_max.max(max_abs(&sol.phi_max));
        self.rho_min = self.rho_min.max(max_abs(&sol.rho_min));
        self.rho_max = self.rho_max.max(max_abs(&sol.rho_max));
        let slack = max_abs(&inequality_slacks(case, &sol.p_g, &sol.flows));
        self.primal_slack = self.primal_slack.max(slack);
    }

    pub fn merge(&mut self, other: &DualMaxima) {
        self.solves += other.solves;
        self.alpha = self.alpha.max(other.alpha);
        self.gamma = self.gamma.max(other.gamma);
        self.phi_min = self.phi_min.max(other.phi_min);
        self.phi_max = self.phi_max.max(other.phi_max);
        self.rho_min = self.rho_min.max(other.rho_min);
        self.rho_max = self.rho_max.max(other.rho_max);
        self.primal_slack = self.primal_slack.max(other.primal_slack);
    }

    pub fn max_dual(&self) -> f64 {
        [
            self.alpha,
            self.gamma,
            self.phi_min,
            self.phi_max,
            self.rho_min,
            self.rho_max,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Largest primal slack the physics allows: a generator's operating range
/// or twice a line rating.
pub fn physical_slack_bound(case: &NetworkCase) -> f64 {
    let gens = case.generators.iter().map(|g| g.p_max - g.p_min);
    let lines = case.lines.iter().map(|l| 2.0 * l.flow_limit);
    gens.chain(lines).fold(0.0, f64::max)
}

pub fn compute_big_m(maxima: &DualMaxima, case: &NetworkCase) -> Result<BigM> {
    if maxima.solves == 0 {
        return Err(Error::EmptyStatistics);
    }
    let m_dual = BIG_M_FACTOR * maxima.max_dual();
    let m_primal = (BIG_M_FACTOR * maxima.primal_slack).max(physical_slack_bound(case));
    BigM::new(m_primal, m_dual)
}

pub fn build_baseline(case: &NetworkCase, big_m: &BigM) -> MilpProblem {
    let layout = KktLayout::new(case, true);
    let (mut lp, lower) = assemble_common(case, &layout);
    let ll = &lower.lp;
    let mut binary_vars = Vec::with_capacity(layout.n_mu());
    for (j, (row, h)) in ll.ub_matrix.iter().zip(&ll.ub_rhs).enumerate() {
        let u = layout.binary(j).expect("baseline layout has binaries");
        lp.set_bounds(u, 0.0, 1.0);
        binary_vars.push(u);
        let g_terms: Vec<(usize, f64)> = row
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(k, a)| (layout.y0 + k, *a))
            .collect();
        lp.add_ub(&g_terms, *h);
        let mut slack_terms: Vec<(usize, f64)> = g_terms.iter().map(|&(k, a)| (k, -a)).collect();
        slack_terms.push((u, -big_m.m_primal));
        lp.add_ub(&slack_terms, -h);
        lp.add_ub(&[(layout.mu(j), 1.0), (u, big_m.m_dual)], big_m.m_dual);
    }
    MilpProblem {
        base: lp,
        binary_vars,
    }
}

pub fn solve_baseline(case: &NetworkCase, big_m: &BigM, time_limit: Duration) -> Result<BilevelSolution> {
    let milp = build_baseline(case, big_m);
    let layout = KktLayout::new(case, true);
    let sol = solve_milp(&milp, time_limit)?;
    if !sol.has_point() {
        return Ok(BilevelSolution::without_point(sol.status, sol.wall_time, sol.iterations));
    }
    let (c_s_star, profit, dispatch) = decode(case, &layout, &sol.primal, sol.objective);
    Ok(BilevelSolution {
        c_s_star,
        profit,
        dispatch: Some(dispatch),
        status: sol.status,
        wall_time: sol.wall_time,
        lp_count: sol.iterations,
    })
}

/// Slacks or multipliers that come within 1% of their big-M bound at a
/// baseline optimum; any entry means M may be cutting off solutions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BigMAudit {
    pub tight_slacks: Vec<usize>,
    pub tight_duals: Vec<usize>,
}

impl BigMAudit {
    pub fn is_clean(&self) -> bool {
        self.tight_slacks.is_empty() && self.tight_duals.is_empty()
    }
}

pub fn audit_big_m(case: &NetworkCase, big_m: &BigM, sol: &BilevelSolution) -> BigMAudit {
    let mut audit = BigMAudit::default();
    let Some(d) = &sol.dispatch else {
        return audit;
    };
    for (j, s) in inequality_slacks(case, &d.p_g, &d.flows).into_iter().enumerate() {
        if s >= 0.99 * big_m.m_primal {
            audit.tight_slacks.push(j);
        }
    }
    for (j, mu) in d.inequality_duals().into_iter().enumerate() {
        if mu >= 0.99 * big_m.m_dual {
            audit.tight_duals.push(j);
        }
    }
    audit
}

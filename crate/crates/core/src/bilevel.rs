//! Single-level KKT reformulation of the strategic-bidding bilevel program.
//!
//! The lower level is the market-clearing LP of [`crate::dcopf`], written
//! abstractly as `min c'y  s.t.  A y = b (λ),  G y <= h (μ)`. The strategic
//! generator's entry of `c` is the upper-level decision `c_S`. Both the big-M
//! baseline and the reduced LPs share the variable layout
//! `[c_S | y = (P_g, θ) | λ = (α, γ) | μ = (φ^min, φ^max, ρ^min, ρ^max)]`
//! and the rows assembled here:
//!
//! * primal equalities `A y = b`;
//! * stationarity `c(c_S) − A'λ + G'μ = 0`, one row per lower-level variable;
//! * the strong-duality form of the leader's objective,
//!   `c_1 P_s + Σ_{g≠s} c_g P_g − b'λ + Σ_{j∉s} h_j μ_j`, which equals
//!   `(c_1 − α_s) P_s` whenever complementarity holds.

use serde::{Deserialize, Serialize};

use crate::dcopf::{build_dcopf, line_flows, p_col, ActiveSet, DcopfSolution};
use crate::lp::{LinearProgram, Status};
use crate::network::NetworkCase;

/// Column offsets of the KKT variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KktLayout {
    pub n_gen: usize,
    pub n_bus: usize,
    pub n_line: usize,
    pub c_s: usize,
    pub y0: usize,
    pub lambda0: usize,
    pub mu0: usize,
    /// Start of the complementarity binaries, baseline only.
    pub bin0: Option<usize>,
    pub n_vars: usize,
}

impl KktLayout {
    pub fn new(case: &NetworkCase, with_binaries: bool) -> Self {
        let (n_gen, n_bus, n_line) = (case.n_gen(), case.n_bus(), case.n_line());
        let n_y = n_gen + n_bus;
        let n_lambda = n_bus + 1;
        let n_mu = 2 * (n_gen + n_line);
        let c_s = 0;
        let y0 = 1;
        let lambda0 = y0 + n_y;
        let mu0 = lambda0 + n_lambda;
        let end = mu0 + n_mu;
        let (bin0, n_vars) = if with_binaries {
            (Some(end), end + n_mu)
        } else {
            (None, end)
        };
        Self {
            n_gen,
            n_bus,
            n_line,
            c_s,
            y0,
            lambda0,
            mu0,
            bin0,
            n_vars,
        }
    }

    pub fn n_y(&self) -> usize {
        self.n_gen + self.n_bus
    }

    pub fn n_lambda(&self) -> usize {
        self.n_bus + 1
    }

    pub fn n_mu(&self) -> usize {
        2 * (self.n_gen + self.n_line)
    }

    pub fn p(&self, g: usize) -> usize {
        self.y0 + p_col(g)
    }

    pub fn theta(&self, i: usize) -> usize {
        self.y0 + self.n_gen + i
    }

    pub fn alpha(&self, i: usize) -> usize {
        self.lambda0 + i
    }

    pub fn gamma(&self) -> usize {
        self.lambda0 + self.n_bus
    }

    pub fn mu(&self, j: usize) -> usize {
        self.mu0 + j
    }

    pub fn binary(&self, j: usize) -> Option<usize> {
        self.bin0.map(|b| b + j)
    }
}

/// Lower-level data in matrix form, taken from the market-clearing LP.
pub(crate) struct LowerLevel {
    pub lp: LinearProgram,
    /// Inequality rows belonging to the strategic generator's limits.
    pub strategic_rows: [usize; 2],
}

impl LowerLevel {
    pub fn new(case: &NetworkCase) -> Self {
        let lp = build_dcopf(case, case.strategic().cost);
        let s = case.strategic_gen;
        Self {
            lp,
            strategic_rows: [s, case.n_gen() + s],
        }
    }
}

/// Bounds on `c_S`: between the true cost and ten times the most expensive
/// generator's cost.
pub fn bid_bounds(case: &NetworkCase) -> (f64, f64) {
    (case.strategic().cost, case.max_bid())
}

/// Allocates the KKT program and fills in everything shared by the baseline
/// and the reduced LPs: objective, bounds, primal equalities, stationarity.
pub(crate) fn assemble_common(case: &NetworkCase, layout: &KktLayout) -> (LinearProgram, LowerLevel) {
    let lower = LowerLevel::new(case);
    let ll = &lower.lp;
    let s = case.strategic_gen;
    let mut lp = LinearProgram::new(layout.n_vars);

    let (lo, hi) = bid_bounds(case);
    lp.set_bounds(layout.c_s, lo, hi);
    for k in 0..layout.n_y() {
        lp.set_bounds(layout.y0 + k, f64::NEG_INFINITY, f64::INFINITY);
    }
    for r in 0..layout.n_lambda() {
        lp.set_bounds(layout.lambda0 + r, f64::NEG_INFINITY, f64::INFINITY);
    }
    for j in 0..layout.n_mu() {
        lp.set_bounds(layout.mu(j), 0.0, f64::INFINITY);
    }

    // Leader objective (negated profit) in strong-duality form.
    for (g, gen) in case.generators.iter().enumerate() {
        lp.objective[layout.p(g)] = gen.cost;
    }
    for (r, b) in ll.eq_rhs.iter().enumerate() {
        lp.objective[layout.lambda0 + r] = -b;
    }
    for (j, h) in ll.ub_rhs.iter().enumerate() {
        if !lower.strategic_rows.contains(&j) {
            lp.objective[layout.mu(j)] = *h;
        }
    }

    for (row, b) in ll.eq_matrix.iter().zip(&ll.eq_rhs) {
        let terms: Vec<(usize, f64)> = row
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(k, a)| (layout.y0 + k, *a))
            .collect();
        lp.add_eq(&terms, *b);
    }

    for k in 0..layout.n_y() {
        let mut terms = Vec::new();
        let mut rhs = 0.0;
        if k == p_col(s) {
            terms.push((layout.c_s, 1.0));
        } else {
            rhs = -ll.objective[k];
        }
        for (r, row) in ll.eq_matrix.iter().enumerate() {
            if row[k] != 0.0 {
                terms.push((layout.lambda0 + r, -row[k]));
            }
        }
        for (j, row) in ll.ub_matrix.iter().enumerate() {
            if row[k] != 0.0 {
                terms.push((layout.mu(j), row[k]));
            }
        }
        lp.add_eq(&terms, rhs);
    }
    (lp, lower)
}

/// Outcome of one of the bilevel solution paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilevelSolution {
    pub c_s_star: f64,
    /// `(α_s − c_1)·P_s`, positive when the strategic generator earns money.
    pub profit: f64,
    pub dispatch: Option<DcopfSolution>,
    pub status: Status,
    pub wall_time: f64,
    pub lp_count: usize,
}

impl BilevelSolution {
    pub fn without_point(status: Status, wall_time: f64, lp_count: usize) -> Self {
        Self {
            c_s_star: f64::NAN,
            profit: f64::NAN,
            dispatch: None,
            status,
            wall_time,
            lp_count,
        }
    }

    pub fn has_point(&self) -> bool {
        self.dispatch.is_some()
    }

    /// Profit recomputed directly from the price and output, without the
    /// strong-duality substitution.
    pub fn direct_profit(&self, case: &NetworkCase) -> Option<f64> {
        self.dispatch.as_ref().map(|d| d.strategic_profit(case))
    }
}

/// Reads `(c_S, dispatch)` out of a KKT primal vector. The returned profit is
/// the negated leader objective.
pub(crate) fn decode(
    case: &NetworkCase,
    layout: &KktLayout,
    z: &[f64],
    leader_objective: f64,
) -> (f64, f64, DcopfSolution) {
    let c_s = z[layout.c_s];
    let p_g: Vec<f64> = (0..layout.n_gen).map(|g| z[layout.p(g)]).collect();
    let theta: Vec<f64> = (0..layout.n_bus).map(|i| z[layout.theta(i)]).collect();
    let flows = line_flows(case, &theta);
    let mu = |j: usize| z[layout.mu(j)];
    let (ng, nl) = (layout.n_gen, layout.n_line);
    let lower_cost = case
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| {
            let price = if g == case.strategic_gen { c_s } else { gen.cost };
            price * p_g[g]
        })
        .sum();
    let dispatch = DcopfSolution {
        alpha: (0..layout.n_bus).map(|i| z[layout.alpha(i)]).collect(),
        gamma: z[layout.gamma()],
        phi_min: (0..ng).map(mu).collect(),
        phi_max: (ng..2 * ng).map(mu).collect(),
        rho_min: (2 * ng..2 * ng + nl).map(mu).collect(),
        rho_max: (2 * ng + nl..2 * (ng + nl)).map(mu).collect(),
        p_g,
        theta,
        flows,
        objective: lower_cost,
    };
    (c_s, -leader_objective, dispatch)
}

/// Packs a candidate back into the KKT column layout (no binaries).
pub(crate) fn encode(case: &NetworkCase, layout: &KktLayout, c_s: f64, d: &DcopfSolution) -> Vec<f64> {
    let mut z = vec![0.0; layout.n_vars];
    z[layout.c_s] = c_s;
    for g in 0..layout.n_gen {
        z[layout.p(g)] = d.p_g[g];
    }
    for i in 0..layout.n_bus {
        z[layout.theta(i)] = d.theta[i];
        z[layout.alpha(i)] = d.alpha[i];
    }
    z[layout.gamma()] = d.gamma;
    for (j, mu) in d.inequality_duals().into_iter().enumerate() {
        z[layout.mu(j)] = mu;
    }
    debug_assert_eq!(d.p_g.len(), case.n_gen());
    z
}

/// Active set read off a KKT point with the dual rule.
pub fn active_set_of(case: &NetworkCase, d: &DcopfSolution, tol_dual: f64) -> ActiveSet {
    crate::dcopf::extract_active_set(case, d, tol_dual)
}

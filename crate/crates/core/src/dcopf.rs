//! Lower-level market clearing (DC optimal power flow) and its active set.
//!
//! Variables are the generator outputs followed by the bus angles, both free;
//! every physical limit is an explicit `<=` row so that its multiplier comes
//! back in `dual_ub`. Row order:
//!
//! * equalities: one power balance per bus (`α_i`), then `θ_ref = 0` (`γ`);
//! * inequalities: gen-min (`φ^min`), gen-max (`φ^max`), flow-min (`ρ^min`),
//!   flow-max (`ρ^max`), matching the bit order of [`ActiveSet`].

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpSolution, Status};
use crate::network::NetworkCase;

/// Dual threshold above which an inequality counts as active.
pub const TOL_DUAL: f64 = 1e-6;
/// Primal slack below which an inequality counts as binding.
pub const TOL_SLACK: f64 = 1e-6;

/// Column of generator `g`'s output.
pub fn p_col(g: usize) -> usize {
    g
}

/// Column of bus `i`'s angle.
pub fn theta_col(case: &NetworkCase, i: usize) -> usize {
    case.n_gen() + i
}

/// Equality row of the reference-angle constraint.
pub fn ref_row(case: &NetworkCase) -> usize {
    case.n_bus()
}

/// Builds the market-clearing LP with the strategic generator priced at `c_s`.
pub fn build_dcopf(case: &NetworkCase, c_s: f64) -> LinearProgram {
    let (ng, nb) = (case.n_gen(), case.n_bus());
    let mut lp = LinearProgram::new(ng + nb);
    for j in 0..ng + nb {
        lp.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY);
    }
    for (g, gen) in case.generators.iter().enumerate() {
        lp.objective[p_col(g)] = if g == case.strategic_gen { c_s } else { gen.cost };
    }

    // P_g - P_d - Σ outgoing flows = 0
    for i in 0..nb {
        let mut terms = Vec::new();
        for (g, gen) in case.generators.iter().enumerate() {
            if gen.bus == i {
                terms.push((p_col(g), 1.0));
            }
        }
        for line in &case.lines {
            let b = line.susceptance;
            if line.from == i {
                terms.push((theta_col(case, line.from), -b));
                terms.push((theta_col(case, line.to), b));
            } else if line.to == i {
                terms.push((theta_col(case, line.from), b));
                terms.push((theta_col(case, line.to), -b));
            }
        }
        lp.add_eq(&terms, case.loads[i]);
    }
    lp.add_eq(&[(theta_col(case, case.ref_bus), 1.0)], 0.0);

    for (g, gen) in case.generators.iter().enumerate() {
        lp.add_ub(&[(p_col(g), -1.0)], -gen.p_min);
    }
    for (g, gen) in case.generators.iter().enumerate() {
        lp.add_ub(&[(p_col(g), 1.0)], gen.p_max);
    }
    for sign in [-1.0, 1.0] {
        for line in &case.lines {
            let b = line.susceptance;
            lp.add_ub(
                &[
                    (theta_col(case, line.from), sign * b),
                    (theta_col(case, line.to), -sign * b),
                ],
                line.flow_limit,
            );
        }
    }
    lp
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcopfSolution {
    pub p_g: Vec<f64>,
    pub theta: Vec<f64>,
    pub flows: Vec<f64>,
    pub alpha: Vec<f64>,
    pub phi_min: Vec<f64>,
    pub phi_max: Vec<f64>,
    pub rho_min: Vec<f64>,
    pub rho_max: Vec<f64>,
    pub gamma: f64,
    pub objective: f64,
}

impl DcopfSolution {
    /// Splits an LP solution of [`build_dcopf`] into named blocks.
    pub fn from_lp(case: &NetworkCase, sol: &LpSolution) -> Self {
        let (ng, nb, nl) = (case.n_gen(), case.n_bus(), case.n_line());
        let z = &sol.primal;
        let theta: Vec<f64> = z[ng..ng + nb].to_vec();
        Self {
            p_g: z[..ng].to_vec(),
            flows: line_flows(case, &theta),
            theta,
            alpha: sol.dual_eq[..nb].to_vec(),
            gamma: sol.dual_eq[nb],
            phi_min: sol.dual_ub[..ng].to_vec(),
            phi_max: sol.dual_ub[ng..2 * ng].to_vec(),
            rho_min: sol.dual_ub[2 * ng..2 * ng + nl].to_vec(),
            rho_max: sol.dual_ub[2 * ng + nl..].to_vec(),
            objective: sol.objective,
        }
    }

    /// Inequality multipliers in [`ActiveSet`] bit order.
    pub fn inequality_duals(&self) -> Vec<f64> {
        [&self.phi_min, &self.phi_max, &self.rho_min, &self.rho_max]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    }

    /// Profit `(α_bus − c_true)·P` of the strategic generator.
    pub fn strategic_profit(&self, case: &NetworkCase) -> f64 {
        let s = case.strategic_gen;
        let gen = case.strategic();
        (self.alpha[gen.bus] - gen.cost) * self.p_g[s]
    }
}

pub fn line_flows(case: &NetworkCase, theta: &[f64]) -> Vec<f64> {
    case.lines
        .iter()
        .map(|l| l.susceptance * (theta[l.from] - theta[l.to]))
        .collect()
}

/// Slacks of the inequality rows in [`ActiveSet`] bit order.
pub fn inequality_slacks(case: &NetworkCase, p_g: &[f64], flows: &[f64]) -> Vec<f64> {
    let mut s = Vec::with_capacity(2 * (case.n_gen() + case.n_line()));
    s.extend(case.generators.iter().zip(p_g).map(|(g, p)| p - g.p_min));
    s.extend(case.generators.iter().zip(p_g).map(|(g, p)| g.p_max - p));
    s.extend(case.lines.iter().zip(flows).map(|(l, f)| l.flow_limit + f));
    s.extend(case.lines.iter().zip(flows).map(|(l, f)| l.flow_limit - f));
    s
}

pub fn solve_dcopf(case: &NetworkCase, c_s: f64, time_limit: Duration) -> Result<DcopfSolution> {
    let lp = build_dcopf(case, c_s);
    let sol = solve_lp(&lp, time_limit)?;
    match sol.status {
        Status::Optimal => Ok(DcopfSolution::from_lp(case, &sol)),
        status => Err(Error::MarketClearing(status)),
    }
}

/// Canonical bitset over the lower-level inequalities, ordered
/// `[gen-min…, gen-max…, flow-min…, flow-max…]`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActiveSet {
    n_gen: usize,
    n_line: usize,
    words: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    GenMin,
    GenMax,
    FlowMin,
    FlowMax,
}

impl ActiveSet {
    pub fn empty(n_gen: usize, n_line: usize) -> Self {
        let len = 2 * (n_gen + n_line);
        Self {
            n_gen,
            n_line,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn for_case(case: &NetworkCase) -> Self {
        Self::empty(case.n_gen(), case.n_line())
    }

    pub fn from_bits(n_gen: usize, n_line: usize, bits: &[bool]) -> Result<Self> {
        let mut set = Self::empty(n_gen, n_line);
        if bits.len() != set.len() {
            return Err(Error::Dimension {
                expected: set.len(),
                actual: bits.len(),
            });
        }
        for (j, &b) in bits.iter().enumerate() {
            set.set(j, b);
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        2 * (self.n_gen + self.n_line)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_gen(&self) -> usize {
        self.n_gen
    }

    pub fn n_line(&self) -> usize {
        self.n_line
    }

    pub fn index(&self, family: Family, k: usize) -> usize {
        match family {
            Family::GenMin => k,
            Family::GenMax => self.n_gen + k,
            Family::FlowMin => 2 * self.n_gen + k,
            Family::FlowMax => 2 * self.n_gen + self.n_line + k,
        }
    }

    pub fn get(&self, j: usize) -> bool {
        (self.words[j / 64] >> (j % 64)) & 1 == 1
    }

    pub fn set(&mut self, j: usize, on: bool) {
        assert!(j < self.len(), "bit {j} out of range");
        if on {
            self.words[j / 64] |= 1 << (j % 64);
        } else {
            self.words[j / 64] &= !(1 << (j % 64));
        }
    }

    pub fn is_active(&self, family: Family, k: usize) -> bool {
        self.get(self.index(family, k))
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&j| self.get(j))
    }

    /// Lower-case hex, most significant nibble first, `ceil(len / 4)` digits.
    pub fn to_hex(&self) -> String {
        let digits = self.len().div_ceil(4);
        (0..digits)
            .rev()
            .map(|d| {
                let mut nibble = 0u32;
                for b in 0..4 {
                    let j = 4 * d + b;
                    if j < self.len() && self.get(j) {
                        nibble |= 1 << b;
                    }
                }
                char::from_digit(nibble, 16).unwrap()
            })
            .collect()
    }

    pub fn from_hex(text: &str, n_gen: usize, n_line: usize) -> Result<Self> {
        let mut set = Self::empty(n_gen, n_line);
        let digits = set.len().div_ceil(4);
        if text.len() != digits {
            return Err(Error::InvalidActiveSet(format!(
                "expected {digits} hex digits, got {:?}",
                text
            )));
        }
        for (d, ch) in text.chars().rev().enumerate() {
            let nibble = ch
                .to_digit(16)
                .ok_or_else(|| Error::InvalidActiveSet(format!("bad hex digit {ch:?}")))?;
            for b in 0..4 {
                if nibble & (1 << b) != 0 {
                    let j = 4 * d + b;
                    if j >= set.len() {
                        return Err(Error::InvalidActiveSet(format!("bit {j} beyond length")));
                    }
                    set.set(j, true);
                }
            }
        }
        Ok(set)
    }

    /// A generator cannot sit at both limits unless they coincide, nor a line
    /// at both flow limits unless its rating is zero.
    pub fn validate(&self, case: &NetworkCase) -> Result<()> {
        if self.n_gen != case.n_gen() || self.n_line != case.n_line() {
            return Err(Error::InvalidActiveSet(format!(
                "set sized for {} generators/{} lines, case has {}/{}",
                self.n_gen,
                self.n_line,
                case.n_gen(),
                case.n_line()
            )));
        }
        for (g, gen) in case.generators.iter().enumerate() {
            if self.is_active(Family::GenMin, g)
                && self.is_active(Family::GenMax, g)
                && gen.p_min != gen.p_max
            {
                return Err(Error::InvalidActiveSet(format!(
                    "generator {g} at both limits"
                )));
            }
        }
        for (l, line) in case.lines.iter().enumerate() {
            if self.is_active(Family::FlowMin, l)
                && self.is_active(Family::FlowMax, l)
                && line.flow_limit != 0.0
            {
                return Err(Error::InvalidActiveSet(format!("line {l} at both limits")));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for ActiveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ActiveSet({})", self.to_hex())
    }
}

/// Bit `j` is set iff inequality `j`'s multiplier exceeds `tol_dual`.
pub fn extract_active_set(case: &NetworkCase, sol: &DcopfSolution, tol_dual: f64) -> ActiveSet {
    let mut set = ActiveSet::for_case(case);
    for (j, mu) in sol.inequality_duals().into_iter().enumerate() {
        if mu > tol_dual {
            set.set(j, true);
        }
    }
    set
}

/// Inequalities that bind (slack ≤ [`TOL_SLACK`]) while their multiplier
/// stays at or below `tol_dual`. The dual rule classifies these inactive.
pub fn degenerate_bindings(case: &NetworkCase, sol: &DcopfSolution, tol_dual: f64) -> usize {
    let slacks = inequality_slacks(case, &sol.p_g, &sol.flows);
    slacks
        .iter()
        .zip(sol.inequality_duals())
        .filter(|(s, mu)| **s <= TOL_SLACK && *mu <= tol_dual)
        .count()
}

/// Market clearing restricted to `active`: those inequalities become
/// equalities, the others are dropped.
pub fn build_reduced_dcopf(case: &NetworkCase, c_s: f64, active: &ActiveSet) -> LinearProgram {
    let full = build_dcopf(case, c_s);
    let mut lp = LinearProgram {
        objective: full.objective.clone(),
        eq_matrix: full.eq_matrix.clone(),
        eq_rhs: full.eq_rhs.clone(),
        ub_matrix: Vec::new(),
        ub_rhs: Vec::new(),
        var_bounds: full.var_bounds.clone(),
    };
    for j in active.iter_active() {
        lp.eq_matrix.push(full.ub_matrix[j].clone());
        lp.eq_rhs.push(full.ub_rhs[j]);
    }
    lp
}

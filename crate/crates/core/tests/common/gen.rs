//! Seeded random instances.

use std::path::PathBuf;
use std::time::Duration;

use activeset::baseline::{compute_big_m, BigM, DualMaxima};
use activeset::dataset::{c_s_grid, sample_load};
use activeset::dcopf::solve_dcopf;
use activeset::lp::{LinearProgram, MilpProblem};
use activeset::network::{load_case, scale_loads, Generator, Line, NetworkCase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const T: Duration = Duration::from_secs(30);

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> NetworkCase {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    load_case(path).expect("fixture loads")
}

/// A feasible LP with at most 6 variables and 10 rows, all variables boxed.
/// Roughly a third of the inequalities pass through the seed point, which
/// makes degenerate vertices common.
pub fn random_lp(rng: &mut impl Rng) -> LinearProgram {
    let n = rng.gen_range(1..=6);
    let rows = rng.gen_range(1..=10);
    let m_eq = rng.gen_range(0..=rows.min(n - 1).min(2));
    let mut lp = LinearProgram::new(n);
    lp.objective = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let mut x0 = Vec::with_capacity(n);
    for j in 0..n {
        let lo: f64 = rng.gen_range(-5.0..1.0);
        let hi = lo + rng.gen_range(0.5..10.0);
        lp.set_bounds(j, lo, hi);
        x0.push(rng.gen_range(lo..=hi));
    }
    for r in 0..rows {
        let terms: Vec<(usize, f64)> = (0..n)
            .filter_map(|j| rng.gen_bool(0.8).then(|| (j, rng.gen_range(-5.0..5.0))))
            .collect();
        let at_x0: f64 = terms.iter().map(|&(j, a)| a * x0[j]).sum();
        if r < m_eq {
            lp.add_eq(&terms, at_x0);
        } else {
            let slack = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..3.0) };
            lp.add_ub(&terms, at_x0 + slack);
        }
    }
    lp
}

/// A feasible MILP with 1–10 binaries and up to 3 boxed continuous variables.
pub fn random_milp(rng: &mut impl Rng) -> MilpProblem {
    let k = rng.gen_range(1..=10);
    let nc = rng.gen_range(0..=3);
    let n = k + nc;
    let mut lp = LinearProgram::new(n);
    lp.objective = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let mut x0 = Vec::with_capacity(n);
    for j in 0..n {
        if j < k {
            lp.set_bounds(j, 0.0, 1.0);
            x0.push(if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
        } else {
            let lo: f64 = rng.gen_range(-3.0..1.0);
            let hi = lo + rng.gen_range(0.5..5.0);
            lp.set_bounds(j, lo, hi);
            x0.push(rng.gen_range(lo..=hi));
        }
    }
    let rows = rng.gen_range(1..=6);
    for r in 0..rows {
        let terms: Vec<(usize, f64)> = (0..n)
            .filter_map(|j| rng.gen_bool(0.6).then(|| (j, rng.gen_range(-5.0..5.0))))
            .collect();
        let at_x0: f64 = terms.iter().map(|&(j, a)| a * x0[j]).sum();
        if r == 0 && nc > 0 && rng.gen_bool(0.3) {
            lp.add_eq(&terms, at_x0);
        } else {
            lp.add_ub(&terms, at_x0 + rng.gen_range(0.0..2.0));
        }
    }
    MilpProblem {
        base: lp,
        binary_vars: (0..k).collect(),
    }
}

/// A connected network with up to `max_bus` buses, `max_gen` generators and
/// `max_line` lines whose default load is servable at honest bids.
pub fn random_case(rng: &mut impl Rng, max_bus: usize, max_gen: usize, max_line: usize) -> NetworkCase {
    loop {
        let n_bus = rng.gen_range(max_bus.min(2)..=max_bus.min(max_line + 1));
        let mut lines = Vec::new();
        let line = |rng: &mut dyn rand::RngCore, from: usize, to: usize| Line {
            from,
            to,
            susceptance: rng.gen_range(5.0..20.0),
            flow_limit: rng.gen_range(20.0..120.0),
        };
        for i in 1..n_bus {
            let parent = rng.gen_range(0..i);
            lines.push(line(rng, parent, i));
        }
        if n_bus > 1 {
            let extra = rng.gen_range(0..=max_line - lines.len());
            for _ in 0..extra {
                let a = rng.gen_range(0..n_bus);
                let b = (a + rng.gen_range(1..n_bus)) % n_bus;
                lines.push(line(rng, a, b));
            }
        }
        let n_gen = rng.gen_range(1..=max_gen);
        let generators = (0..n_gen)
            .map(|_| Generator {
                bus: rng.gen_range(0..n_bus),
                cost: rng.gen_range(5.0..40.0),
                p_min: 0.0,
                p_max: rng.gen_range(40.0..200.0),
            })
            .collect();
        let loads = (0..n_bus)
            .map(|_| if rng.gen_bool(0.7) { rng.gen_range(5.0..80.0) } else { 0.0 })
            .collect();
        let case = NetworkCase {
            buses: (0..n_bus).collect(),
            lines,
            generators,
            loads,
            ref_bus: rng.gen_range(0..n_bus),
            strategic_gen: rng.gen_range(0..n_gen),
        };
        if case.validate().is_ok() && solve_dcopf(&case, case.strategic().cost, T).is_ok() {
            return case;
        }
    }
}

/// A load drawn from the `[(1 − x)·P_d, (1 + x)·P_d]` box that the
/// market can serve, applied to `case`.
pub fn servable_scenario(case: &NetworkCase, x: f64, rng: &mut impl Rng) -> NetworkCase {
    for _ in 0..10_000 {
        let load = sample_load(case, x, x, rng);
        let scenario = scale_loads(case, &load).unwrap();
        if solve_dcopf(&scenario, scenario.strategic().cost, T).is_ok() {
            return scenario;
        }
    }
    panic!("no servable load found");
}

/// Big-M constants from market clearings over the bid grid of every case.
pub fn big_m_for(cases: &[&NetworkCase]) -> BigM {
    let mut maxima = DualMaxima::default();
    for case in cases {
        for c_s in c_s_grid(case, 10).unwrap() {
            if let Ok(sol) = solve_dcopf(case, c_s, T) {
                maxima.observe(case, &sol);
            }
        }
    }
    compute_big_m(&maxima, cases[0]).unwrap()
}

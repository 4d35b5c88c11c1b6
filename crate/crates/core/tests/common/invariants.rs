//! One property per module invariant. Each takes a seed so the same checks
//! can run under `proptest!` and under the acceptance runner.

use std::collections::BTreeSet;
use std::time::Duration;

use activeset::baseline::{audit_big_m, build_baseline, solve_baseline, BigM};
use activeset::bilevel::{bid_bounds, KktLayout};
use activeset::dataset::{c_s_grid, generate_database, DatasetParams, Label, Method, SampleDatabase};
use activeset::dcopf::{
    build_dcopf, build_reduced_dcopf, extract_active_set, inequality_slacks, solve_dcopf, ActiveSet, TOL_DUAL,
};
use activeset::dtree::{feature_names, features, train_cart, train_model, Hyperparams, Node, TrainOptions};
use activeset::lp::{solve_lp, solve_milp, LinearProgram, LpSolution, Status};
use activeset::network::{load_case, save_case, scale_loads, LoadVector, NetworkCase};
use activeset::pipeline::{evaluate, report_from_log, run_method, EvalConfig, Outcome};
use activeset::reduced::{build_reduced, enumerate_active_sets, solve_with_sets, FeasibilityOptions};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::seq::SliceRandom;
use rand::Rng;

use super::gen::{big_m_for, fixture, random_case, random_lp, random_milp, rng, servable_scenario, T};
use super::oracle::{is_feasible, milp_min, vertex_min};

pub type Check = fn(u64) -> Result<(), TestCaseError>;

/// Every invariant, grouped by module, in the order the acceptance runner
/// reports them.
pub const ALL: &[(&str, &str, Check)] = &[
    ("lp_core", "optimal solutions satisfy all optimality conditions", lp_optimality),
    ("lp_core", "branch and bound equals binary enumeration", milp_enumeration),
    ("lp_core", "solves are deterministic", lp_determinism),
    ("network", "save then load is the identity", case_roundtrip),
    ("network", "scaling replaces only the loads", scale_loads_only),
    ("dcopf", "nonzero duals sit on binding rows", complementarity_audit),
    ("dcopf", "reduced clearing recovers the dispatch", reduced_dcopf_recovers),
    ("bilevel_baseline", "binary count is 2 n_gen + 2 n_line", binary_count_law),
    ("bilevel_baseline", "big-M audit and honest-bid bound hold", baseline_properties),
    ("reduced_bilevel", "all-set enumeration equals the baseline", oracle_equivalence),
    ("reduced_bilevel", "adding sets never lowers the profit", set_monotonicity),
    ("reduced_bilevel", "reduced LPs carry no big-M coefficient", no_big_m),
    ("dataset", "stored labels replay from the market clearing", label_replay),
    ("dtree", "every training sample reaches its own leaf", cart_structure),
    ("dtree", "parent extraction contains the plain prediction", parent_superset),
    ("dtree", "total-load feature equals the bus sum", feature_total),
    ("pipeline", "the log reproduces the report", log_reproduces_report),
    ("pipeline", "optimal runs replay through the market clearing", opt_replay),
];

/// Runs `check` on `cases` random seeds.
pub fn run(check: Check, cases: u32) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&any::<u64>(), check).map_err(|e| e.to_string())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---- lp_core ----

/// Checks the optimality conditions of `sol` from scratch: reduced costs are
/// recomputed from the duals rather than taken from the solver.
pub fn assert_kkt(lp: &LinearProgram, sol: &LpSolution) -> Result<(), TestCaseError> {
    let z = &sol.primal;
    prop_assert!(is_feasible(lp, z, 1e-7), "primal infeasible");
    for (j, (row, b)) in lp.ub_matrix.iter().zip(&lp.ub_rhs).enumerate() {
        let mu = sol.dual_ub[j];
        prop_assert!(mu >= -1e-7, "dual {j} negative: {mu}");
        let slack = b - dot(row, z);
        prop_assert!(mu * slack <= 1e-6, "complementarity {j}: {mu} * {slack}");
    }
    let mut dual = dot(&lp.eq_rhs, &sol.dual_eq) - dot(&lp.ub_rhs, &sol.dual_ub);
    for j in 0..lp.num_vars() {
        let mut r = lp.objective[j];
        for (row, l) in lp.eq_matrix.iter().zip(&sol.dual_eq) {
            r -= row[j] * l;
        }
        for (row, m) in lp.ub_matrix.iter().zip(&sol.dual_ub) {
            r += row[j] * m;
        }
        let (lo, hi) = lp.var_bounds[j];
        if r > 1e-9 {
            prop_assert!(lo.is_finite(), "variable {j} has no lower bound to price");
            dual += r * lo;
        } else if r < -1e-9 {
            prop_assert!(hi.is_finite(), "variable {j} has no upper bound to price");
            dual += r * hi;
        }
    }
    let primal = dot(&lp.objective, z);
    prop_assert!(
        (primal - dual).abs() <= 1e-6 * primal.abs().max(1.0),
        "duality gap: primal {primal} dual {dual}"
    );
    Ok(())
}

pub fn lp_optimality(seed: u64) -> Result<(), TestCaseError> {
    let lp = random_lp(&mut rng(seed));
    let sol = solve_lp(&lp, T).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(sol.status, Status::Optimal);
    assert_kkt(&lp, &sol)?;
    let (oracle, _) = vertex_min(&lp).expect("generated LPs are feasible");
    prop_assert!(close(sol.objective, oracle, 1e-6), "simplex {} vs vertices {oracle}", sol.objective);
    Ok(())
}

pub fn milp_enumeration(seed: u64) -> Result<(), TestCaseError> {
    let p = random_milp(&mut rng(seed));
    let sol = solve_milp(&p, T).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let oracle = milp_min(&p).expect("generated MILPs are feasible");
    prop_assert_eq!(sol.status, Status::Optimal);
    prop_assert!(close(sol.objective, oracle, 1e-6), "branch and bound {} vs enumeration {oracle}", sol.objective);
    for &j in &p.binary_vars {
        let v = sol.primal[j];
        prop_assert!(v.min(1.0 - v).abs() <= 1e-6, "binary {j} = {v}");
    }
    prop_assert!(is_feasible(&p.base, &sol.primal, 1e-7));
    Ok(())
}

pub fn lp_determinism(seed: u64) -> Result<(), TestCaseError> {
    let lp = random_lp(&mut rng(seed));
    let a = solve_lp(&lp, T).unwrap();
    let b = solve_lp(&lp.clone(), T).unwrap();
    prop_assert_eq!(&a.primal, &b.primal);
    prop_assert_eq!(&a.dual_eq, &b.dual_eq);
    prop_assert_eq!(&a.dual_ub, &b.dual_ub);
    let p = random_milp(&mut rng(seed));
    let a = solve_milp(&p, T).unwrap();
    let b = solve_milp(&p, T).unwrap();
    prop_assert_eq!(&a.primal, &b.primal);
    Ok(())
}

// ---- network ----

pub fn case_roundtrip(seed: u64) -> Result<(), TestCaseError> {
    let case = random_case(&mut rng(seed), 5, 4, 6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("case.json");
    save_case(&case, &path).unwrap();
    let back = load_case(&path).unwrap();
    prop_assert_eq!(&back, &case);
    for (a, b) in back.lines.iter().zip(&case.lines) {
        prop_assert_eq!(a.susceptance.to_bits(), b.susceptance.to_bits());
    }
    Ok(())
}

pub fn scale_loads_only(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let case = random_case(&mut r, 5, 4, 6);
    let before = case.clone();
    let load = LoadVector::new((0..case.n_bus()).map(|_| r.gen_range(0.0..100.0)).collect()).unwrap();
    let scaled = scale_loads(&case, &load).unwrap();
    prop_assert_eq!(&case, &before);
    prop_assert_eq!(&scaled.loads, &load.clone().into_inner());
    let mut restored = scaled.clone();
    restored.loads = case.loads.clone();
    prop_assert_eq!(&restored, &case);
    let short = LoadVector::new(vec![1.0; case.n_bus() + 1]).unwrap();
    prop_assert!(scale_loads(&case, &short).is_err());
    prop_assert!(LoadVector::new(vec![-1.0]).is_err());
    Ok(())
}

// ---- dcopf ----

fn random_bid(case: &NetworkCase, r: &mut impl Rng) -> f64 {
    let (lo, hi) = bid_bounds(case);
    r.gen_range(lo..=hi)
}

pub fn complementarity_audit(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let case = random_case(&mut r, 5, 4, 6);
    let case = servable_scenario(&case, 0.5, &mut r);
    let c_s = random_bid(&case, &mut r);
    let sol = solve_dcopf(&case, c_s, T).unwrap();
    let slacks = inequality_slacks(&case, &sol.p_g, &sol.flows);
    for (j, (mu, s)) in sol.inequality_duals().iter().zip(&slacks).enumerate() {
        prop_assert!(*s >= -1e-7, "row {j} violated by {}", -s);
        if *mu > TOL_DUAL {
            prop_assert!(*s <= 1e-6 * (1.0 + case.max_bid()), "row {j}: dual {mu} with slack {s}");
        }
    }
    prop_assert!(sol.theta[case.ref_bus].abs() <= 1e-9, "reference angle {}", sol.theta[case.ref_bus]);
    for i in 0..case.n_bus() {
        let gen: f64 = case.generators.iter().zip(&sol.p_g).filter(|(g, _)| g.bus == i).map(|(_, p)| p).sum();
        let out: f64 = case.lines.iter().zip(&sol.flows).filter(|(l, _)| l.from == i).map(|(_, f)| f).sum();
        let inn: f64 = case.lines.iter().zip(&sol.flows).filter(|(l, _)| l.to == i).map(|(_, f)| f).sum();
        let resid = gen - case.loads[i] - out + inn;
        prop_assert!(resid.abs() <= 1e-7 * (1.0 + case.loads[i] + gen), "bus {i} imbalance {resid}");
    }
    Ok(())
}

pub fn reduced_dcopf_recovers(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let case = random_case(&mut r, 5, 4, 6);
    let case = servable_scenario(&case, 0.5, &mut r);
    let c_s = random_bid(&case, &mut r);
    let full = build_dcopf(&case, c_s);
    let orig = solve_lp(&full, T).unwrap();
    let d = solve_dcopf(&case, c_s, T).unwrap();
    let set = extract_active_set(&case, &d, TOL_DUAL);
    let reduced = solve_lp(&build_reduced_dcopf(&case, c_s, &set), T).unwrap();
    prop_assert_eq!(reduced.status, Status::Optimal);
    prop_assert!(close(reduced.objective, orig.objective, 1e-7));
    for g in 0..case.n_gen() {
        let scale = 1.0 + case.generators[g].p_max;
        prop_assert!(
            (reduced.primal[g] - orig.primal[g]).abs() <= 1e-7 * scale,
            "generator {g}: {} vs {}",
            reduced.primal[g],
            orig.primal[g]
        );
    }
    Ok(())
}

// ---- bilevel_baseline ----

pub fn binary_count_law(seed: u64) -> Result<(), TestCaseError> {
    let case = random_case(&mut rng(seed), 8, 6, 10);
    let milp = build_baseline(&case, &BigM::new(123.0, 456.0).unwrap());
    let want = 2 * case.n_gen() + 2 * case.n_line();
    prop_assert_eq!(milp.binary_vars.len(), want);
    let unique: BTreeSet<usize> = milp.binary_vars.iter().copied().collect();
    prop_assert_eq!(unique.len(), want);
    for &j in &milp.binary_vars {
        prop_assert_eq!(milp.base.var_bounds[j], (0.0, 1.0));
    }
    Ok(())
}

pub fn baseline_properties(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let case = random_case(&mut r, 3, 3, 3);
    let scenario = servable_scenario(&case, 0.5, &mut r);
    let big_m = big_m_for(&[&scenario]);
    let sol = solve_baseline(&scenario, &big_m, T).unwrap();
    prop_assert_eq!(sol.status, Status::Optimal);
    let (lo, hi) = bid_bounds(&scenario);
    prop_assert!(sol.c_s_star >= lo - 1e-7 && sol.c_s_star <= hi + 1e-7, "bid {} outside [{lo}, {hi}]", sol.c_s_star);
    let honest = solve_dcopf(&scenario, lo, T).unwrap().strategic_profit(&scenario);
    prop_assert!(sol.profit >= honest - 1e-6 * honest.abs().max(1.0), "baseline {} below honest {honest}", sol.profit);
    prop_assert!(sol.profit >= -1e-6, "negative profit {}", sol.profit);
    let direct = sol.direct_profit(&scenario).unwrap();
    prop_assert!(close(direct, sol.profit, 1e-5), "objective {} vs price times output {direct}", sol.profit);
    let audit = audit_big_m(&scenario, &big_m, &sol);
    prop_assert!(audit.is_clean(), "big-M too small: {audit:?}");
    Ok(())
}

// ---- reduced_bilevel ----

fn profit_or_floor(sol: &activeset::bilevel::BilevelSolution) -> f64 {
    if sol.has_point() {
        sol.profit
    } else {
        f64::NEG_INFINITY
    }
}

pub fn oracle_equivalence(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let case = random_case(&mut r, 3, 3, 3);
    let scenario = servable_scenario(&case, 0.5, &mut r);
    let big_m = big_m_for(&[&scenario]);
    let base = solve_baseline(&scenario, &big_m, T).unwrap();
    let sets = enumerate_active_sets(&scenario);
    let best = solve_with_sets(&scenario, &sets, T, &FeasibilityOptions::default()).unwrap();
    prop_assert_eq!(best.status, Status::Optimal);
    prop_assert!(close(best.profit, base.profit, 1e-6), "enumeration {} vs baseline {}", best.profit, base.profit);
    Ok(())
}

pub fn set_monotonicity(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let case = random_case(&mut r, 3, 3, 3);
    let scenario = servable_scenario(&case, 0.5, &mut r);
    let mut sets = enumerate_active_sets(&scenario);
    sets.shuffle(&mut r);
    let k = r.gen_range(0..=sets.len().min(12));
    let extra = r.gen_range(1..=8);
    let small = &sets[..k];
    let large = &sets[..(k + extra).min(sets.len())];
    let opts = FeasibilityOptions::default();
    let a = solve_with_sets(&scenario, small, T, &opts).unwrap();
    let b = solve_with_sets(&scenario, large, T, &opts).unwrap();
    prop_assert!(profit_or_floor(&b) >= profit_or_floor(&a), "{} sets gave {}, {} sets gave {}", small.len(), a.profit, large.len(), b.profit);
    prop_assert_eq!(a.lp_count, small.len());
    prop_assert_eq!(b.lp_count, large.len());
    Ok(())
}

pub fn mentions(lp: &LinearProgram, value: f64) -> bool {
    let hit = |v: f64| v.abs() == value;
    lp.objective.iter().any(|&v| hit(v))
        || lp.eq_matrix.iter().flatten().any(|&v| hit(v))
        || lp.ub_matrix.iter().flatten().any(|&v| hit(v))
        || lp.eq_rhs.iter().chain(&lp.ub_rhs).any(|&v| hit(v))
        || lp.var_bounds.iter().any(|&(lo, hi)| hit(lo) || hit(hi))
}

pub fn no_big_m(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let case = random_case(&mut r, 4, 3, 4);
    let big_m = BigM::new(r.gen_range(1e3..1e5), r.gen_range(1e3..1e5)).unwrap();
    let milp = build_baseline(&case, &big_m);
    prop_assert!(mentions(&milp.base, big_m.m_primal) && mentions(&milp.base, big_m.m_dual));
    let layout = KktLayout::new(&case, false);
    let sets = enumerate_active_sets(&case);
    for _ in 0..5 {
        let set = sets.choose(&mut r).unwrap();
        let lp = build_reduced(&case, set).unwrap();
        prop_assert_eq!(lp.num_vars(), layout.n_vars);
        prop_assert!(lp.num_vars() < milp.base.num_vars());
        prop_assert!(!mentions(&lp, big_m.m_primal) && !mentions(&lp, big_m.m_dual));
        for (j, &(lo, hi)) in lp.var_bounds.iter().enumerate() {
            let binary_like = lo == 0.0 && hi == 1.0;
            prop_assert!(!binary_like, "column {j} looks like a binary");
        }
    }
    Ok(())
}

// ---- dataset ----

fn small_db(method: Method, case: &NetworkCase, seed: u64, batch: usize) -> SampleDatabase {
    let params = DatasetParams {
        batch,
        max_batches: 2,
        ..DatasetParams::default()
    };
    generate_database(method, case, &params, seed).unwrap()
}

pub fn label_replay(seed: u64) -> Result<(), TestCaseError> {
    let case = random_case(&mut rng(seed), 3, 3, 3);
    let grid = c_s_grid(&case, 10).unwrap();
    let params = DatasetParams {
        batch: 6,
        max_batches: 2,
        ..DatasetParams::default()
    };
    for method in Method::ALL {
        let db = match generate_database(method, &case, &params, seed) {
            Ok(db) => db,
            // Some random networks cannot serve any of the twelve draws.
            Err(activeset::Error::AllDrawsInfeasible) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert!(db.validate(&case).is_ok());
        let census = db.census();
        prop_assert_eq!(census.values().sum::<usize>(), db.samples.len());
        for s in &db.samples {
            for (pd, v) in case.loads.iter().zip(s.load.as_slice()) {
                prop_assert!(*v >= 0.5 * pd - 1e-9 && *v <= 1.5 * pd + 1e-9);
            }
            let scenario = scale_loads(&case, &s.load).unwrap();
            let sweep: Vec<(ActiveSet, f64)> = grid
                .iter()
                .map(|&c| {
                    let d = solve_dcopf(&scenario, c, T).unwrap();
                    (extract_active_set(&scenario, &d, TOL_DUAL), d.strategic_profit(&scenario))
                })
                .collect();
            match method {
                Method::VarLower => {
                    let c = s.c_s.expect("VarLower samples carry a bid");
                    let k = grid.iter().position(|&g| g == c).expect("bid lies on the grid");
                    prop_assert_eq!(&s.label, &Label::Single(sweep[k].0.clone()));
                }
                Method::AllSets => {
                    let all: BTreeSet<&ActiveSet> = sweep.iter().map(|(a, _)| a).collect();
                    let stored: BTreeSet<&ActiveSet> = s.label.sets().iter().collect();
                    prop_assert_eq!(stored, all);
                }
                Method::BestSet => {
                    let Label::Single(set) = &s.label else {
                        return Err(TestCaseError::fail("BestSet label holds several sets"));
                    };
                    let top = sweep.iter().map(|(_, p)| *p).fold(f64::NEG_INFINITY, f64::max);
                    let first = sweep.iter().position(|(_, p)| close(*p, top, 1e-9)).unwrap();
                    prop_assert_eq!(set, &sweep[first].0);
                }
            }
        }
    }
    Ok(())
}

// ---- dtree ----

fn synthetic(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>, Hyperparams) {
    let mut r = rng(seed);
    let n = r.gen_range(5..150);
    let d = r.gen_range(1..5);
    let k = r.gen_range(1..5);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| (r.gen_range(0.0..10.0_f64)).round()).collect()).collect();
    let y = x
        .iter()
        .map(|row| {
            if r.gen_bool(0.1) {
                r.gen_range(0..k)
            } else {
                (row[0] as usize + row[d - 1] as usize) % k
            }
        })
        .collect();
    let hp = Hyperparams {
        max_depth: r.gen_range(1..8),
        min_samples_leaf: r.gen_range(1..6),
    };
    (x, y, hp)
}

pub fn cart_structure(seed: u64) -> Result<(), TestCaseError> {
    let (x, y, hp) = synthetic(seed);
    let names = (0..x[0].len()).map(|i| format!("f{i}")).collect::<Vec<_>>();
    let tree = train_cart(&x, &y, names.clone(), &hp).unwrap();
    prop_assert!(tree.depth <= hp.max_depth);
    let mut seen = vec![0usize; x.len()];
    for (i, node) in tree.nodes.iter().enumerate() {
        match node {
            Node::Leaf { samples, .. } => {
                prop_assert!(samples.len() >= hp.min_samples_leaf || i == 0);
                for &s in samples {
                    seen[s] += 1;
                }
            }
            Node::Split {
                threshold, left, right, ..
            } => {
                prop_assert!(threshold.is_finite());
                prop_assert!(*left < tree.nodes.len() && *right < tree.nodes.len());
            }
        }
    }
    prop_assert!(seen.iter().all(|&c| c == 1), "every sample sits in exactly one leaf");
    for (i, row) in x.iter().enumerate() {
        let Node::Leaf { samples, .. } = &tree.nodes[tree.leaf(row)] else {
            return Err(TestCaseError::fail("path ends on a split"));
        };
        prop_assert!(samples.contains(&i), "sample {i} does not reach its leaf");
    }
    let again = train_cart(&x, &y, names, &hp).unwrap();
    prop_assert_eq!(&again, &tree);
    Ok(())
}

pub fn parent_superset(seed: u64) -> Result<(), TestCaseError> {
    let (x, y, hp) = synthetic(seed);
    let names = (0..x[0].len()).map(|i| format!("f{i}")).collect::<Vec<_>>();
    let tree = train_cart(&x, &y, names, &hp).unwrap();
    let mut r = rng(seed ^ 1);
    for _ in 0..20 {
        let probe: Vec<f64> = (0..x[0].len()).map(|_| r.gen_range(-1.0..11.0)).collect();
        prop_assert!(tree.parent_classes(&probe).contains(&tree.predict(&probe)));
    }
    let case = fixture("toy3.json");
    let method = Method::ALL[(seed % 3) as usize];
    let db = small_db(method, &case, seed, 15);
    let opts = TrainOptions {
        budget: 1,
        hyperparams: Some(Hyperparams {
            max_depth: 1 + (seed % 4) as usize,
            min_samples_leaf: 1,
        }),
        ..TrainOptions::default()
    };
    let model = train_model(&db, &opts, seed).unwrap();
    for _ in 0..10 {
        let load = activeset::dataset::sample_load(&case, 0.5, 0.5, &mut r);
        let plain = model.predict_sets(&load).unwrap();
        let parent = model.predict_with_parent(&load).unwrap();
        prop_assert!(!plain.is_empty());
        // VarLower sub-trees may agree; parent mode keeps one copy.
        let mut distinct: Vec<ActiveSet> = Vec::new();
        for set in &plain {
            if !distinct.contains(set) {
                distinct.push(set.clone());
            }
        }
        prop_assert_eq!(&parent[..distinct.len()], &distinct[..]);
        prop_assert_eq!(&model.predict_sets(&load).unwrap(), &plain);
    }
    Ok(())
}

pub fn feature_total(seed: u64) -> Result<(), TestCaseError> {
    let mut r = rng(seed);
    let n = r.gen_range(1..40);
    let load: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..1000.0)).collect();
    let bid = r.gen_bool(0.5).then(|| r.gen_range(0.0..500.0));
    let x = features(&load, true, bid);
    prop_assert_eq!(x.len(), feature_names(n, true, bid.is_some()).len());
    let sum: f64 = load.iter().sum();
    prop_assert!(close(x[n], sum, 1e-9));
    prop_assert_eq!(&x[..n], &load[..]);
    prop_assert_eq!(features(&load, false, None).len(), n);
    Ok(())
}

// ---- pipeline ----

fn toy_evaluation(seed: u64, n: usize) -> (NetworkCase, Vec<activeset::dtree::TrainedModel>, BigM, EvalConfig) {
    let case = fixture("toy3.json");
    let mut maxima = activeset::baseline::DualMaxima::default();
    let models = Method::ALL
        .iter()
        .map(|&m| {
            let db = small_db(m, &case, seed, 15);
            maxima.merge(&db.dual_maxima);
            let opts = TrainOptions {
                budget: 2,
                ..TrainOptions::default()
            };
            train_model(&db, &opts, seed).unwrap()
        })
        .collect();
    let big_m = activeset::baseline::compute_big_m(&maxima, &case).unwrap();
    let cfg = EvalConfig {
        n_scenarios: n,
        time_limit: Duration::from_secs(30),
        seed,
        parent: seed % 2 == 0,
        x_m: 0.5,
        x_p: 0.5,
    };
    (case, models, big_m, cfg)
}

pub fn log_reproduces_report(seed: u64) -> Result<(), TestCaseError> {
    let (case, models, big_m, cfg) = toy_evaluation(seed, 4);
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("eval.jsonl");
    let (report, records) = evaluate(&case, &models, &big_m, &cfg, Some(&log)).unwrap();
    prop_assert_eq!(&report_from_log(&log).unwrap(), &report);
    prop_assert_eq!(records.len(), cfg.n_scenarios);
    let tractable = records.iter().filter(|r| r.baseline.status == Status::Optimal).count();
    prop_assert_eq!(report.tractable, tractable);
    prop_assert!(report.baseline.mean_duration >= 0.0);
    for (m, row) in report.methods.iter().enumerate() {
        prop_assert!(row.mean_duration >= 0.0);
        let count = |o: Outcome| records.iter().filter(|r| r.methods[m].outcome == o).count();
        let pct = |c: usize| 100.0 * c as f64 / tractable as f64;
        if tractable > 0 {
            let total = row.pct_opt + row.pct_inf + row.pct_subopt + pct(count(Outcome::Timeout));
            prop_assert!((total - 100.0).abs() < 1e-9, "percentages sum to {total}");
            prop_assert_eq!(row.pct_inf, pct(count(Outcome::Infeasible)));
        }
        for r in &records {
            let infeasible = r.methods[m].run.status == Status::Infeasible;
            let tested = r.baseline.status == Status::Optimal;
            prop_assert_eq!(r.methods[m].outcome == Outcome::Infeasible, infeasible && tested);
        }
    }
    Ok(())
}

pub fn opt_replay(seed: u64) -> Result<(), TestCaseError> {
    let (case, models, big_m, cfg) = toy_evaluation(seed, 4);
    let (_, records) = evaluate(&case, &models, &big_m, &cfg, None).unwrap();
    for r in &records {
        let scenario = scale_loads(&case, &r.load).unwrap();
        for (m, rec) in r.methods.iter().enumerate() {
            if rec.outcome != Outcome::Optimal {
                continue;
            }
            let c_s = rec.run.c_s.unwrap();
            let claimed = rec.run.profit.unwrap();
            let sol = run_method(&case, &r.load, &models[m], cfg.time_limit, cfg.parent).unwrap();
            let d = sol.dispatch.as_ref().unwrap();
            prop_assert_eq!(sol.c_s_star, c_s);
            prop_assert!(close(d.strategic_profit(&scenario), claimed, 1e-6));
            let replay = solve_dcopf(&scenario, c_s, T).unwrap();
            prop_assert!(
                close(replay.objective, d.objective, 1e-7),
                "dispatch is not a market-clearing optimum at bid {c_s}"
            );
            prop_assert!(
                close(replay.strategic_profit(&scenario), claimed, 1e-6),
                "replayed profit {} vs claimed {claimed} at bid {c_s}",
                replay.strategic_profit(&scenario)
            );
        }
    }
    Ok(())
}

//! End-to-end evaluation: draw load scenarios, solve each with the big-M
//! baseline and with every trained method, and score the methods against
//! the baseline.
//!
//! Per-scenario results are written to a JSON-lines log as they are
//! produced; the report is an aggregate of those records and can be rebuilt
//! from the log alone.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::{build_baseline, solve_baseline, BigM};
use crate::bilevel::BilevelSolution;
use crate::dataset::{sample_load, Method};
use crate::dcopf::{solve_dcopf, ActiveSet};
use crate::dtree::TrainedModel;
use crate::error::{Error, Result};
use crate::lp::Status;
use crate::network::{scale_loads, LoadVector, NetworkCase};
use crate::reduced::{build_reduced, solve_with_sets, FeasibilityOptions};

/// Relative tolerance for counting a method's profit as optimal.
pub const OPT_TOL: f64 = 1e-6;

/// Give up on finding a servable load after this many draws in a row.
const MAX_REDRAWS: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub n_scenarios: usize,
    pub time_limit: Duration,
    pub seed: u64,
    /// Use parent-node extraction instead of plain predictions.
    pub parent: bool,
    pub x_m: f64,
    pub x_p: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_scenarios: 1000,
            time_limit: Duration::from_secs(300),
            seed: 0,
            parent: false,
            x_m: 0.5,
            x_p: 0.5,
        }
    }
}

/// Predicts candidate sets for `load` and solves their reduced LPs. The
/// returned wall time covers prediction and all LP solves.
pub fn run_method(
    case: &NetworkCase,
    load: &LoadVector,
    model: &TrainedModel,
    time_limit: Duration,
    parent: bool,
) -> Result<BilevelSolution> {
    let start = Instant::now();
    let scenario = scale_loads(case, load)?;
    let sets = predict(model, load, parent)?;
    let left = time_limit.saturating_sub(start.elapsed());
    let mut sol = solve_with_sets(&scenario, &sets, left, &FeasibilityOptions::default())?;
    sol.wall_time = start.elapsed().as_secs_f64();
    Ok(sol)
}

fn predict(model: &TrainedModel, load: &LoadVector, parent: bool) -> Result<Vec<ActiveSet>> {
    if parent {
        model.predict_with_parent(load)
    } else {
        model.predict_sets(load)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Optimal,
    Suboptimal,
    Infeasible,
    Timeout,
    /// The baseline timed out, so there is nothing to compare against.
    Untested,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub status: Status,
    pub profit: Option<f64>,
    pub c_s: Option<f64>,
    pub wall_time: f64,
    pub lp_count: usize,
}

impl From<&BilevelSolution> for RunRecord {
    fn from(s: &BilevelSolution) -> Self {
        let point = s.has_point();
        Self {
            status: s.status,
            profit: point.then_some(s.profit),
            c_s: point.then_some(s.c_s_star),
            wall_time: s.wall_time,
            lp_count: s.lp_count,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: Method,
    pub run: RunRecord,
    pub outcome: Outcome,
    /// Profit strictly above the baseline's (beyond tolerance).
    pub above_baseline: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub index: usize,
    pub load: LoadVector,
    pub baseline: RunRecord,
    pub methods: Vec<MethodRecord>,
}

/// Fixed facts about an evaluation run, stored as the first log line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMeta {
    pub seed: u64,
    pub parent: bool,
    pub methods: Vec<Method>,
    pub baseline_binaries: usize,
    pub baseline_constraints: usize,
    /// Rows of one reduced LP per method (the first predicted set of the
    /// first scenario).
    pub reduced_constraints: Vec<usize>,
    pub time_limit: f64,
}

pub fn classify(baseline: &RunRecord, run: &RunRecord) -> (Outcome, bool) {
    let Some(base) = baseline.profit.filter(|_| baseline.status == Status::Optimal) else {
        return (Outcome::Untested, false);
    };
    let Some(profit) = run.profit else {
        return match run.status {
            Status::TimeLimit => (Outcome::Timeout, false),
            _ => (Outcome::Infeasible, false),
        };
    };
    let tol = OPT_TOL * base.abs().max(1.0);
    if profit >= base - tol {
        (Outcome::Optimal, profit > base + tol)
    } else if run.status == Status::TimeLimit {
        (Outcome::Timeout, false)
    } else {
        (Outcome::Suboptimal, false)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub mean_duration: f64,
    pub median_duration: f64,
    pub mean_lp_count: f64,
    pub binaries: usize,
    pub constraints: usize,
    pub timeouts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: Method,
    pub mean_duration: f64,
    pub median_duration: f64,
    pub mean_lp_count: f64,
    pub constraints: usize,
    pub pct_opt: f64,
    pub pct_inf: f64,
    pub pct_subopt: f64,
    pub timeouts: usize,
    pub above_baseline: usize,
    /// Mean method duration over mean baseline duration.
    pub ratio_of_means: f64,
    pub ratio_of_medians: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seed: u64,
    pub parent: bool,
    pub scenarios: usize,
    /// Scenarios the baseline solved to optimality; percentages use this
    /// denominator.
    pub tractable: usize,
    pub baseline: BaselineRow,
    pub methods: Vec<MethodRow>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        f64::NAN
    }
}

/// Aggregates per-scenario records into the report. Durations and
/// percentages are taken over the scenarios the baseline solved.
pub fn aggregate(meta: &EvalMeta, records: &[ScenarioRecord]) -> EvaluationReport {
    let tractable: Vec<&ScenarioRecord> = records.iter().filter(|r| r.baseline.status == Status::Optimal).collect();
    let n = tractable.len();
    let base_times: Vec<f64> = tractable.iter().map(|r| r.baseline.wall_time).collect();
    let base_lps: Vec<f64> = tractable.iter().map(|r| r.baseline.lp_count as f64).collect();
    let baseline = BaselineRow {
        mean_duration: mean(&base_times),
        median_duration: median(&base_times),
        mean_lp_count: mean(&base_lps),
        binaries: meta.baseline_binaries,
        constraints: meta.baseline_constraints,
        timeouts: records.len() - n,
    };
    let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
    let methods = meta
        .methods
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            let runs: Vec<&MethodRecord> = tractable.iter().map(|r| &r.methods[m]).collect();
            let times: Vec<f64> = runs.iter().map(|r| r.run.wall_time).collect();
            let lps: Vec<f64> = runs.iter().map(|r| r.run.lp_count as f64).collect();
            let count = |o: Outcome| runs.iter().filter(|r| r.outcome == o).count();
            let (opt, inf) = (count(Outcome::Optimal), count(Outcome::Infeasible));
            let row = MethodRow {
                method,
                mean_duration: mean(&times),
                median_duration: median(&times),
                mean_lp_count: mean(&lps),
                constraints: meta.reduced_constraints.get(m).copied().unwrap_or(0),
                pct_opt: pct(opt),
                pct_inf: pct(inf),
                pct_subopt: pct(n - opt - inf),
                timeouts: count(Outcome::Timeout),
                above_baseline: runs.iter().filter(|r| r.above_baseline).count(),
                ratio_of_means: 0.0,
                ratio_of_medians: 0.0,
            };
            MethodRow {
                ratio_of_means: ratio(row.mean_duration, baseline.mean_duration),
                ratio_of_medians: ratio(row.median_duration, baseline.median_duration),
                ..row
            }
        })
        .collect();
    EvaluationReport {
        seed: meta.seed,
        parent: meta.parent,
        scenarios: records.len(),
        tractable: n,
        baseline,
        methods,
    }
}

/// Draws a load the market can serve at honest bidding.
fn draw_servable_load(case: &NetworkCase, cfg: &EvalConfig, rng: &mut ChaCha8Rng) -> Result<LoadVector> {
    for _ in 0..MAX_REDRAWS {
        let load = sample_load(case, cfg.x_m, cfg.x_p, rng);
        let scenario = scale_loads(case, &load)?;
        match solve_dcopf(&scenario, case.strategic().cost, cfg.time_limit) {
            Ok(_) => return Ok(load),
            Err(Error::MarketClearing(Status::Infeasible)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::AllDrawsInfeasible)
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum LogLine {
    Meta(EvalMeta),
    Scenario(ScenarioRecord),
}

/// Runs the evaluation. With `log` set, the run metadata and every
/// scenario record are streamed there as JSON lines.
pub fn evaluate(
    case: &NetworkCase,
    models: &[TrainedModel],
    big_m: &BigM,
    cfg: &EvalConfig,
    log: Option<&Path>,
) -> Result<(EvaluationReport, Vec<ScenarioRecord>)> {
    case.validate()?;
    for m in models {
        if (m.n_bus, m.n_gen, m.n_line) != (case.n_bus(), case.n_gen(), case.n_line()) {
            return Err(Error::InvalidParameter(format!("{} model does not match the case dimensions", m.method)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut writer = match log {
        Some(p) => Some((p, BufWriter::new(std::fs::File::create(p).map_err(|e| Error::io(p, e))?))),
        None => None,
    };
    let mut emit = |line: &LogLine| -> Result<()> {
        if let Some((p, w)) = writer.as_mut() {
            let text = serde_json::to_string(line).map_err(|e| Error::json("evaluation log", e))?;
            writeln!(w, "{text}").map_err(|e| Error::io(*p, e))?;
        }
        Ok(())
    };

    let mut records = Vec::with_capacity(cfg.n_scenarios);
    let mut meta = EvalMeta {
        seed: cfg.seed,
        parent: cfg.parent,
        methods: models.iter().map(|m| m.method).collect(),
        baseline_binaries: 0,
        baseline_constraints: 0,
        reduced_constraints: Vec::new(),
        time_limit: cfg.time_limit.as_secs_f64(),
    };
    let milp = build_baseline(case, big_m);
    meta.baseline_binaries = milp.binary_vars.len();
    meta.baseline_constraints = milp.base.num_rows();

    for index in 0..cfg.n_scenarios {
        let load = draw_servable_load(case, cfg, &mut rng)?;
        if index == 0 {
            for m in models {
                let sets = predict(m, &load, cfg.parent)?;
                meta.reduced_constraints.push(build_reduced(case, &sets[0])?.num_rows());
            }
            emit(&LogLine::Meta(meta.clone()))?;
        }
        let scenario = scale_loads(case, &load)?;
        let base = RunRecord::from(&solve_baseline(&scenario, big_m, cfg.time_limit)?);
        let mut methods = Vec::with_capacity(models.len());
        for m in models {
            let run = RunRecord::from(&run_method(case, &load, m, cfg.time_limit, cfg.parent)?);
            let (outcome, above_baseline) = classify(&base, &run);
            methods.push(MethodRecord {
                method: m.method,
                run,
                outcome,
                above_baseline,
            });
        }
        let rec = ScenarioRecord {
            index,
            load,
            baseline: base,
            methods,
        };
        emit(&LogLine::Scenario(rec.clone()))?;
        records.push(rec);
        if (index + 1) % 100 == 0 {
            log::info!("evaluated {} of {} scenarios", index + 1, cfg.n_scenarios);
        }
    }
    if cfg.n_scenarios == 0 {
        emit(&LogLine::Meta(meta.clone()))?;
    }
    if let Some((p, w)) = writer.as_mut() {
        w.flush().map_err(|e| Error::io(*p, e))?;
    }
    Ok((aggregate(&meta, &records), records))
}

/// Rebuilds the report from an evaluation log.
pub fn report_from_log(path: impl AsRef<Path>) -> Result<EvaluationReport> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut meta = None;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: format!("line {}: {e}", i + 1),
        })?;
        match parsed {
            LogLine::Meta(m) => meta = Some(m),
            LogLine::Scenario(r) => records.push(r),
        }
    }
    let meta = meta.ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        reason: "no metadata record".into(),
    })?;
    Ok(aggregate(&meta, &records))
}

impl EvaluationReport {
    /// Aligned text table: one baseline row, then one row per method.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>12} {:>6} {:>6} {:>8} {:>7} {:>7} {:>7} {:>8}",
            "Method", "Duration(s)", "#Bin", "#Cstr", "#LPs", "%Opt", "%Inf", "%Sub", "Ratio"
        );
        let b = &self.baseline;
        let _ = writeln!(
            out,
            "{:<10} {:>12.6} {:>6} {:>6} {:>8.1} {:>7} {:>7} {:>7} {:>8}",
            "baseline", b.mean_duration, b.binaries, b.constraints, b.mean_lp_count, "-", "-", "-", "1.000"
        );
        for m in &self.methods {
            let _ = writeln!(
                out,
                "{:<10} {:>12.6} {:>6} {:>6} {:>8.1} {:>7.1} {:>7.1} {:>7.1} {:>8.3}",
                m.method.name(),
                m.mean_duration,
                0,
                m.constraints,
                m.mean_lp_count,
                m.pct_opt,
                m.pct_inf,
                m.pct_subopt,
                m.ratio_of_means
            );
        }
        let _ = writeln!(
            out,
            "{} scenarios, {} solved by the baseline, {} baseline timeouts, seed {}{}",
            self.scenarios,
            self.tractable,
            b.timeouts,
            self.seed,
            if self.parent { ", parent extraction" } else { "" }
        );
        out
    }
}

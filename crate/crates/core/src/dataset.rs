//! Labeled databases of (load, [bid]) → active set(s), built by sampling
//! loads and clearing the market over a grid of strategic bids.
//!
//! Sampling stops once the Good-Turing estimate of the probability mass of
//! labels not yet seen (labels seen exactly once divided by the number of
//! samples) stays below `delta` for two consecutive batches, or after
//! `max_batches` batches.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::DualMaxima;
use crate::dcopf::{degenerate_bindings, extract_active_set, solve_dcopf, ActiveSet, TOL_DUAL};
use crate::error::{Error, Result};
use crate::lp::Status;
use crate::network::{scale_loads, LoadVector, NetworkCase};

/// Per-solve limit for the market clearings run while sampling.
const CLEARING_LIMIT: Duration = Duration::from_secs(60);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    VarLower,
    AllSets,
    BestSet,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::VarLower, Method::AllSets, Method::BestSet];

    pub fn name(self) -> &'static str {
        match self {
            Method::VarLower => "varlower",
            Method::AllSets => "allsets",
            Method::BestSet => "bestset",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "varlower" => Ok(Method::VarLower),
            "allsets" => Ok(Method::AllSets),
            "bestset" => Ok(Method::BestSet),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

/// A class label: one active set, or the sorted, duplicate-free list of
/// active sets observed across the bid grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Single(ActiveSet),
    Multi(Vec<ActiveSet>),
}

impl Label {
    pub fn multi(mut sets: Vec<ActiveSet>) -> Self {
        sets.sort();
        sets.dedup();
        Label::Multi(sets)
    }

    pub fn sets(&self) -> &[ActiveSet] {
        match self {
            Label::Single(s) => std::slice::from_ref(s),
            Label::Multi(v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub load: LoadVector,
    /// Bid the label was computed at, VarLower only.
    pub c_s: Option<f64>,
    pub label: Label,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    /// Loads are drawn per bus from `[(1 − x_m)·P_d, (1 + x_p)·P_d]`.
    pub x_m: f64,
    pub x_p: f64,
    pub grid: usize,
    /// Stop once the estimated unseen label mass stays below this.
    pub delta: f64,
    /// Load draws per batch.
    pub batch: usize,
    /// Cap on the number of batches.
    pub max_batches: usize,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            x_m: 0.5,
            x_p: 0.5,
            grid: 10,
            delta: 0.05,
            batch: 200,
            max_batches: 500,
        }
    }
}

impl DatasetParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.x_m) || !(self.x_p >= 0.0 && self.x_p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "load interval needs 0 <= x_m < 1 and x_p >= 0, got x_m={} x_p={}",
                self.x_m, self.x_p
            )));
        }
        if self.grid < 2 {
            return Err(Error::InvalidParameter("bid grid needs at least 2 points".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.batch == 0 || self.max_batches == 0 {
            return Err(Error::InvalidParameter("batch size and batch cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleDatabase {
    pub method: Method,
    pub seed: u64,
    pub params: DatasetParams,
    pub n_bus: usize,
    pub n_gen: usize,
    pub n_line: usize,
    pub dual_maxima: DualMaxima,
    /// Binding inequalities with a zero multiplier, summed over all solves.
    pub degenerate_bindings: usize,
    pub infeasible_draws: usize,
    pub batches: usize,
    /// Whether the stopping rule fired before the batch cap.
    pub complete: bool,
    pub samples: Vec<Sample>,
}

impl SampleDatabase {
    /// Count of samples per distinct label.
    pub fn census(&self) -> BTreeMap<&Label, usize> {
        let mut census = BTreeMap::new();
        for s in &self.samples {
            *census.entry(&s.label).or_insert(0) += 1;
        }
        census
    }

    pub fn distinct_labels(&self) -> usize {
        self.census().len()
    }

    /// Distinct active sets appearing in any label.
    pub fn distinct_sets(&self) -> usize {
        let mut sets: Vec<&ActiveSet> = self.samples.iter().flat_map(|s| s.label.sets()).collect();
        sets.sort();
        sets.dedup();
        sets.len()
    }

    pub fn validate(&self, case: &NetworkCase) -> Result<()> {
        if (self.n_bus, self.n_gen, self.n_line) != (case.n_bus(), case.n_gen(), case.n_line()) {
            return Err(Error::InvalidParameter(format!(
                "database built for {}/{}/{} buses/generators/lines, case has {}/{}/{}",
                self.n_bus,
                self.n_gen,
                self.n_line,
                case.n_bus(),
                case.n_gen(),
                case.n_line()
            )));
        }
        for s in &self.samples {
            if s.load.len() != self.n_bus {
                return Err(Error::Dimension {
                    expected: self.n_bus,
                    actual: s.load.len(),
                });
            }
            for set in s.label.sets() {
                set.validate(case)?;
            }
        }
        Ok(())
    }
}

pub fn sample_load<R: Rng + ?Sized>(case: &NetworkCase, x_m: f64, x_p: f64, rng: &mut R) -> LoadVector {
    let values = case
        .loads
        .iter()
        .map(|&pd| {
            let lo = (1.0 - x_m) * pd;
            let hi = (1.0 + x_p) * pd;
            if hi > lo {
                rng.gen_range(lo..=hi)
            } else {
                lo
            }
        })
        .collect();
    LoadVector::new(values).expect("scaled nonnegative loads stay valid")
}

pub fn c_s_max(case: &NetworkCase) -> f64 {
    case.max_bid()
}

/// `n` evenly spaced bids from the strategic generator's cost to
/// [`c_s_max`], both included.
pub fn c_s_grid(case: &NetworkCase, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("bid grid needs at least 2 points, got {n}")));
    }
    let lo = case.strategic().cost;
    let hi = c_s_max(case);
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n)
        .map(|k| if k == n - 1 { hi } else { lo + step * k as f64 })
        .collect())
}

/// Market-clearing results for one load over the bid grid.
pub struct GridSweep {
    pub sets: Vec<ActiveSet>,
    /// `(α_s − c_1)·P_s` at each grid bid.
    pub profits: Vec<f64>,
    pub maxima: DualMaxima,
    pub degenerate: usize,
}

impl GridSweep {
    /// Index of the most profitable bid, ties to the lowest.
    pub fn best(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.profits.iter().enumerate().skip(1) {
            let tol = 1e-9 * p.abs().max(self.profits[best].abs()).max(1.0);
            if p > self.profits[best] + tol {
                best = k;
            }
        }
        best
    }
}

/// Clears the market for `case` at every bid in `grid`. Returns `None` when
/// the load cannot be served.
pub fn sweep_grid(case: &NetworkCase, grid: &[f64]) -> Result<Option<GridSweep>> {
    let mut out = GridSweep {
        sets: Vec::with_capacity(grid.len()),
        profits: Vec::with_capacity(grid.len()),
        maxima: DualMaxima::default(),
        degenerate: 0,
    };
    for &c_s in grid {
        let sol = match solve_dcopf(case, c_s, CLEARING_LIMIT) {
            Ok(sol) => sol,
            Err(Error::MarketClearing(Status::Infeasible)) => return Ok(None),
            Err(e) => return Err(e),
        };
        out.maxima.observe(case, &sol);
        out.degenerate += degenerate_bindings(case, &sol, TOL_DUAL);
        out.sets.push(extract_active_set(case, &sol, TOL_DUAL));
        out.profits.push(sol.strategic_profit(case));
    }
    Ok(Some(out))
}

/// Labels a load for `method`, given its sweep.
pub fn label_samples(method: Method, load: &LoadVector, grid: &[f64], sweep: &GridSweep) -> Vec<Sample> {
    match method {
        Method::VarLower => grid
            .iter()
            .zip(&sweep.sets)
            .map(|(&c_s, set)| Sample {
                load: load.clone(),
                c_s: Some(c_s),
                label: Label::Single(set.clone()),
            })
            .collect(),
        Method::AllSets => vec![Sample {
            load: load.clone(),
            c_s: None,
            label: Label::multi(sweep.sets.clone()),
        }],
        Method::BestSet => vec![Sample {
            load: load.clone(),
            c_s: None,
            label: Label::Single(sweep.sets[sweep.best()].clone()),
        }],
    }
}

/// Good-Turing estimate of the probability of drawing an unseen label.
pub fn unseen_mass(census: &BTreeMap<&Label, usize>, n_samples: usize) -> f64 {
    if n_samples == 0 {
        return 1.0;
    }
    let singletons = census.values().filter(|&&c| c == 1).count();
    singletons as f64 / n_samples as f64
}

pub fn generate_database(
    method: Method,
    case: &NetworkCase,
    params: &DatasetParams,
    seed: u64,
) -> Result<SampleDatabase> {
    params.validate()?;
    case.validate()?;
    let grid = c_s_grid(case, params.grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut db = SampleDatabase {
        method,
        seed,
        params: *params,
        n_bus: case.n_bus(),
        n_gen: case.n_gen(),
        n_line: case.n_line(),
        dual_maxima: DualMaxima::default(),
        degenerate_bindings: 0,
        infeasible_draws: 0,
        batches: 0,
        complete: false,
        samples: Vec::new(),
    };
    let mut below = 0;
    while db.batches < params.max_batches {
        for _ in 0..params.batch {
            let load = sample_load(case, params.x_m, params.x_p, &mut rng);
            let scenario = scale_loads(case, &load)?;
            match sweep_grid(&scenario, &grid)? {
                Some(sweep) => {
                    db.dual_maxima.merge(&sweep.maxima);
                    db.degenerate_bindings += sweep.degenerate;
                    db.samples.extend(label_samples(method, &load, &grid, &sweep));
                }
                None => db.infeasible_draws += 1,
            }
        }
        db.batches += 1;
        if db.samples.is_empty() {
            return Err(Error::AllDrawsInfeasible);
        }
        let mass = unseen_mass(&db.census(), db.samples.len());
        log::debug!(
            "{method} batch {}: {} samples, {} labels, unseen mass {mass:.4}",
            db.batches,
            db.samples.len(),
            db.distinct_labels()
        );
        below = if mass < params.delta { below + 1 } else { 0 };
        if below >= 2 {
            db.complete = true;
            break;
        }
    }
    if !db.complete {
        log::warn!("{method} database hit the cap of {} batches", params.max_batches);
    }
    Ok(db)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    method: Method,
    seed: u64,
    params: DatasetParams,
    n_bus: usize,
    n_gen: usize,
    n_line: usize,
    dual_maxima: DualMaxima,
    degenerate_bindings: usize,
    infeasible_draws: usize,
    batches: usize,
    complete: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LabelRecord {
    One(String),
    Many(Vec<String>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    load: LoadVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c_s: Option<f64>,
    label: LabelRecord,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Line {
    Header(Header),
    Sample(SampleRecord),
}

/// Writes the database as JSON lines: a header record, then one record per
/// sample with labels as hex bitsets.
pub fn save_database(db: &SampleDatabase, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let header = Line::Header(Header {
        method: db.method,
        seed: db.seed,
        params: db.params,
        n_bus: db.n_bus,
        n_gen: db.n_gen,
        n_line: db.n_line,
        dual_maxima: db.dual_maxima.clone(),
        degenerate_bindings: db.degenerate_bindings,
        infeasible_draws: db.infeasible_draws,
        batches: db.batches,
        complete: db.complete,
    });
    let mut write_line = |line: &Line| -> Result<()> {
        let text = serde_json::to_string(line).map_err(|e| Error::json("database record", e))?;
        writeln!(out, "{text}").map_err(|e| Error::io(path, e))
    };
    write_line(&header)?;
    for s in &db.samples {
        let label = match &s.label {
            Label::Single(set) => LabelRecord::One(set.to_hex()),
            Label::Multi(sets) => LabelRecord::Many(sets.iter().map(ActiveSet::to_hex).collect()),
        };
        write_line(&Line::Sample(SampleRecord {
            load: s.load.clone(),
            c_s: s.c_s,
            label,
        }))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_database(path: impl AsRef<Path>) -> Result<SampleDatabase> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let format_err = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| format_err("empty file".into()))?
        .map_err(|e| Error::io(path, e))?;
    let header = match serde_json::from_str::<Line>(&first) {
        Ok(Line::Header(h)) => h,
        Ok(Line::Sample(_)) => return Err(format_err("first record is not a header".into())),
        Err(e) => return Err(format_err(format!("line 1: {e}"))),
    };
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = match serde_json::from_str::<Line>(&line) {
            Ok(Line::Sample(s)) => s,
            Ok(Line::Header(_)) => return Err(format_err(format!("line {}: second header", i + 2))),
            Err(e) => return Err(format_err(format!("line {}: {e}", i + 2))),
        };
        let parse = |hex: &str| {
            ActiveSet::from_hex(hex, header.n_gen, header.n_line)
                .map_err(|e| format_err(format!("line {}: {e}", i + 2)))
        };
        let label = match rec.label {
            LabelRecord::One(h) => Label::Single(parse(&h)?),
            LabelRecord::Many(hs) => Label::multi(hs.iter().map(|h| parse(h)).collect::<Result<_>>()?),
        };
        samples.push(Sample {
            load: LoadVector::new(rec.load.into_inner()).map_err(|e| format_err(e.to_string()))?,
            c_s: rec.c_s,
            label,
        });
    }
    Ok(SampleDatabase {
        method: header.method,
        seed: header.seed,
        params: header.params,
        n_bus: header.n_bus,
        n_gen: header.n_gen,
        n_line: header.n_line,
        dual_maxima: header.dual_maxima,
        degenerate_bindings: header.degenerate_bindings,
        infeasible_draws: header.infeasible_draws,
        batches: header.batches,
        complete: header.complete,
        samples,
    })
}

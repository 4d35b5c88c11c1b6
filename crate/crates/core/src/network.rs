//! Power-system case data: buses, lines, generators and default loads.
//!
//! Cases are stored as a single JSON document:
//!
//! ```json
//! {
//!   "buses": [0, 1, 2],
//!   "lines": [{"from": 0, "to": 1, "susceptance": 10.0, "flow_limit": 100.0}],
//!   "generators": [{"bus": 0, "cost": 12.0, "p_min": 0.0, "p_max": 150.0}],
//!   "loads": [0.0, 60.0, 40.0],
//!   "ref_bus": 0,
//!   "strategic_gen": 0
//! }
//! ```
//!
//! Bus ids are 0-based and `buses[i] == i`. Flows are `susceptance * (θ_from
//! - θ_to)` and are measured in MW, like loads and generator limits.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
    pub flow_limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub bus: usize,
    /// $/MWh
    pub cost: f64,
    pub p_min: f64,
    pub p_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkCase {
    pub buses: Vec<usize>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    /// Default demand per bus, MW.
    pub loads: Vec<f64>,
    pub ref_bus: usize,
    /// Index into `generators` of the price-making generator.
    pub strategic_gen: usize,
}

/// Per-bus demand in MW.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LoadVector(Vec<f64>);

impl LoadVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidCase {
                    field: format!("loads[{i}]"),
                    reason: format!("load must be finite and nonnegative, got {v}"),
                });
            }
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidCase {
        field: field.into(),
        reason: reason.into(),
    }
}

impl NetworkCase {
    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    pub fn n_gen(&self) -> usize {
        self.generators.len()
    }

    pub fn n_line(&self) -> usize {
        self.lines.len()
    }

    pub fn strategic(&self) -> &Generator {
        &self.generators[self.strategic_gen]
    }

    /// Upper bound on the strategic bid: ten times the most expensive
    /// generator's cost.
    pub fn max_bid(&self) -> f64 {
        10.0 * self
            .generators
            .iter()
            .map(|g| g.cost)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn default_load(&self) -> LoadVector {
        LoadVector(self.loads.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_bus();
        if n == 0 {
            return Err(invalid("buses", "case has no buses"));
        }
        for (i, &b) in self.buses.iter().enumerate() {
            if b != i {
                return Err(invalid(format!("buses[{i}]"), format!("expected id {i}, got {b}")));
            }
        }
        for (l, line) in self.lines.iter().enumerate() {
            for (name, bus) in [("from", line.from), ("to", line.to)] {
                if bus >= n {
                    return Err(invalid(format!("lines[{l}].{name}"), format!("unknown bus {bus}")));
                }
            }
            if line.from == line.to {
                return Err(invalid(format!("lines[{l}]"), "line connects a bus to itself"));
            }
            if !line.susceptance.is_finite() || line.susceptance == 0.0 {
                return Err(invalid(
                    format!("lines[{l}].susceptance"),
                    "must be finite and nonzero",
                ));
            }
            if !line.flow_limit.is_finite() || line.flow_limit < 0.0 {
                return Err(invalid(
                    format!("lines[{l}].flow_limit"),
                    "must be finite and nonnegative",
                ));
            }
        }
        if self.generators.is_empty() {
            return Err(invalid("generators", "case has no generators"));
        }
        for (g, gen) in self.generators.iter().enumerate() {
            if gen.bus >= n {
                return Err(invalid(format!("generators[{g}].bus"), format!("unknown bus {}", gen.bus)));
            }
            if !gen.cost.is_finite() || gen.cost < 0.0 {
                return Err(invalid(format!("generators[{g}].cost"), "must be finite and nonnegative"));
            }
            if !gen.p_min.is_finite() || !gen.p_max.is_finite() {
                return Err(invalid(format!("generators[{g}]"), "limits must be finite"));
            }
            if gen.p_min > gen.p_max {
                return Err(invalid(
                    format!("generators[{g}].p_min"),
                    format!("generator {g}: p_min {} exceeds p_max {}", gen.p_min, gen.p_max),
                ));
            }
        }
        if self.loads.len() != n {
            return Err(invalid(
                "loads",
                format!("{} entries for {} buses", self.loads.len(), n),
            ));
        }
        LoadVector::new(self.loads.clone())?;
        if self.ref_bus >= n {
            return Err(invalid("ref_bus", format!("unknown bus {}", self.ref_bus)));
        }
        if self.strategic_gen >= self.n_gen() {
            return Err(invalid(
                "strategic_gen",
                format!("unknown generator {}", self.strategic_gen),
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let case: NetworkCase =
            serde_json::from_str(text).map_err(|e| Error::json("case schema", e))?;
        case.validate()?;
        Ok(case)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serializes")
    }
}

pub fn load_case(path: impl AsRef<Path>) -> Result<NetworkCase> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    NetworkCase::from_json(&text).map_err(|e| match e {
        Error::Json { source, .. } => Error::json(path.display().to_string(), source),
        other => other,
    })
}

pub fn save_case(case: &NetworkCase, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, case.to_json()).map_err(|e| Error::io(path, e))
}

/// Copy of `case` with its loads replaced by `load`.
pub fn scale_loads(case: &NetworkCase, load: &LoadVector) -> Result<NetworkCase> {
    if load.len() != case.n_bus() {
        return Err(Error::Dimension {
            expected: case.n_bus(),
            actual: load.len(),
        });
    }
    let mut out = case.clone();
    out.loads = load.as_slice().to_vec();
    Ok(out)
}

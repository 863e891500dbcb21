//! Run configuration read from TOML, with dotted-key overrides.
//!
//! ```toml
//! seed = 7
//!
//! [model]
//! family = "overflow"        # or "kanban"
//! j = 6
//! k = 8                      # or one capacity per queue: [8, 8, 4, ...]
//! arrival_rates = [1.2, 1.1, 1.0, 0.9, 0.8, 0.7]
//! service_rates = 1.0        # scalars are broadcast
//!
//! [solver]
//! nu1 = 3
//! tolerance = 1e-7
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::hierarchy::{HierarchyOptions, Interpolation, Strategy};
use crate::models::{KanbanParams, Model, OverflowParams};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Overflow,
    Kanban,
}

/// A single value for every mode or one per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerMode<T> {
    All(T),
    Each(Vec<T>),
}

impl<T: Clone> PerMode<T> {
    fn expand(&self, n: usize, what: &str) -> Result<Vec<T>> {
        match self {
            PerMode::All(v) => Ok(vec![v.clone(); n]),
            PerMode::Each(v) if v.len() == n => Ok(v.clone()),
            PerMode::Each(v) => Err(Error::Config(format!("{what} has {} entries, expected {n}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    #[default]
    Synchronized,
    /// Identity coupling factors: independent queues.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    /// Number of queues or machines.
    pub j: usize,
    /// Queue capacities, or the ticket count of a Kanban line.
    pub k: PerMode<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_rates: Option<PerMode<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_rates: Option<PerMode<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub processing_rates: Option<PerMode<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer_rates: Option<PerMode<f64>>,
    #[serde(default)]
    pub coupling: Coupling,
}

impl ModelConfig {
    pub fn model(&self) -> Result<Model> {
        let j = self.j;
        if j == 0 {
            return Err(Error::Config("model.j must be positive".into()));
        }
        let model = match self.family {
            Family::Overflow => {
                if self.processing_rates.is_some() || self.transfer_rates.is_some() {
                    return Err(Error::Config("processing and transfer rates belong to kanban models".into()));
                }
                let caps = self.k.expand(j, "model.k")?;
                let cap0 = caps[0];
                let mut p = OverflowParams::standard(j, cap0);
                p.capacities = caps;
                if let Some(r) = &self.arrival_rates {
                    p.arrival_rates = r.expand(j, "model.arrival_rates")?;
                }
                if let Some(r) = &self.service_rates {
                    p.service_rates = r.expand(j, "model.service_rates")?;
                }
                Model::Overflow(p)
            }
            Family::Kanban => {
                if self.arrival_rates.is_some() || self.service_rates.is_some() {
                    return Err(Error::Config("arrival and service rates belong to overflow models".into()));
                }
                if self.coupling != Coupling::Synchronized {
                    return Err(Error::Config("kanban models are always coupled".into()));
                }
                let PerMode::All(tickets) = self.k else {
                    return Err(Error::Config("kanban models take a single ticket count".into()));
                };
                let mut p = KanbanParams::standard(j, tickets);
                if let Some(r) = &self.processing_rates {
                    p.processing_rates = r.expand(j, "model.processing_rates")?;
                }
                if let Some(r) = &self.transfer_rates {
                    p.transfer_rates = r.expand(j.saturating_sub(1), "model.transfer_rates")?;
                }
                Model::Kanban(p)
            }
        };
        model.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyConfig {
    /// Overflow only.
    pub interpolation: Interpolation,
    pub coarsest_max: usize,
    pub coarsest_dense_limit: usize,
    pub pinv_rcond: f64,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        let o = HierarchyOptions::default();
        Self {
            interpolation: Interpolation::default(),
            coarsest_max: o.coarsest_max,
            coarsest_dense_limit: o.coarsest_dense_limit,
            pinv_rcond: o.pinv_rcond,
        }
    }
}

impl HierarchyConfig {
    pub fn options(&self) -> HierarchyOptions {
        HierarchyOptions {
            coarsest_max: self.coarsest_max,
            coarsest_dense_limit: self.coarsest_dense_limit,
            pinv_rcond: self.pinv_rcond,
        }
    }

    pub fn strategy(&self, family: Family) -> Strategy {
        match family {
            Family::Overflow => Strategy::Overflow { interpolation: self.interpolation },
            Family::Kanban => Strategy::Kanban,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), formats: vec![OutputFormat::Csv, OutputFormat::Json] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankStudyConfig {
    pub max_rank: usize,
    /// Residual tolerance of the multigrid reference when the model is too
    /// large for the dense oracle.
    pub reference_tolerance: f64,
    /// Largest state count solved by the dense oracle.
    pub oracle_max_states: usize,
}

impl Default for RankStudyConfig {
    fn default() -> Self {
        Self { max_rank: 20, reference_tolerance: 1e-12, oracle_max_states: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    #[serde(default)]
    pub hierarchy: HierarchyConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub rank_study: RankStudyConfig,
}

impl RunConfig {
    pub fn from_path(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, overrides)
    }

    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    /// Solver settings default per family: GMRES smoothing for overflow
    /// chains, one Gauss-Seidel sweep for Kanban lines.
    fn from_table(mut table: Table) -> Result<Self> {
        let family = table
            .get("model")
            .and_then(|m| m.get("family"))
            .cloned()
            .ok_or_else(|| Error::Config("missing model.family".into()))?
            .try_into::<Family>()
            .map_err(|e| Error::Config(format!("model.family: {e}")))?;
        let defaults = match family {
            Family::Overflow => SolverConfig::default(),
            Family::Kanban => SolverConfig::gauss_seidel(),
        };
        let Value::Table(mut solver) = Value::try_from(defaults).map_err(|e| Error::Config(e.to_string()))? else {
            unreachable!("structs serialize to tables");
        };
        match table.remove("solver") {
            Some(Value::Table(user)) => merge(&mut solver, user),
            Some(_) => return Err(Error::Config("solver must be a table".into())),
            None => {}
        }
        table.insert("solver".into(), Value::Table(solver));
        let cfg: RunConfig = Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.model()?;
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.hierarchy.coarsest_max == 0 || !(self.hierarchy.pinv_rcond >= 0.0) {
            return Err(Error::Config("hierarchy settings out of range".into()));
        }
        if self.rank_study.max_rank == 0 || !(self.rank_study.reference_tolerance > 0.0) {
            return Err(Error::Config("rank_study settings out of range".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Applies `a.b.c=value`. The value is read as a TOML literal and falls back
/// to a bare string.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key {key:?} is malformed")));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("just parsed"),
        Err(_) => Value::String(raw.to_string()),
    };
    let (last, parents) = path.split_last().expect("nonempty");
    let mut node = table;
    for p in parents {
        let entry = node.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = match entry {
            Value::Table(t) => t,
            _ => return Err(Error::Config(format!("override {key:?} descends into a non-table"))),
        };
    }
    node.insert(last.to_string(), value);
    Ok(())
}

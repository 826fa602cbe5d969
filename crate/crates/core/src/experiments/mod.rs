//! Scenario-driven sweeps behind the command-line front end. Each run turns
//! a JSON scenario into a CSV table; rows come out in sweep order no matter
//! how many threads evaluate the points.

mod cache;
mod centrality;
mod offload;
mod reliability;
mod rem;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::caching::CachingError;
use crate::graph::{generate_two_cluster_graph, generate_two_cluster_graph_exact, Graph, GraphError, GraphJson};
use crate::offloading::OffloadError;
use crate::reliability::ReliabilityError;
use crate::rem::RemError;

pub use cache::CacheScenario;
pub use centrality::CentralityScenario;
pub use offload::OffloadScenario;
pub use reliability::ReliabilityScenario;
pub use rem::RemScenario;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("scenario error: {0}")]
    Schema(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl ExperimentError {
    /// Process exit code: 2 schema, 3 infeasible, 4 numerical, 1 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Schema(_) => 2,
            ExperimentError::Infeasible(_) => 3,
            ExperimentError::Numerical(_) => 4,
            ExperimentError::Io(_) => 1,
        }
    }
}

impl From<OffloadError> for ExperimentError {
    fn from(e: OffloadError) -> Self {
        let msg = e.to_string();
        match e {
            OffloadError::InvalidScenario(_) | OffloadError::InvalidParameter(_) | OffloadError::BudgetExceeded { .. } => {
                ExperimentError::Schema(msg)
            }
            OffloadError::Infeasible { .. } | OffloadError::RelaxedInfeasible | OffloadError::RoundingInfeasible { .. } => {
                ExperimentError::Infeasible(msg)
            }
            OffloadError::NegativePower(_) | OffloadError::Numerical(_) => ExperimentError::Numerical(msg),
        }
    }
}

impl From<CachingError> for ExperimentError {
    fn from(e: CachingError) -> Self {
        let msg = e.to_string();
        match e {
            CachingError::Infeasible { .. } | CachingError::Unreachable { .. } | CachingError::RouteConflict { .. } => {
                ExperimentError::Infeasible(msg)
            }
            CachingError::Solver(_) => ExperimentError::Numerical(msg),
            _ => ExperimentError::Schema(msg),
        }
    }
}

impl From<RemError> for ExperimentError {
    fn from(e: RemError) -> Self {
        let msg = e.to_string();
        match e {
            RemError::Infeasible => ExperimentError::Infeasible(msg),
            RemError::Numerical(_) | RemError::Lp(_) => ExperimentError::Numerical(msg),
            RemError::Graph(g) => g.into(),
            _ => ExperimentError::Schema(msg),
        }
    }
}

impl From<GraphError> for ExperimentError {
    fn from(e: GraphError) -> Self {
        let msg = e.to_string();
        match e {
            GraphError::NoConvergence { .. } => ExperimentError::Numerical(msg),
            GraphError::GenerationFailed(_) => ExperimentError::Infeasible(msg),
            _ => ExperimentError::Schema(msg),
        }
    }
}

impl From<ReliabilityError> for ExperimentError {
    fn from(e: ReliabilityError) -> Self {
        let msg = e.to_string();
        match e {
            ReliabilityError::InfeasibleBudget { .. } | ReliabilityError::Disconnected | ReliabilityError::Degenerate { .. } => {
                ExperimentError::Infeasible(msg)
            }
            ReliabilityError::Numerical(_) | ReliabilityError::Pgd(_) => ExperimentError::Numerical(msg),
            ReliabilityError::Graph(g) => g.into(),
            _ => ExperimentError::Schema(msg),
        }
    }
}

/// The experiment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Offload,
    Cache,
    Rem,
    Reliability,
    Centrality,
}

impl std::str::FromStr for Experiment {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "offload" => Ok(Self::Offload),
            "cache" => Ok(Self::Cache),
            "rem" => Ok(Self::Rem),
            "reliability" => Ok(Self::Reliability),
            "centrality" => Ok(Self::Centrality),
            _ => Err(ExperimentError::Schema(format!("unknown experiment `{s}`"))),
        }
    }
}

/// `name=v1,v2,...`; a dotted name addresses a nested scenario field.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub name: String,
    pub values: Vec<Value>,
}

impl Sweep {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let (name, list) = text
            .split_once('=')
            .ok_or_else(|| ExperimentError::Schema(format!("sweep `{text}` is not of the form name=v1,v2,...")))?;
        let name = name.trim();
        if name.is_empty() || list.trim().is_empty() {
            return Err(ExperimentError::Schema(format!("sweep `{text}` needs a name and at least one value")));
        }
        let values = list
            .split(',')
            .map(|v| {
                let v = v.trim();
                serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()))
            })
            .collect();
        Ok(Self { name: name.to_string(), values })
    }

    fn pointer(&self) -> String {
        format!("/{}", self.name.replace('.', "/"))
    }
}

/// CSV table plus an optional one-line summary for the terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub csv: String,
    pub summary: Option<String>,
}

/// Where relative file references inside a scenario are resolved.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub base_dir: PathBuf,
    pub seed: u64,
}

impl RunContext {
    pub fn new(base_dir: impl Into<PathBuf>, seed: u64) -> Self {
        Self { base_dir: base_dir.into(), seed }
    }

    fn read(&self, path: &str) -> Result<String, ExperimentError> {
        let p = self.base_dir.join(path);
        std::fs::read_to_string(&p).map_err(|e| ExperimentError::Schema(format!("cannot read {}: {e}", p.display())))
    }

    /// Independent per-item seeds derived from the run seed.
    fn seeds(&self, count: usize) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..count).map(|_| rng.random()).collect()
    }
}

/// Runs one experiment on a scenario text.
pub fn run_experiment(
    kind: Experiment,
    scenario: &str,
    ctx: &RunContext,
    sweep: Option<&Sweep>,
) -> Result<ExperimentOutput, ExperimentError> {
    match kind {
        Experiment::Offload => run_typed::<OffloadScenario>(scenario, ctx, sweep),
        Experiment::Cache => run_typed::<CacheScenario>(scenario, ctx, sweep),
        Experiment::Rem => run_typed::<RemScenario>(scenario, ctx, sweep),
        Experiment::Reliability => run_typed::<ReliabilityScenario>(scenario, ctx, sweep),
        Experiment::Centrality => run_typed::<CentralityScenario>(scenario, ctx, sweep),
    }
}

/// A scenario type the sweep machinery can drive.
trait Scenario: Serialize + DeserializeOwned + Sync {
    /// Sweep names that replace a list field of the scenario, as
    /// `(sweep name, field)`.
    const AXES: &'static [(&'static str, &'static str)];

    fn run(&self, ctx: &RunContext) -> Result<ExperimentOutput, ExperimentError>;
}

fn parse_scenario<S: Scenario>(value: Value) -> Result<S, ExperimentError> {
    serde_json::from_value(value).map_err(|e| ExperimentError::Schema(e.to_string()))
}

fn run_typed<S: Scenario>(text: &str, ctx: &RunContext, sweep: Option<&Sweep>) -> Result<ExperimentOutput, ExperimentError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| ExperimentError::Schema(format!("scenario JSON: {e}")))?;
    let scenario: S = parse_scenario(raw)?;
    let Some(sweep) = sweep else {
        return scenario.run(ctx);
    };
    let full = serde_json::to_value(&scenario).map_err(|e| ExperimentError::Schema(e.to_string()))?;
    if let Some((_, field)) = S::AXES.iter().find(|(name, _)| *name == sweep.name) {
        let mut v = full;
        v[*field] = Value::Array(sweep.values.clone());
        return parse_scenario::<S>(v)?.run(ctx);
    }
    let pointer = sweep.pointer();
    if full.pointer(&pointer).is_none() {
        return Err(ExperimentError::Schema(format!("unknown sweep parameter `{}`", sweep.name)));
    }
    let runs: Vec<Result<ExperimentOutput, ExperimentError>> = sweep
        .values
        .par_iter()
        .map(|value| {
            let mut v = full.clone();
            *v.pointer_mut(&pointer).expect("checked above") = value.clone();
            parse_scenario::<S>(v)?.run(ctx)
        })
        .collect();
    let mut csv = String::new();
    let mut summaries = Vec::new();
    for (value, run) in sweep.values.iter().zip(runs) {
        let out = run?;
        let label = match value {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let mut lines = out.csv.lines();
        let header = lines.next().unwrap_or_default();
        if csv.is_empty() {
            csv.push_str(&format!("{},{header}\n", quote(&sweep.name)));
        }
        for line in lines {
            csv.push_str(&format!("{},{line}\n", quote(&label)));
        }
        if let Some(s) = out.summary {
            summaries.push(format!("{}={label}: {s}", sweep.name));
        }
    }
    Ok(ExperimentOutput { csv, summary: (!summaries.is_empty()).then(|| summaries.join("\n")) })
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Comma-separated table with LF line endings.
struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header).expect("writing to memory");
        Self { writer }
    }

    fn row(&mut self, fields: &[String]) {
        self.writer.write_record(fields).expect("writing to memory");
    }

    fn finish(self) -> String {
        String::from_utf8(self.writer.into_inner().expect("writing to memory")).expect("fields are UTF-8")
    }
}

/// Shortest round-trip decimal; exponent form outside `[1e-4, 1e15)`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// A graph given inline, by file path, or by generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphRef {
    Path(String),
    TwoCluster { two_cluster: TwoClusterSpec },
    Inline { n: usize, edges: Vec<(usize, usize, f64)> },
}

/// Two random clusters joined by bridges. Give either exact intra-cluster
/// edge counts or an edge probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoClusterSpec {
    pub sizes: (usize, usize),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intra_edges: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_in: Option<f64>,
    pub bridges: usize,
}

/// A loaded graph with cluster labels when the generator supplied them.
struct LoadedGraph {
    graph: Graph,
    labels: Option<Vec<usize>>,
}

impl GraphRef {
    fn load(&self, ctx: &RunContext) -> Result<LoadedGraph, ExperimentError> {
        match self {
            GraphRef::Path(p) => {
                let text = ctx.read(p)?;
                let raw: GraphJson = serde_json::from_str(&text).map_err(|e| ExperimentError::Schema(format!("{p}: {e}")))?;
                Ok(LoadedGraph { graph: raw.try_into()?, labels: None })
            }
            GraphRef::Inline { n, edges } => {
                let raw = GraphJson { n: *n, edges: edges.clone() };
                Ok(LoadedGraph { graph: raw.try_into()?, labels: None })
            }
            GraphRef::TwoCluster { two_cluster: spec } => {
                let tc = match (spec.intra_edges, spec.p_in) {
                    (Some(m), None) => generate_two_cluster_graph_exact(spec.sizes, m, spec.bridges, ctx.seed)?,
                    (None, Some(p)) => generate_two_cluster_graph(spec.sizes, p, spec.bridges, ctx.seed)?,
                    _ => return Err(ExperimentError::Schema("two_cluster needs exactly one of intra_edges and p_in".into())),
                };
                Ok(LoadedGraph { graph: tc.graph, labels: Some(tc.labels) })
            }
        }
    }
}

/// A value given inline or as a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FileOr<T> {
    Path(String),
    Inline(T),
}

impl<T: DeserializeOwned + Clone> FileOr<T> {
    fn load(&self, ctx: &RunContext) -> Result<T, ExperimentError> {
        match self {
            FileOr::Inline(v) => Ok(v.clone()),
            FileOr::Path(p) => serde_json::from_str(&ctx.read(p)?).map_err(|e| ExperimentError::Schema(format!("{p}: {e}"))),
        }
    }
}

/// Scenario directory for a scenario file path.
pub fn scenario_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

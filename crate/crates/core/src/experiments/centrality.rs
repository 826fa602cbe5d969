//! Per-edge perturbation centrality, most central first.

use serde::{Deserialize, Serialize};

use super::{format_float, ExperimentError, ExperimentOutput, GraphRef, RunContext, Scenario, Table, TwoClusterSpec};
use crate::graph::{build_laplacian, eigendecompose};
use crate::reliability::centrality_ranking;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CentralityScenario {
    pub graph: GraphRef,
    /// Number of clusters; the sum runs over eigenvalues `1..K` (0-based).
    #[serde(rename = "K")]
    pub clusters: usize,
    /// Cluster label per vertex; generated graphs supply their own.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
}

impl Default for CentralityScenario {
    fn default() -> Self {
        Self {
            graph: GraphRef::TwoCluster {
                two_cluster: TwoClusterSpec { sizes: (20, 20), intra_edges: None, p_in: Some(0.4), bridges: 4 },
            },
            clusters: 2,
            labels: None,
        }
    }
}

impl Scenario for CentralityScenario {
    const AXES: &'static [(&'static str, &'static str)] = &[];

    fn run(&self, ctx: &RunContext) -> Result<ExperimentOutput, ExperimentError> {
        let loaded = self.graph.load(ctx)?;
        let g = loaded.graph;
        let labels = self.labels.clone().or(loaded.labels);
        if let Some(l) = &labels {
            if l.len() != g.num_vertices() {
                return Err(ExperimentError::Schema(format!("{} labels for {} vertices", l.len(), g.num_vertices())));
            }
        }
        let spec = eigendecompose(&build_laplacian(&g))?;
        let ranked = centrality_ranking(&spec, g.edges(), self.clusters)?;
        let mut table = Table::new(&["i", "j", "p_K", "bridge"]);
        for (e, p) in &ranked {
            let bridge = labels.as_ref().map_or(String::new(), |l| u8::from(l[e.i] != l[e.j]).to_string());
            table.row(&[e.i.to_string(), e.j.to_string(), format_float(*p), bridge]);
        }
        Ok(ExperimentOutput { csv: table.finish(), summary: None })
    }
}

//! Expected loss of algebraic connectivity against the total power budget,
//! for the optimized allocation and equal power per link.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{format_float, ExperimentError, ExperimentOutput, GraphRef, RunContext, Scenario, Table, TwoClusterSpec};
use crate::reliability::{
    connected_spectrum, solve_robust_allocation, uniform_power_baseline, FadingLinkModel, ReliabilityError,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReliabilityScenario {
    pub graph: GraphRef,
    pub lambda: f64,
    #[serde(rename = "R")]
    pub rate: f64,
    pub sigma_n2: f64,
    /// Independent channels per link; one row block per value.
    pub n: Vec<u32>,
    /// Per-edge distances in graph edge order; empty means unit distances.
    pub r_m: Vec<f64>,
    /// Total transmit power budgets, in watts.
    pub budgets: Vec<f64>,
}

impl Default for ReliabilityScenario {
    fn default() -> Self {
        Self {
            graph: GraphRef::TwoCluster {
                two_cluster: TwoClusterSpec { sizes: (30, 30), intra_edges: Some((378, 379)), p_in: None, bridges: 4 },
            },
            lambda: 1.0,
            rate: 1.0,
            sigma_n2: 1.0,
            n: vec![1, 4],
            r_m: Vec::new(),
            budgets: vec![400.0, 500.0, 600.0, 800.0, 1000.0, 1500.0, 2000.0, 3000.0, 4000.0, 6000.0],
        }
    }
}

impl Scenario for ReliabilityScenario {
    const AXES: &'static [(&'static str, &'static str)] = &[("budget", "budgets"), ("n", "n")];

    fn run(&self, ctx: &RunContext) -> Result<ExperimentOutput, ExperimentError> {
        if self.budgets.is_empty() || self.n.is_empty() {
            return Err(ExperimentError::Schema("need at least one budget and one channel count".into()));
        }
        let g = self.graph.load(ctx)?.graph;
        let models: Vec<FadingLinkModel> = self
            .n
            .iter()
            .map(|&n| FadingLinkModel {
                rate: self.rate,
                noise_var: self.sigma_n2,
                lambda: self.lambda,
                n,
                distances: self.r_m.clone(),
            })
            .collect();
        for m in &models {
            m.validate(g.num_edges())?;
        }
        if self.rate <= 0.0 {
            return Err(ExperimentError::Schema("R must be positive".into()));
        }
        let spec = connected_spectrum(&g)?;
        let jobs: Vec<(usize, usize)> = (0..models.len()).flat_map(|m| (0..self.budgets.len()).map(move |b| (m, b))).collect();
        let rows: Vec<[String; 5]> = jobs
            .par_iter()
            .map(|&(m, b)| {
                let model = &models[m];
                let budget = self.budgets[b];
                let c_max = model.c_max(budget);
                let row = |opt: f64, uni: f64, status: &str| {
                    [format_float(budget), format_float(opt), format_float(uni), model.n.to_string(), status.to_string()]
                };
                match solve_robust_allocation(&spec, g.edges(), model, c_max) {
                    Ok(opt) => {
                        let uni = uniform_power_baseline(&spec, g.edges(), model, c_max)?;
                        Ok(row(opt.normalized, uni.normalized, "ok"))
                    }
                    Err(ReliabilityError::InfeasibleBudget { .. }) => Ok(row(f64::NAN, f64::NAN, "infeasible")),
                    Err(e) => Err(ExperimentError::from(e)),
                }
            })
            .collect::<Result<_, ExperimentError>>()?;
        if rows.iter().all(|r| r[4] == "infeasible") {
            return Err(ExperimentError::Infeasible("every budget is below the convexity floor".into()));
        }
        let mut table = Table::new(&["budget", "optimized_norm_perturbation", "uniform_norm_perturbation", "n", "status"]);
        for r in &rows {
            table.row(r);
        }
        let summary = format!("edges={} lambda2={}", g.num_edges(), format_float(spec.eigenvalues[1]));
        Ok(ExperimentOutput { csv: table.finish(), summary: Some(summary) })
    }
}

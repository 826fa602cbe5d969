//! Mean transport cost of the relaxed caching schedule and the
//! shortest-path baseline against request load and delivery deadline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{format_float, ExperimentError, ExperimentOutput, FileOr, RunContext, Scenario, Table};
use crate::caching::{
    generate_caching_network, shortest_path_baseline, solve_caching, CachingError, CachingNetwork, CachingSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheScenario {
    /// Expected requests per slot over the whole network.
    pub arrival_rates: Vec<f64>,
    /// Delivery deadlines in slots, applied to every request.
    #[serde(rename = "D")]
    pub deadlines: Vec<usize>,
    /// Request draws per arrival rate; ignored for a fixed network.
    pub instances: usize,
    pub nodes: usize,
    pub objects: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub repositories: usize,
    #[serde(rename = "S_u")]
    pub storage: u32,
    #[serde(rename = "T_uv")]
    pub link_capacity: u32,
    pub extra_link_prob: f64,
    pub max_repository_hops: usize,
    /// Transport energy only, as in the delivery-cost comparison.
    pub ignore_storage_cost: bool,
    /// A fixed network in the caching network format; its request
    /// deadlines are replaced by each swept value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<FileOr<CachingNetwork>>,
}

impl Default for CacheScenario {
    fn default() -> Self {
        let spec = CachingSpec::default();
        Self {
            arrival_rates: vec![0.5, 1.0, 1.5],
            deadlines: vec![1, 2, 3],
            instances: 4,
            nodes: spec.nodes,
            objects: spec.objects,
            horizon: spec.horizon,
            repositories: spec.repositories,
            storage: spec.storage,
            link_capacity: spec.link_capacity,
            extra_link_prob: spec.extra_link_prob,
            max_repository_hops: spec.max_repository_hops,
            ignore_storage_cost: true,
            network: None,
        }
    }
}

impl CacheScenario {
    fn spec(&self, arrival_rate: f64) -> CachingSpec {
        CachingSpec {
            nodes: self.nodes,
            objects: self.objects,
            horizon: self.horizon,
            repositories: self.repositories,
            storage: self.storage,
            link_capacity: self.link_capacity,
            extra_link_prob: self.extra_link_prob,
            arrival_rate,
            deadline: 1,
            max_repository_hops: self.max_repository_hops,
        }
    }
}

/// `(lp, sp)` costs, `None` when either side found no schedule.
fn evaluate(net: &CachingNetwork, ignore_storage_cost: bool) -> Result<Option<(f64, f64)>, ExperimentError> {
    let soft = |e: &CachingError| {
        matches!(e, CachingError::Infeasible { .. } | CachingError::Unreachable { .. } | CachingError::RouteConflict { .. })
    };
    let lp = match solve_caching(net, true, ignore_storage_cost) {
        Ok(s) => s.cost,
        Err(e) if soft(&e) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let sp = match shortest_path_baseline(net, ignore_storage_cost) {
        Ok(s) => s.cost,
        Err(e) if soft(&e) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    Ok(Some((lp, sp)))
}

impl Scenario for CacheScenario {
    const AXES: &'static [(&'static str, &'static str)] = &[("arrival_rate", "arrival_rates"), ("D", "D")];

    fn run(&self, ctx: &RunContext) -> Result<ExperimentOutput, ExperimentError> {
        if self.deadlines.is_empty() || (self.network.is_none() && (self.arrival_rates.is_empty() || self.instances == 0)) {
            return Err(ExperimentError::Schema("need at least one deadline, arrival rate and instance".into()));
        }
        let fixed = match &self.network {
            Some(n) => {
                let net = n.load(ctx)?;
                net.validate()?;
                Some(net)
            }
            None => None,
        };
        let (rates, instances) = match &fixed {
            Some(net) => (vec![net.requests.len() as f64 / net.horizon as f64], 1),
            None => (self.arrival_rates.clone(), self.instances),
        };
        let seeds = ctx.seeds(instances);
        let draws: Vec<(usize, usize)> = (0..rates.len()).flat_map(|r| (0..instances).map(move |i| (r, i))).collect();
        let bases: Vec<CachingNetwork> = draws
            .par_iter()
            .map(|&(r, i)| match &fixed {
                Some(net) => Ok(net.clone()),
                None => generate_caching_network(&self.spec(rates[r]), seeds[i]),
            })
            .collect::<Result<_, _>>()?;
        let jobs: Vec<(usize, usize)> = (0..bases.len()).flat_map(|b| (0..self.deadlines.len()).map(move |d| (b, d))).collect();
        let costs: Vec<Option<(f64, f64)>> = jobs
            .par_iter()
            .map(|&(b, d)| {
                let mut net = bases[b].clone();
                net.requests.iter_mut().for_each(|r| r.deadline = self.deadlines[d]);
                evaluate(&net, self.ignore_storage_cost)
            })
            .collect::<Result<_, _>>()?;

        let mut table = Table::new(&["arrival_rate", "D", "lp_cost_mean", "sp_cost_mean"]);
        for (r, rate) in rates.iter().enumerate() {
            for (d, deadline) in self.deadlines.iter().enumerate() {
                let ok: Vec<(f64, f64)> =
                    (0..instances).filter_map(|i| costs[(r * instances + i) * self.deadlines.len() + d]).collect();
                let (lp, sp) = if ok.is_empty() {
                    (f64::NAN, f64::NAN)
                } else {
                    let k = ok.len() as f64;
                    (ok.iter().map(|c| c.0).sum::<f64>() / k, ok.iter().map(|c| c.1).sum::<f64>() / k)
                };
                table.row(&[format_float(*rate), deadline.to_string(), format_float(lp), format_float(sp)]);
            }
        }
        if costs.iter().all(Option::is_none) {
            return Err(ExperimentError::Infeasible("no draw admits a schedule".into()));
        }
        Ok(ExperimentOutput { csv: table.finish(), summary: None })
    }
}

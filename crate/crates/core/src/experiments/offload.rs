//! Total transmit power against the deadline for PSCA and the reference
//! association strategies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{format_float, ExperimentError, ExperimentOutput, FileOr, RunContext, Scenario, Table};
use crate::offloading::{
    exhaustive_baseline, generate_scenario, snr_association_baseline, solve_multi_mec_psca, OffloadError, PscaParams,
    Scenario as OffloadInstance, ScenarioSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffloadScenario {
    /// Deadlines to sweep, in seconds.
    #[serde(rename = "L")]
    pub deadlines: Vec<f64>,
    /// Random instances per deadline; ignored for a fixed scenario.
    pub instances: usize,
    pub users: usize,
    /// MEC capacities in cycles/s.
    #[serde(rename = "F")]
    pub mec_capacity: Vec<f64>,
    #[serde(rename = "Pcap")]
    pub power_cap: f64,
    #[serde(rename = "B")]
    pub bandwidth: f64,
    pub bits: (f64, f64),
    pub cycles: (f64, f64),
    pub remote_backhaul: f64,
    pub pathloss_exp: f64,
    pub noise_var: f64,
    pub area: f64,
    pub p_exp: f64,
    /// Include the exhaustive search column.
    pub exhaustive: bool,
    /// A fixed instance in the offloading scenario format; its deadlines
    /// are replaced by each swept value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<FileOr<Value>>,
}

impl Default for OffloadScenario {
    fn default() -> Self {
        let spec = ScenarioSpec::default();
        Self {
            deadlines: vec![0.5, 0.6, 0.7, 0.8, 1.0, 1.2],
            instances: 10,
            users: spec.users,
            mec_capacity: spec.mec_capacity,
            power_cap: spec.power_cap,
            bandwidth: spec.bandwidth,
            bits: spec.bits,
            cycles: spec.cycles,
            remote_backhaul: spec.remote_backhaul,
            pathloss_exp: spec.pathloss_exp,
            noise_var: spec.noise_var,
            area: spec.area,
            p_exp: PscaParams::default().p_exp,
            exhaustive: true,
            scenario: None,
        }
    }
}

/// Total power per method, `None` where that method found no feasible point.
struct Outcome {
    powers: [Option<f64>; 4],
}

fn power(r: Result<f64, OffloadError>) -> Result<Option<f64>, ExperimentError> {
    match r {
        Ok(p) => Ok(Some(p)),
        Err(OffloadError::Infeasible { .. } | OffloadError::RelaxedInfeasible | OffloadError::RoundingInfeasible { .. }) => {
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn evaluate(s: &OffloadInstance, params: &PscaParams, exhaustive: bool) -> Result<Outcome, ExperimentError> {
    let psca = power(solve_multi_mec_psca(s, params).map(|r| r.total_power))?;
    let exh = if exhaustive { power(exhaustive_baseline(s).map(|a| a.total_power()))? } else { Some(f64::NAN) };
    let joint = power(snr_association_baseline(s, true).map(|a| a.total_power()))?;
    let disjoint = power(snr_association_baseline(s, false).map(|a| a.total_power()))?;
    Ok(Outcome { powers: [psca, exh, joint, disjoint] })
}

impl OffloadScenario {
    fn spec(&self, deadline: f64) -> ScenarioSpec {
        ScenarioSpec {
            users: self.users,
            mec_capacity: self.mec_capacity.clone(),
            power_cap: self.power_cap,
            deadline,
            bandwidth: self.bandwidth,
            bits: self.bits,
            cycles: self.cycles,
            remote_backhaul: self.remote_backhaul,
            pathloss_exp: self.pathloss_exp,
            noise_var: self.noise_var,
            area: self.area,
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if self.deadlines.is_empty() || self.deadlines.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(ExperimentError::Schema("L must list positive deadlines".into()));
        }
        if self.scenario.is_none() && (self.instances == 0 || self.users == 0 || self.mec_capacity.is_empty()) {
            return Err(ExperimentError::Schema("need at least one instance, user and MEC".into()));
        }
        if !(self.bits.0 <= self.bits.1 && self.cycles.0 <= self.cycles.1) {
            return Err(ExperimentError::Schema("bits and cycles ranges must be ordered".into()));
        }
        Ok(())
    }
}

impl Scenario for OffloadScenario {
    const AXES: &'static [(&'static str, &'static str)] = &[("L", "L")];

    fn run(&self, ctx: &RunContext) -> Result<ExperimentOutput, ExperimentError> {
        self.validate()?;
        let params = PscaParams { p_exp: self.p_exp, ..PscaParams::default() };
        let fixed = match &self.scenario {
            Some(s) => {
                let v = s.load(ctx)?;
                Some(OffloadInstance::from_json(&v.to_string())?)
            }
            None => None,
        };
        let instances = if fixed.is_some() { 1 } else { self.instances };
        let seeds = ctx.seeds(instances);
        let jobs: Vec<(usize, usize)> = (0..self.deadlines.len()).flat_map(|l| (0..instances).map(move |i| (l, i))).collect();
        let outcomes: Vec<Outcome> = jobs
            .par_iter()
            .map(|&(l, i)| {
                let deadline = self.deadlines[l];
                let s = match &fixed {
                    Some(base) => {
                        let mut s = base.clone();
                        s.tasks.iter_mut().for_each(|t| t.deadline = deadline);
                        s
                    }
                    None => generate_scenario(&self.spec(deadline), seeds[i]),
                };
                evaluate(&s, &params, self.exhaustive)
            })
            .collect::<Result<_, _>>()?;

        let mut table =
            Table::new(&["L", "psca_power", "exhaustive_power", "snr_joint_power", "snr_disjoint_power", "infeasible_count"]);
        let mut any_feasible = false;
        for (l, chunk) in outcomes.chunks(instances).enumerate() {
            let feasible: Vec<[f64; 4]> = chunk
                .iter()
                .filter_map(|o| {
                    let p = o.powers;
                    Some([p[0]?, p[1]?, p[2]?, p[3]?])
                })
                .collect();
            any_feasible |= !feasible.is_empty();
            let mean = |k: usize| {
                if feasible.is_empty() {
                    f64::NAN
                } else {
                    feasible.iter().map(|p| p[k]).sum::<f64>() / feasible.len() as f64
                }
            };
            table.row(&[
                format_float(self.deadlines[l]),
                format_float(mean(0)),
                format_float(mean(1)),
                format_float(mean(2)),
                format_float(mean(3)),
                (chunk.len() - feasible.len()).to_string(),
            ]);
        }
        if !any_feasible {
            return Err(ExperimentError::Infeasible(
                "no deadline on the sweep admits a feasible allocation for every method".into(),
            ));
        }
        Ok(ExperimentOutput { csv: table.finish(), summary: None })
    }
}

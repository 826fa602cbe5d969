//! Joint radio and computation resource allocation for computation offloading.
//!
//! Users upload `b_k` bits over an interference-free link of spectral
//! efficiency `log2(1 + α p)` and have `w_k` CPU cycles executed at a MEC
//! server. The end-to-end latency `c_k / r(p_k) + w_k / f_k + T_B` must stay
//! within the deadline, where `c_k = b_k / B` and the fixed receive term is
//! folded into the deadline. The goal is minimum total transmit power.

mod barrier;
mod baselines;
mod psca;
mod single;

pub use baselines::{exhaustive_baseline, snr_association_baseline, EXHAUSTIVE_BUDGET};
pub use psca::{penalty_gradient, penalty_value, solve_multi_mec_psca, PscaParams, PscaResult, PscaTraceEntry};
pub use single::{minimal_power, proportional_rate_baseline, solve_mec_subproblem, solve_single_mec, MecSolution, MecUser};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OffloadError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("negative transmit power {0}")]
    NegativePower(f64),
    #[error("infeasible: user {user} cannot meet its deadline; deadlines must grow by a factor {inflation:.6}")]
    Infeasible { user: usize, inflation: f64 },
    #[error("relaxed problem has no feasible starting point")]
    RelaxedInfeasible,
    #[error("rounded assignment has no feasible power/rate completion (user {user})")]
    RoundingInfeasible { user: usize },
    #[error("enumeration of {count} assignments exceeds the budget of {budget}")]
    BudgetExceeded { count: f64, budget: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// One offloaded computation task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffloadTask {
    /// Bits to upload.
    #[serde(rename = "b")]
    pub bits: f64,
    /// CPU cycles to execute.
    #[serde(rename = "w")]
    pub cycles: f64,
    /// End-to-end deadline in seconds.
    #[serde(rename = "L")]
    pub deadline: f64,
    /// Transmit power cap in watts.
    #[serde(rename = "Pcap")]
    pub power_cap: f64,
    /// Fixed receive-side latency in seconds.
    #[serde(rename = "T_rx", default)]
    pub rx_latency: f64,
}

impl OffloadTask {
    pub fn new(bits: f64, cycles: f64, deadline: f64, power_cap: f64) -> Self {
        Self { bits, cycles, deadline, power_cap, rx_latency: 0.0 }
    }

    /// Deadline left for upload, backhaul and execution.
    pub fn budget(&self) -> f64 {
        self.deadline - self.rx_latency
    }

    pub fn validate(&self, k: usize) -> Result<(), OffloadError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.bits) && ok(self.cycles) && ok(self.deadline) && ok(self.power_cap)) {
            return Err(OffloadError::InvalidScenario(format!("user {k}: b, w, L, Pcap must be positive")));
        }
        if !(self.rx_latency.is_finite() && self.rx_latency >= 0.0) || self.budget() <= 0.0 {
            return Err(OffloadError::InvalidScenario(format!(
                "user {k}: receive latency must be non-negative and below the deadline"
            )));
        }
        Ok(())
    }
}

/// Bandwidth and equivalent channel gains `alpha[k][n]` (1/W).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub bandwidth: f64,
    pub alpha: Vec<Vec<f64>>,
}

impl ChannelModel {
    /// `α_kn = |h_kn|² / (d_kn^γ σ_n²)`.
    pub fn from_physical(
        bandwidth: f64,
        gain_sq: &[Vec<f64>],
        distance: &[Vec<f64>],
        noise_var: &[f64],
        pathloss_exp: f64,
    ) -> Self {
        let alpha = gain_sq
            .iter()
            .zip(distance)
            .map(|(h, d)| h.iter().zip(d).zip(noise_var).map(|((h, d), s)| h / (d.powf(pathloss_exp) * s)).collect())
            .collect();
        Self { bandwidth, alpha }
    }

    /// Upload time scale `c_k = b_k / B`.
    pub fn c(&self, task: &OffloadTask) -> f64 {
        task.bits / self.bandwidth
    }
}

/// Access points, MEC servers and the backhaul between them.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCloudTopology {
    /// `F[m]` in cycles per second.
    pub mec_capacity: Vec<f64>,
    /// `T_B[n][m]` in seconds.
    pub backhaul: Vec<Vec<f64>>,
}

impl EdgeCloudTopology {
    pub fn num_aps(&self) -> usize {
        self.backhaul.len()
    }

    pub fn num_mecs(&self) -> usize {
        self.mec_capacity.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub tasks: Vec<OffloadTask>,
    pub channel: ChannelModel,
    pub topology: EdgeCloudTopology,
}

/// Association, powers and computation rates.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `a[k][n][m]`.
    pub a: Vec<Vec<Vec<f64>>>,
    pub powers: Vec<f64>,
    /// `rates[m][k]`.
    pub rates: Vec<Vec<f64>>,
}

impl Assignment {
    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    /// `(n, m)` of the largest entry of `a[k]`, ties to the lowest `n * N_c + m`.
    pub fn pair(&self, k: usize) -> (usize, usize) {
        argmax_pair(&self.a[k])
    }
}

pub(crate) fn argmax_pair(a: &[Vec<f64>]) -> (usize, usize) {
    let mut best = (0, 0);
    for (n, row) in a.iter().enumerate() {
        for (m, &v) in row.iter().enumerate() {
            if v > a[best.0][best.1] {
                best = (n, m);
            }
        }
    }
    best
}

/// Latency of user `k` served through `(n, m)` at power `p` and rate `f`.
pub fn latency(s: &Scenario, k: usize, n: usize, m: usize, p: f64, f: f64) -> f64 {
    let task = &s.tasks[k];
    let r = spectral_efficiency(p, s.channel.alpha[k][n]).unwrap_or(0.0);
    s.channel.c(task) / r + task.cycles / f + s.topology.backhaul[n][m] + task.rx_latency
}

/// `log2(1 + α p)`.
pub fn spectral_efficiency(p: f64, alpha: f64) -> Result<f64, OffloadError> {
    if p < 0.0 || p.is_nan() {
        return Err(OffloadError::NegativePower(p));
    }
    Ok((alpha * p).ln_1p() / std::f64::consts::LN_2)
}

impl Scenario {
    pub fn num_users(&self) -> usize {
        self.tasks.len()
    }

    pub fn validate(&self) -> Result<(), OffloadError> {
        let k = self.tasks.len();
        let nb = self.topology.num_aps();
        let nc = self.topology.num_mecs();
        if k == 0 || nb == 0 || nc == 0 {
            return Err(OffloadError::InvalidScenario("need at least one user, AP and MEC".into()));
        }
        for (i, t) in self.tasks.iter().enumerate() {
            t.validate(i)?;
        }
        if !(self.channel.bandwidth.is_finite() && self.channel.bandwidth > 0.0) {
            return Err(OffloadError::InvalidScenario("bandwidth must be positive".into()));
        }
        if self.channel.alpha.len() != k || self.channel.alpha.iter().any(|r| r.len() != nb) {
            return Err(OffloadError::InvalidScenario(format!("alpha must be {k} x {nb}")));
        }
        if self.channel.alpha.iter().flatten().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(OffloadError::InvalidScenario("alpha entries must be positive".into()));
        }
        if self.topology.mec_capacity.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(OffloadError::InvalidScenario("MEC capacities must be positive".into()));
        }
        if self.topology.backhaul.iter().any(|r| r.len() != nc)
            || self.topology.backhaul.iter().flatten().any(|t| !(t.is_finite() && *t >= 0.0))
        {
            return Err(OffloadError::InvalidScenario(format!("T_B must be a non-negative {nb} x {nc} matrix")));
        }
        Ok(())
    }

    /// Per-MEC subproblem users for the given `(n, m)` choice of each user.
    pub(crate) fn mec_users(&self, pairs: &[(usize, usize)], m: usize) -> (Vec<usize>, Vec<MecUser>) {
        let mut ids = Vec::new();
        let mut users = Vec::new();
        for (k, &(n, mm)) in pairs.iter().enumerate() {
            if mm != m {
                continue;
            }
            let t = &self.tasks[k];
            ids.push(k);
            users.push(MecUser {
                c: self.channel.c(t),
                cycles: t.cycles,
                budget: t.budget() - self.topology.backhaul[n][m],
                alpha: self.channel.alpha[k][n],
                power_cap: t.power_cap,
            });
        }
        (ids, users)
    }

    /// Optimal powers and rates for a fixed binary association.
    pub fn complete_assignment(&self, pairs: &[(usize, usize)]) -> Result<Assignment, OffloadError> {
        let k = self.num_users();
        let (nb, nc) = (self.topology.num_aps(), self.topology.num_mecs());
        let mut a = vec![vec![vec![0.0; nc]; nb]; k];
        let mut powers = vec![0.0; k];
        let mut rates = vec![vec![0.0; k]; nc];
        for (u, &(n, m)) in pairs.iter().enumerate() {
            a[u][n][m] = 1.0;
        }
        for m in 0..nc {
            let (ids, users) = self.mec_users(pairs, m);
            if ids.is_empty() {
                continue;
            }
            let sol = solve_mec_subproblem(&users, self.topology.mec_capacity[m]).map_err(|e| match e {
                OffloadError::Infeasible { user, inflation } => OffloadError::Infeasible { user: ids[user], inflation },
                other => other,
            })?;
            for (i, &u) in ids.iter().enumerate() {
                powers[u] = sol.powers[i];
                rates[m][u] = sol.rates[i];
            }
        }
        Ok(Assignment { a, powers, rates })
    }

    pub fn from_json(text: &str) -> Result<Self, OffloadError> {
        let raw: ScenarioJson = serde_json::from_str(text).map_err(|e| OffloadError::InvalidScenario(e.to_string()))?;
        let s = Scenario {
            tasks: raw.users,
            channel: ChannelModel { bandwidth: raw.bandwidth, alpha: raw.alpha },
            topology: EdgeCloudTopology { mec_capacity: raw.capacity, backhaul: raw.backhaul },
        };
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioJson {
            users: self.tasks.clone(),
            bandwidth: self.channel.bandwidth,
            alpha: self.channel.alpha.clone(),
            capacity: self.topology.mec_capacity.clone(),
            backhaul: self.topology.backhaul.clone(),
        })
        .expect("scenario serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioJson {
    users: Vec<OffloadTask>,
    #[serde(rename = "B")]
    bandwidth: f64,
    alpha: Vec<Vec<f64>>,
    #[serde(rename = "F")]
    capacity: Vec<f64>,
    #[serde(rename = "T_B")]
    backhaul: Vec<Vec<f64>>,
}

/// Checks constraints i)-iv) of the mixed-binary problem. Returns a
/// description of the first violation.
pub fn validate_assignment(s: &Scenario, x: &Assignment, tol: f64) -> Result<(), String> {
    let k = s.num_users();
    let (nb, nc) = (s.topology.num_aps(), s.topology.num_mecs());
    if x.a.len() != k || x.powers.len() != k || x.rates.len() != nc {
        return Err("assignment dimensions do not match the scenario".into());
    }
    for u in 0..k {
        if x.a[u].len() != nb || x.a[u].iter().any(|r| r.len() != nc) {
            return Err(format!("user {u}: a has the wrong shape"));
        }
        let mut ones = 0;
        for n in 0..nb {
            for m in 0..nc {
                let v = x.a[u][n][m];
                if v == 1.0 {
                    ones += 1;
                    let lat = latency(s, u, n, m, x.powers[u], x.rates[m][u]);
                    if !(lat <= s.tasks[u].deadline * (1.0 + tol)) {
                        return Err(format!("user {u}: latency {lat} exceeds deadline {}", s.tasks[u].deadline));
                    }
                } else if v != 0.0 {
                    return Err(format!("user {u}: a[{n}][{m}] = {v} is not binary"));
                }
            }
        }
        if ones != 1 {
            return Err(format!("user {u}: served by {ones} pairs"));
        }
        let p = x.powers[u];
        if !(p > 0.0 && p <= s.tasks[u].power_cap * (1.0 + tol)) {
            return Err(format!("user {u}: power {p} outside (0, {}]", s.tasks[u].power_cap));
        }
    }
    for m in 0..nc {
        if x.rates[m].len() != k || x.rates[m].iter().any(|f| !(*f >= 0.0)) {
            return Err(format!("MEC {m}: rates must be non-negative"));
        }
        let load: f64 = (0..k).map(|u| (0..nb).map(|n| x.a[u][n][m]).sum::<f64>() * x.rates[m][u]).sum();
        if load > s.topology.mec_capacity[m] * (1.0 + tol) {
            return Err(format!("MEC {m}: load {load} exceeds capacity {}", s.topology.mec_capacity[m]));
        }
    }
    Ok(())
}

/// Parameters of the random scenario generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub users: usize,
    pub mec_capacity: Vec<f64>,
    pub power_cap: f64,
    pub deadline: f64,
    pub bandwidth: f64,
    /// Uniform range of uploaded bits.
    pub bits: (f64, f64),
    /// Uniform range of CPU cycles.
    pub cycles: (f64, f64),
    /// Backhaul latency between an AP and a MEC that is not co-located with it.
    pub remote_backhaul: f64,
    pub pathloss_exp: f64,
    pub noise_var: f64,
    /// Side of the square deployment area in meters.
    pub area: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            users: 4,
            mec_capacity: vec![2.7e9, 6e8],
            power_cap: 0.2,
            deadline: 0.8,
            bandwidth: 1e6,
            bits: (2e5, 6e5),
            cycles: (5e7, 1.5e8),
            remote_backhaul: 0.02,
            pathloss_exp: 3.0,
            noise_var: 1e-8,
            area: 200.0,
        }
    }
}

/// Random scenario with one AP per MEC (AP `n` co-located with MEC `n`),
/// uniform user positions and Rayleigh fading.
pub fn generate_scenario(spec: &ScenarioSpec, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nc = spec.mec_capacity.len();
    // APs on a circle around the centre of the area
    let aps: Vec<(f64, f64)> = (0..nc)
        .map(|n| {
            let ang = std::f64::consts::TAU * n as f64 / nc as f64 + std::f64::consts::FRAC_PI_4;
            (0.5 * spec.area + 0.3 * spec.area * ang.cos(), 0.5 * spec.area + 0.3 * spec.area * ang.sin())
        })
        .collect();
    let mut tasks = Vec::with_capacity(spec.users);
    let mut gain_sq = Vec::with_capacity(spec.users);
    let mut dist = Vec::with_capacity(spec.users);
    for _ in 0..spec.users {
        let bits = rng.random_range(spec.bits.0..=spec.bits.1);
        let cycles = rng.random_range(spec.cycles.0..=spec.cycles.1);
        tasks.push(OffloadTask::new(bits, cycles, spec.deadline, spec.power_cap));
        let pos = (rng.random_range(0.0..spec.area), rng.random_range(0.0..spec.area));
        let d: Vec<f64> = aps.iter().map(|ap| ((pos.0 - ap.0).powi(2) + (pos.1 - ap.1).powi(2)).sqrt().max(10.0)).collect();
        let h: Vec<f64> = (0..nc).map(|_| Exp1.sample(&mut rng)).collect();
        dist.push(d);
        gain_sq.push(h);
    }
    let channel = ChannelModel::from_physical(spec.bandwidth, &gain_sq, &dist, &vec![spec.noise_var; nc], spec.pathloss_exp);
    let backhaul = (0..nc).map(|n| (0..nc).map(|m| if n == m { 0.0 } else { spec.remote_backhaul }).collect()).collect();
    Scenario { tasks, channel, topology: EdgeCloudTopology { mec_capacity: spec.mec_capacity.clone(), backhaul } }
}

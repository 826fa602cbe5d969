//! Time-slotted dynamic caching over a directed content network.
//!
//! Over a window of `T` slots every node `u` holds a storage indicator
//! `s_u[k, n]` per object and every link `vu` a transport indicator
//! `t_vu[k, n]`. A request for `k` at `u` in slot `n` is met when `k` is stored
//! at `u` in slot `n` or arrives over an incoming link within `D` slots.
//! Content can only be stored or forwarded in slot `n` if it was held or
//! received in slot `n - 1`. Slot 0 follows the state before the window:
//! repositories hold their objects and nothing is in flight.

mod baseline;
mod generate;

pub use baseline::shortest_path_baseline;
pub use generate::{generate_caching_network, CachingSpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::{solve_lp, LinearProgram, LpError, LpStatus, Sense};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CachingError {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("negative popularity {0}")]
    NegativePopularity(f64),
    #[error("schedule dimensions do not match the network: {0}")]
    DimensionMismatch(String),
    #[error("request {index} at slot {slot} lies outside the window of {horizon} slots")]
    RequestOutsideWindow { index: usize, slot: usize, horizon: usize },
    #[error("infeasible: {family} cannot be met")]
    Infeasible { family: ConstraintFamily },
    #[error("integer schedules are not solved exactly; use the relaxation")]
    IntegerUnsupported,
    #[error("request {index}: object {object} is not reachable from any repository")]
    Unreachable { index: usize, object: usize },
    #[error("request {index}: no route within the deadline under the transport caps")]
    RouteConflict { index: usize },
    #[error("LP solver failed: {0}")]
    Solver(String),
}

impl From<LpError> for CachingError {
    fn from(e: LpError) -> Self {
        CachingError::Solver(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintFamily {
    /// Request deadlines (a) given topology and continuity (b), (c).
    RequestDeadline,
    StorageCapacity,
    TransportCapacity,
}

impl std::fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ConstraintFamily::RequestDeadline => "request deadlines (a)",
            ConstraintFamily::StorageCapacity => "storage capacity (e)",
            ConstraintFamily::TransportCapacity => "transport capacity (f)",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    /// Objects per slot.
    pub capacity: u32,
    /// Cost of moving each object over the link once.
    pub cost: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    #[serde(rename = "u")]
    pub node: usize,
    #[serde(rename = "k")]
    pub object: usize,
    #[serde(rename = "n")]
    pub slot: usize,
    /// Maximum delivery time in slots.
    #[serde(rename = "D")]
    pub deadline: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CachingNetwork {
    pub nodes: usize,
    pub objects: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    /// Slot length in seconds.
    pub dtau: f64,
    /// Objects each node can hold.
    pub storage: Vec<u32>,
    pub links: Vec<Link>,
    /// Objects permanently held by each node.
    pub repositories: Vec<Vec<usize>>,
    pub requests: Vec<Request>,
    /// `popularity[u][k]`.
    pub popularity: Vec<Vec<f64>>,
    pub c0: f64,
    #[serde(rename = "P0")]
    pub p0: f64,
}

/// `s[u][k][n]` and `t[link][k][n]`, binary or relaxed.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheSchedule {
    pub s: Vec<Vec<Vec<f64>>>,
    pub t: Vec<Vec<Vec<f64>>>,
}

impl CacheSchedule {
    pub fn zeros(net: &CachingNetwork) -> Self {
        let (k, t) = (net.objects, net.horizon);
        Self { s: vec![vec![vec![0.0; t]; k]; net.nodes], t: vec![vec![vec![0.0; t]; k]; net.links.len()] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleCost {
    pub storage: f64,
    pub transport: f64,
    pub total: f64,
}

impl ScheduleCost {
    /// Cost the optimizer minimizes: transport only when storage is ignored.
    pub fn objective(&self, ignore_storage_cost: bool) -> f64 {
        if ignore_storage_cost {
            self.transport
        } else {
            self.total
        }
    }
}

/// Per-slot cost of keeping an object of popularity `p`: `c0 / (1 + p/P0)`.
pub fn storage_unit_cost(popularity: f64, c0: f64, p0: f64) -> Result<f64, CachingError> {
    if !(popularity >= 0.0) {
        return Err(CachingError::NegativePopularity(popularity));
    }
    Ok(c0 / (1.0 + popularity / p0))
}

impl CachingNetwork {
    pub fn validate(&self) -> Result<(), CachingError> {
        let bad = |m: String| Err(CachingError::InvalidNetwork(m));
        if self.nodes == 0 || self.objects == 0 || self.horizon == 0 {
            return bad("need at least one node, object and slot".into());
        }
        if !(self.c0 > 0.0 && self.p0 > 0.0 && self.dtau > 0.0) {
            return bad("c0, P0 and dtau must be positive".into());
        }
        if self.storage.len() != self.nodes || self.storage.contains(&0) {
            return bad("one positive storage cap per node required".into());
        }
        if self.repositories.len() != self.nodes || self.popularity.len() != self.nodes {
            return bad("repositories and popularity need one entry per node".into());
        }
        for (u, row) in self.popularity.iter().enumerate() {
            if row.len() != self.objects {
                return bad(format!("node {u}: popularity needs {} entries", self.objects));
            }
            for &p in row {
                storage_unit_cost(p, self.c0, self.p0)?;
            }
        }
        let mut hosted = vec![false; self.objects];
        for (u, repo) in self.repositories.iter().enumerate() {
            let mut seen = vec![false; self.objects];
            for &k in repo {
                if k >= self.objects || seen[k] {
                    return bad(format!("node {u}: invalid or repeated repository object {k}"));
                }
                seen[k] = true;
                hosted[k] = true;
            }
            if repo.len() > self.storage[u] as usize {
                return bad(format!("node {u}: repository exceeds its storage cap"));
            }
        }
        if let Some(k) = hosted.iter().position(|h| !h) {
            return bad(format!("object {k} has no repository"));
        }
        for (i, l) in self.links.iter().enumerate() {
            if l.from >= self.nodes || l.to >= self.nodes || l.from == l.to {
                return bad(format!("link {i}: endpoints must be distinct valid nodes"));
            }
            if l.capacity == 0 || l.cost.len() != self.objects || l.cost.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
                return bad(format!("link {i}: positive capacity and one non-negative cost per object required"));
            }
        }
        for (i, r) in self.requests.iter().enumerate() {
            if r.node >= self.nodes || r.object >= self.objects {
                return bad(format!("request {i}: unknown node or object"));
            }
            if r.slot >= self.horizon {
                return Err(CachingError::RequestOutsideWindow { index: i, slot: r.slot, horizon: self.horizon });
            }
        }
        Ok(())
    }

    pub fn is_repository(&self, u: usize, k: usize) -> bool {
        self.repositories[u].contains(&k)
    }

    pub fn storage_cost(&self, u: usize, k: usize) -> f64 {
        storage_unit_cost(self.popularity[u][k], self.c0, self.p0).expect("validated")
    }

    /// Links entering each node.
    pub fn incoming(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.nodes];
        for (e, l) in self.links.iter().enumerate() {
            inc[l.to].push(e);
        }
        inc
    }

    /// One request per `(u, k, n)`; duplicates keep the tightest deadline.
    pub fn distinct_requests(&self) -> Vec<Request> {
        let mut out: Vec<Request> = Vec::new();
        for r in &self.requests {
            match out.iter_mut().find(|o| (o.node, o.object, o.slot) == (r.node, r.object, r.slot)) {
                Some(o) => o.deadline = o.deadline.min(r.deadline),
                None => out.push(*r),
            }
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self, CachingError> {
        let net: Self = serde_json::from_str(text).map_err(|e| CachingError::InvalidNetwork(e.to_string()))?;
        net.validate()?;
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }
}

pub fn schedule_cost(net: &CachingNetwork, x: &CacheSchedule) -> Result<ScheduleCost, CachingError> {
    check_shape(net, x)?;
    let mut storage = 0.0;
    for u in 0..net.nodes {
        for k in 0..net.objects {
            let c = net.storage_cost(u, k);
            storage += x.s[u][k].iter().map(|v| v * c).sum::<f64>();
        }
    }
    let mut transport = 0.0;
    for (e, l) in net.links.iter().enumerate() {
        for k in 0..net.objects {
            transport += x.t[e][k].iter().map(|v| v * l.cost[k]).sum::<f64>();
        }
    }
    Ok(ScheduleCost { storage, transport, total: storage + transport })
}

fn check_shape(net: &CachingNetwork, x: &CacheSchedule) -> Result<(), CachingError> {
    let ok = |m: &Vec<Vec<Vec<f64>>>, rows: usize| {
        m.len() == rows && m.iter().all(|r| r.len() == net.objects && r.iter().all(|v| v.len() == net.horizon))
    };
    if !ok(&x.s, net.nodes) || !ok(&x.t, net.links.len()) {
        return Err(CachingError::DimensionMismatch(format!(
            "expected s {}x{}x{} and t {}x{}x{}",
            net.nodes,
            net.objects,
            net.horizon,
            net.links.len(),
            net.objects,
            net.horizon
        )));
    }
    Ok(())
}

/// Variable numbering of the caching program.
#[derive(Debug, Clone, Copy)]
pub struct VarLayout {
    nodes: usize,
    objects: usize,
    horizon: usize,
}

impl VarLayout {
    pub fn s(&self, u: usize, k: usize, n: usize) -> usize {
        (u * self.objects + k) * self.horizon + n
    }
    pub fn t(&self, e: usize, k: usize, n: usize) -> usize {
        (self.nodes * self.objects + e * self.objects + k) * self.horizon + n
    }
}

#[derive(Debug, Clone)]
pub struct CachingProgram {
    pub lp: LinearProgram,
    pub layout: VarLayout,
    /// Whether the variables are meant to be binary.
    pub binary: bool,
    /// Family of each row.
    pub families: Vec<ConstraintFamily>,
}

impl CachingProgram {
    pub fn schedule(&self, net: &CachingNetwork, x: &[f64]) -> CacheSchedule {
        let mut out = CacheSchedule::zeros(net);
        for u in 0..net.nodes {
            for k in 0..net.objects {
                for n in 0..net.horizon {
                    out.s[u][k][n] = x[self.layout.s(u, k, n)];
                }
            }
        }
        for e in 0..net.links.len() {
            for k in 0..net.objects {
                for n in 0..net.horizon {
                    out.t[e][k][n] = x[self.layout.t(e, k, n)];
                }
            }
        }
        out
    }
}

/// Linear program of the caching problem with constraints (a)-(g); the
/// variables are boxed in `[0, 1]` either way.
pub fn build_caching_lp(net: &CachingNetwork, relax: bool, ignore_storage_cost: bool) -> Result<CachingProgram, CachingError> {
    net.validate()?;
    let (nn, kk, tt) = (net.nodes, net.objects, net.horizon);
    let layout = VarLayout { nodes: nn, objects: kk, horizon: tt };
    let mut lp = LinearProgram::new((nn + net.links.len()) * kk * tt);
    let mut families = Vec::new();
    let incoming = net.incoming();

    for u in 0..nn {
        for k in 0..kk {
            let repo = net.is_repository(u, k);
            let c = if ignore_storage_cost { 0.0 } else { net.storage_cost(u, k) };
            for n in 0..tt {
                let j = layout.s(u, k, n);
                lp.objective[j] = c;
                // (d) repositories always hold their objects; other caches start empty
                if repo {
                    lp.set_bounds(j, 1.0, 1.0);
                } else if n == 0 {
                    lp.set_bounds(j, 0.0, 0.0);
                } else {
                    lp.set_bounds(j, 0.0, 1.0);
                }
            }
        }
    }
    for (e, l) in net.links.iter().enumerate() {
        for k in 0..kk {
            for n in 0..tt {
                let j = layout.t(e, k, n);
                lp.objective[j] = l.cost[k];
                // (c) in slot 0 only objects held before the window can leave
                let hi = if n == 0 && !net.is_repository(l.from, k) { 0.0 } else { 1.0 };
                lp.set_bounds(j, 0.0, hi);
            }
        }
    }
    // (a)
    for r in net.distinct_requests() {
        let mut row = vec![(layout.s(r.node, r.object, r.slot), 1.0)];
        for &e in &incoming[r.node] {
            for n in r.slot..=(r.slot + r.deadline).min(tt - 1) {
                row.push((layout.t(e, r.object, n), 1.0));
            }
        }
        lp.add(row, Sense::Ge, 1.0);
        families.push(ConstraintFamily::RequestDeadline);
    }
    for n in 1..tt {
        for k in 0..kk {
            // (b)
            for u in 0..nn {
                let mut row = vec![(layout.s(u, k, n), 1.0), (layout.s(u, k, n - 1), -1.0)];
                row.extend(incoming[u].iter().map(|&e| (layout.t(e, k, n - 1), -1.0)));
                lp.add(row, Sense::Le, 0.0);
                families.push(ConstraintFamily::RequestDeadline);
            }
            // (c)
            for (e, l) in net.links.iter().enumerate() {
                let v = l.from;
                let mut row = vec![(layout.t(e, k, n), 1.0), (layout.s(v, k, n - 1), -1.0)];
                row.extend(incoming[v].iter().map(|&w| (layout.t(w, k, n - 1), -1.0)));
                lp.add(row, Sense::Le, 0.0);
                families.push(ConstraintFamily::RequestDeadline);
            }
        }
    }
    for n in 0..tt {
        // (e)
        for u in 0..nn {
            if (net.storage[u] as usize) < kk {
                lp.add((0..kk).map(|k| (layout.s(u, k, n), 1.0)).collect(), Sense::Le, net.storage[u] as f64);
                families.push(ConstraintFamily::StorageCapacity);
            }
        }
        // (f)
        for (e, l) in net.links.iter().enumerate() {
            if (l.capacity as usize) < kk {
                lp.add((0..kk).map(|k| (layout.t(e, k, n), 1.0)).collect(), Sense::Le, l.capacity as f64);
                families.push(ConstraintFamily::TransportCapacity);
            }
        }
    }
    Ok(CachingProgram { lp, layout, binary: !relax, families })
}

#[derive(Debug, Clone)]
pub struct CachingSolution {
    pub schedule: CacheSchedule,
    /// Minimized cost (transport only when storage is ignored).
    pub cost: f64,
    pub breakdown: ScheduleCost,
}

/// Optimal relaxed schedule. Variables that can never carry an object to a
/// request are fixed to zero first; with non-negative costs this leaves the
/// optimum unchanged.
pub fn solve_caching(net: &CachingNetwork, relax: bool, ignore_storage_cost: bool) -> Result<CachingSolution, CachingError> {
    if !relax {
        return Err(CachingError::IntegerUnsupported);
    }
    let mut prog = build_caching_lp(net, relax, ignore_storage_cost)?;
    prune(net, &mut prog);
    let sol = solve_lp(&prog.lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(CachingError::Infeasible { family: diagnose(&prog)? }),
        other => return Err(CachingError::Solver(format!("{other:?}"))),
    }
    let x: Vec<f64> = sol.x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let schedule = prog.schedule(net, &x);
    let breakdown = schedule_cost(net, &schedule)?;
    Ok(CachingSolution { cost: breakdown.objective(ignore_storage_cost), schedule, breakdown })
}

/// Fixes to zero the variables no object can reach, and the non-repository
/// variables from which no request can be served in time.
fn prune(net: &CachingNetwork, prog: &mut CachingProgram) {
    let (nn, kk, tt) = (net.nodes, net.objects, net.horizon);
    let lay = prog.layout;
    let incoming = net.incoming();
    for k in 0..kk {
        // held[u][n]: u can hold k at the end of slot n (stored or received)
        let mut held = vec![vec![false; tt]; nn];
        let mut can_send = vec![vec![false; tt]; net.links.len()];
        for n in 0..tt {
            for (e, l) in net.links.iter().enumerate() {
                can_send[e][n] = if n == 0 { net.is_repository(l.from, k) } else { held[l.from][n - 1] };
            }
            for u in 0..nn {
                held[u][n] = net.is_repository(u, k) || incoming[u].iter().any(|&e| can_send[e][n]) || (n > 0 && held[u][n - 1]);
            }
        }
        // useful[u][n]: holding k at u at the end of slot n can still serve a request
        let mut useful_node = vec![vec![false; tt]; nn];
        let mut useful_link = vec![vec![false; tt]; net.links.len()];
        let reqs: Vec<Request> = net.distinct_requests().into_iter().filter(|r| r.object == k).collect();
        for n in (0..tt).rev() {
            for u in 0..nn {
                let stored_request = reqs.iter().any(|r| r.node == u && r.slot == n);
                // what u holds at the end of slot n can be stored or sent in slot n + 1
                let later = n + 1 < tt
                    && (useful_node[u][n + 1] || net.links.iter().enumerate().any(|(e, l)| l.from == u && useful_link[e][n + 1]));
                useful_node[u][n] = later || stored_request;
            }
            for (e, l) in net.links.iter().enumerate() {
                let direct = reqs.iter().any(|r| r.node == l.to && r.slot <= n && n <= r.slot + r.deadline);
                useful_link[e][n] = direct || useful_node[l.to][n];
            }
        }
        for u in 0..nn {
            if net.is_repository(u, k) {
                continue;
            }
            for n in 1..tt {
                let stored = held[u][n - 1];
                let needed = useful_node[u][n];
                if !(stored && needed) {
                    prog.lp.set_bounds(lay.s(u, k, n), 0.0, 0.0);
                }
            }
        }
        for (e, _) in net.links.iter().enumerate() {
            for n in 0..tt {
                if !(can_send[e][n] && useful_link[e][n]) {
                    prog.lp.set_bounds(lay.t(e, k, n), 0.0, 0.0);
                }
            }
        }
    }
}

/// Names the constraint family whose removal restores feasibility.
fn diagnose(prog: &CachingProgram) -> Result<ConstraintFamily, CachingError> {
    for fam in [ConstraintFamily::TransportCapacity, ConstraintFamily::StorageCapacity] {
        if !prog.families.contains(&fam) {
            continue;
        }
        let mut lp = prog.lp.clone();
        lp.constraints = lp.constraints.into_iter().zip(&prog.families).filter(|(_, f)| **f != fam).map(|(c, _)| c).collect();
        if solve_lp(&lp)?.status == LpStatus::Optimal {
            return Ok(fam);
        }
    }
    Ok(ConstraintFamily::RequestDeadline)
}

/// Checks constraints (a)-(g) in relaxed form. Returns the first violation.
pub fn validate_schedule(net: &CachingNetwork, x: &CacheSchedule, tol: f64) -> Result<(), String> {
    check_shape(net, x).map_err(|e| e.to_string())?;
    let (nn, kk, tt) = (net.nodes, net.objects, net.horizon);
    let incoming = net.incoming();
    let inflow = |u: usize, k: usize, n: usize| -> f64 { incoming[u].iter().map(|&e| x.t[e][k][n]).sum() };
    // state before the window
    let held_before = |u: usize, k: usize| if net.is_repository(u, k) { 1.0 } else { 0.0 };
    for u in 0..nn {
        for k in 0..kk {
            for n in 0..tt {
                let v = x.s[u][k][n];
                if !(-tol..=1.0 + tol).contains(&v) {
                    return Err(format!("(g) s[{u}][{k}][{n}] = {v}"));
                }
                if net.is_repository(u, k) && (v - 1.0).abs() > tol {
                    return Err(format!("(d) repository s[{u}][{k}][{n}] = {v}"));
                }
                if !net.is_repository(u, k) && n == 0 && v.abs() > tol {
                    return Err(format!("(d) initial s[{u}][{k}][0] = {v}"));
                }
                if n > 0 && v > x.s[u][k][n - 1] + inflow(u, k, n - 1) + tol {
                    return Err(format!("(b) s[{u}][{k}][{n}] = {v} without support"));
                }
            }
        }
    }
    for (e, l) in net.links.iter().enumerate() {
        for k in 0..kk {
            for n in 0..tt {
                let v = x.t[e][k][n];
                if !(-tol..=1.0 + tol).contains(&v) {
                    return Err(format!("(g) t[{e}][{k}][{n}] = {v}"));
                }
                let support = if n == 0 { held_before(l.from, k) } else { x.s[l.from][k][n - 1] + inflow(l.from, k, n - 1) };
                if v > support + tol {
                    return Err(format!("(c) t[{e}][{k}][{n}] = {v} without support {support}"));
                }
            }
        }
    }
    for r in net.distinct_requests() {
        let mut got = x.s[r.node][r.object][r.slot];
        for n in r.slot..=(r.slot + r.deadline).min(tt - 1) {
            got += inflow(r.node, r.object, n);
        }
        if got < 1.0 - tol {
            return Err(format!("(a) request {r:?} served {got}"));
        }
    }
    for n in 0..tt {
        for u in 0..nn {
            let load: f64 = (0..kk).map(|k| x.s[u][k][n]).sum();
            if load > net.storage[u] as f64 + tol {
                return Err(format!("(e) node {u} slot {n} stores {load}"));
            }
        }
        for (e, l) in net.links.iter().enumerate() {
            let load: f64 = (0..kk).map(|k| x.t[e][k][n]).sum();
            if load > l.capacity as f64 + tol {
                return Err(format!("(f) link {e} slot {n} carries {load}"));
            }
        }
    }
    Ok(())
}

//! Reactive baseline: every request pulls its object from the nearest
//! repository along a cheapest path, one hop per slot.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{schedule_cost, CacheSchedule, CachingError, CachingNetwork, CachingSolution};

/// Path key: transport cost, then hop count.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Key {
    fn plus(self, cost: f64) -> Key {
        Key(self.0 + cost, self.1 + 1)
    }
    fn same(self, other: Key) -> bool {
        self.1 == other.1 && (self.0 - other.0).abs() <= 1e-12 * (1.0 + self.0.abs())
    }
    fn less(self, other: Key) -> bool {
        !self.same(other) && (self.0, self.1) < (other.0, other.1)
    }
}

#[derive(PartialEq)]
struct Item(Key, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (cost, hops, node)
        (other.0 .0, other.0 .1, other.1).partial_cmp(&(self.0 .0, self.0 .1, self.1)).unwrap_or(Ordering::Equal)
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cheapest key from every node to `target` for object `k`.
fn distances_to(net: &CachingNetwork, target: usize, k: usize) -> Vec<Option<Key>> {
    let mut dist: Vec<Option<Key>> = vec![None; net.nodes];
    let incoming = net.incoming();
    let mut heap = BinaryHeap::new();
    dist[target] = Some(Key(0.0, 0));
    heap.push(Item(Key(0.0, 0), target));
    while let Some(Item(key, x)) = heap.pop() {
        if dist[x].is_some_and(|d| d.less(key)) {
            continue;
        }
        for &e in &incoming[x] {
            let l = &net.links[e];
            let cand = key.plus(l.cost[k]);
            if dist[l.from].is_none_or(|d| cand.less(d)) {
                dist[l.from] = Some(cand);
                heap.push(Item(cand, l.from));
            }
        }
    }
    dist
}

/// Links of the lexicographically smallest cheapest path from the nearest
/// repository of `k` to `u`; ties between repositories go to the lowest index.
fn route(net: &CachingNetwork, u: usize, k: usize) -> Option<Vec<usize>> {
    let dist = distances_to(net, u, k);
    let mut best: Option<(Key, usize)> = None;
    for v in 0..net.nodes {
        if !net.is_repository(v, k) {
            continue;
        }
        if let Some(d) = dist[v] {
            if best.is_none_or(|(b, _)| d.less(b)) {
                best = Some((d, v));
            }
        }
    }
    let (_, mut x) = best?;
    let mut links = Vec::new();
    while x != u {
        let here = dist[x].expect("on a shortest path");
        let next = net
            .links
            .iter()
            .enumerate()
            .filter(|(_, l)| l.from == x)
            .filter(|(_, l)| dist[l.to].is_some_and(|d| d.plus(l.cost[k]).same(here)))
            .min_by_key(|(e, l)| (l.to, *e))
            .map(|(e, _)| e)?;
        links.push(next);
        x = net.links[next].to;
    }
    Some(links)
}

/// Serves requests in order. Each one is skipped when its object is already
/// stored at or arriving at the node in time; otherwise it is routed from the
/// earliest start slot at which every hop has spare capacity.
pub fn shortest_path_baseline(net: &CachingNetwork, ignore_storage_cost: bool) -> Result<CachingSolution, CachingError> {
    net.validate()?;
    let tt = net.horizon;
    let incoming = net.incoming();
    let mut x = CacheSchedule::zeros(net);
    for u in 0..net.nodes {
        for &k in &net.repositories[u] {
            x.s[u][k] = vec![1.0; tt];
        }
    }
    let mut load = vec![vec![0u32; tt]; net.links.len()];
    for (index, r) in net.requests.iter().enumerate() {
        let (u, k) = (r.node, r.object);
        let last = (r.slot + r.deadline).min(tt - 1);
        let served = x.s[u][k][r.slot] > 0.0 || (r.slot..=last).any(|n| incoming[u].iter().any(|&e| x.t[e][k][n] > 0.0));
        if served {
            continue;
        }
        let path = route(net, u, k).ok_or(CachingError::Unreachable { index, object: k })?;
        let hops = path.len();
        let start = (r.slot..=last).find(|&s0| {
            s0 + hops - 1 <= last
                && path.iter().enumerate().all(|(i, &e)| x.t[e][k][s0 + i] > 0.0 || load[e][s0 + i] < net.links[e].capacity)
        });
        let Some(s0) = start else {
            return Err(CachingError::RouteConflict { index });
        };
        for (i, &e) in path.iter().enumerate() {
            if x.t[e][k][s0 + i] == 0.0 {
                x.t[e][k][s0 + i] = 1.0;
                load[e][s0 + i] += 1;
            }
        }
    }
    let breakdown = schedule_cost(net, &x)?;
    Ok(CachingSolution { cost: breakdown.objective(ignore_storage_cost), schedule: x, breakdown })
}

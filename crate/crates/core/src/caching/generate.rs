//! Random caching instances: a connected bidirectional topology, a few
//! repositories holding every object and Bernoulli request arrivals.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CachingError, CachingNetwork, Link, Request};

#[derive(Debug, Clone, PartialEq)]
pub struct CachingSpec {
    pub nodes: usize,
    pub objects: usize,
    pub horizon: usize,
    pub repositories: usize,
    pub storage: u32,
    pub link_capacity: u32,
    /// Probability of each extra link on top of a random spanning tree.
    pub extra_link_prob: f64,
    /// Expected requests per slot over the whole network.
    pub arrival_rate: f64,
    pub deadline: usize,
    /// Every node lies within this many hops of a repository.
    pub max_repository_hops: usize,
}

impl Default for CachingSpec {
    fn default() -> Self {
        Self {
            nodes: 10,
            objects: 4,
            horizon: 25,
            repositories: 3,
            storage: 4,
            link_capacity: 2,
            extra_link_prob: 0.2,
            arrival_rate: 1.0,
            deadline: 1,
            max_repository_hops: 2,
        }
    }
}

const MAX_ATTEMPTS: usize = 10_000;

/// Unit link costs, uniform popularity. Requests fall in slots that leave
/// room for a `max_repository_hops`-hop delivery inside the window.
pub fn generate_caching_network(spec: &CachingSpec, seed: u64) -> Result<CachingNetwork, CachingError> {
    let bad = |m: &str| CachingError::InvalidNetwork(m.into());
    if spec.nodes < 2 || spec.repositories == 0 || spec.repositories > spec.nodes || spec.objects == 0 {
        return Err(bad("need at least two nodes and between one and `nodes` repositories"));
    }
    if spec.horizon < spec.max_repository_hops || spec.max_repository_hops == 0 {
        return Err(bad("horizon must cover the repository distance"));
    }
    if !(0.0..=1.0).contains(&spec.extra_link_prob) || !(spec.arrival_rate >= 0.0) {
        return Err(bad("extra_link_prob must lie in [0, 1] and arrival_rate must be non-negative"));
    }
    if (spec.storage as usize) < spec.objects {
        return Err(bad("repositories need room for every object"));
    }
    let n = spec.nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let mut adj = vec![vec![false; n]; n];
        for v in 1..n {
            let u = rng.random_range(0..v);
            adj[u][v] = true;
            adj[v][u] = true;
        }
        for u in 0..n {
            for v in (u + 1)..n {
                if !adj[u][v] && rng.random::<f64>() < spec.extra_link_prob {
                    adj[u][v] = true;
                    adj[v][u] = true;
                }
            }
        }
        let mut repos = sample(&mut rng, n, spec.repositories).into_vec();
        repos.sort_unstable();
        if hops_to_set(&adj, &repos).into_iter().max().unwrap_or(0) > spec.max_repository_hops {
            continue;
        }
        let mut links = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if adj[u][v] {
                    links.push(Link { from: u, to: v, capacity: spec.link_capacity, cost: vec![1.0; spec.objects] });
                }
            }
        }
        let mut repositories = vec![Vec::new(); n];
        for &r in &repos {
            repositories[r] = (0..spec.objects).collect();
        }
        let p = (spec.arrival_rate / (n * spec.objects) as f64).min(1.0);
        let last_slot = spec.horizon - spec.max_repository_hops;
        let mut requests = Vec::new();
        for slot in 0..=last_slot {
            for node in 0..n {
                for object in 0..spec.objects {
                    if rng.random::<f64>() < p {
                        requests.push(Request { node, object, slot, deadline: spec.deadline });
                    }
                }
            }
        }
        return Ok(CachingNetwork {
            nodes: n,
            objects: spec.objects,
            horizon: spec.horizon,
            dtau: 1.0,
            storage: vec![spec.storage; n],
            links,
            repositories,
            requests,
            popularity: vec![vec![0.0; spec.objects]; n],
            c0: 1.0,
            p0: 1.0,
        });
    }
    Err(bad("could not place repositories within the hop limit"))
}

fn hops_to_set(adj: &[Vec<bool>], set: &[usize]) -> Vec<usize> {
    let n = adj.len();
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    for &s in set {
        dist[s] = 0;
        queue.push_back(s);
    }
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if adj[u][v] && dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

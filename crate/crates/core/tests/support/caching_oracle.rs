use edgecloud::caching::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Cheapest binary schedule by depth-first search over every variable in slot
/// order, pruning on cost, support, capacity and expired requests.
pub struct BruteForce<'a> {
    net: &'a CachingNetwork,
    ignore_storage: bool,
    s: Vec<Vec<Vec<u8>>>,
    t: Vec<Vec<Vec<u8>>>,
    best: f64,
}

impl<'a> BruteForce<'a> {
    pub fn solve(net: &'a CachingNetwork, ignore_storage: bool) -> Option<f64> {
        let (nn, kk, tt) = (net.nodes, net.objects, net.horizon);
        let mut bf = BruteForce {
            net,
            ignore_storage,
            s: vec![vec![vec![0; tt]; kk]; nn],
            t: vec![vec![vec![0; tt]; kk]; net.links.len()],
            best: f64::INFINITY,
        };
        bf.dfs(0, 0.0);
        bf.best.is_finite().then_some(bf.best)
    }

    fn vars_per_slot(&self) -> usize {
        (self.net.nodes + self.net.links.len()) * self.net.objects
    }

    fn holds(&self, v: usize, k: usize, n: isize) -> bool {
        if n < 0 {
            return self.net.repositories[v].contains(&k);
        }
        let n = n as usize;
        self.s[v][k][n] == 1 || self.net.links.iter().enumerate().any(|(e, l)| l.to == v && self.t[e][k][n] == 1)
    }

    fn served(&self, r: &Request) -> bool {
        let last = (r.slot + r.deadline).min(self.net.horizon - 1);
        self.s[r.node][r.object][r.slot] == 1
            || (r.slot..=last)
                .any(|n| self.net.links.iter().enumerate().any(|(e, l)| l.to == r.node && self.t[e][r.object][n] == 1))
    }

    fn dfs(&mut self, idx: usize, cost: f64) {
        if cost >= self.best {
            return;
        }
        let per = self.vars_per_slot();
        let (kk, tt) = (self.net.objects, self.net.horizon);
        if idx.is_multiple_of(per) && idx > 0 {
            // every request whose window has closed must be served
            let done = idx / per;
            let ok = self.net.requests.iter().filter(|r| (r.slot + r.deadline).min(tt - 1) < done).all(|r| self.served(r));
            if !ok {
                return;
            }
        }
        if idx == per * tt {
            if self.net.requests.iter().all(|r| self.served(r)) {
                self.best = cost;
            }
            return;
        }
        let n = idx / per;
        let j = idx % per;
        let repo_s = self.net.nodes * kk;
        if j < repo_s {
            let (u, k) = (j / kk, j % kk);
            let c = if self.ignore_storage { 0.0 } else { self.net.storage_cost(u, k) };
            if self.net.repositories[u].contains(&k) {
                self.s[u][k][n] = 1;
                self.dfs(idx + 1, cost + c);
                return;
            }
            self.s[u][k][n] = 0;
            self.dfs(idx + 1, cost);
            let net = self.net;
            let load = (0..kk).filter(|&q| self.s[u][q][n] == 1 || net.repositories[u].contains(&q)).count();
            if n > 0 && self.holds(u, k, n as isize - 1) && load < self.net.storage[u] as usize {
                self.s[u][k][n] = 1;
                self.dfs(idx + 1, cost + c);
                self.s[u][k][n] = 0;
            }
        } else {
            let j = j - repo_s;
            let (e, k) = (j / kk, j % kk);
            let l = &self.net.links[e];
            self.t[e][k][n] = 0;
            self.dfs(idx + 1, cost);
            let load: usize = (0..kk).map(|q| self.t[e][q][n] as usize).sum();
            if self.holds(l.from, k, n as isize - 1) && load < l.capacity as usize {
                self.t[e][k][n] = 1;
                self.dfs(idx + 1, cost + l.cost[k]);
                self.t[e][k][n] = 0;
            }
        }
    }
}

pub fn random_toy(rng: &mut ChaCha8Rng) -> CachingNetwork {
    let nodes = rng.random_range(2..=4);
    let objects = rng.random_range(1..=2);
    let horizon = rng.random_range(2..=3);
    let mut links = Vec::new();
    let mut pairs = Vec::new();
    for v in 1..nodes {
        pairs.push((rng.random_range(0..v), v));
    }
    if nodes == 4 && rng.random::<bool>() {
        pairs.push((0, 3));
    }
    for (a, b) in pairs {
        for (from, to) in [(a, b), (b, a)] {
            let cost = (0..objects).map(|_| rng.random_range(1..=3) as f64).collect();
            links.push(Link { from, to, capacity: rng.random_range(1..=2), cost });
        }
    }
    let mut repositories = vec![Vec::new(); nodes];
    for k in 0..objects {
        repositories[rng.random_range(0..nodes)].push(k);
    }
    let storage = repositories.iter().map(|r| (r.len() as u32).max(rng.random_range(1..=2))).collect();
    let requests = (0..rng.random_range(1..=3))
        .map(|_| Request {
            node: rng.random_range(0..nodes),
            object: rng.random_range(0..objects),
            slot: rng.random_range(0..horizon),
            deadline: rng.random_range(0..=2),
        })
        .collect();
    let popularity = (0..nodes).map(|_| (0..objects).map(|_| rng.random_range(0.0..3.0)).collect()).collect();
    CachingNetwork { nodes, objects, horizon, dtau: 1.0, storage, links, repositories, requests, popularity, c0: 0.5, p0: 1.0 }
}

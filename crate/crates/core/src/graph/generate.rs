//! Two-cluster test topologies joined by a handful of bridge edges.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Edge, Graph, GraphError};

const MAX_ATTEMPTS: usize = 10_000;

/// A generated two-cluster graph with its ground-truth partition.
#[derive(Debug, Clone)]
pub struct TwoClusterGraph {
    pub graph: Graph,
    /// Cluster label (0 or 1) per vertex; cluster 0 holds ids `0..sizes.0`.
    pub labels: Vec<usize>,
    /// Inter-cluster edges as `(i, j)` with `i < j`.
    pub bridges: Vec<(usize, usize)>,
}

impl TwoClusterGraph {
    pub fn is_bridge(&self, i: usize, j: usize) -> bool {
        self.labels[i] != self.labels[j]
    }
}

/// Two Erdős–Rényi clusters with edge probability `p_in`, resampled until
/// each cluster is connected, plus exactly `bridges` random inter-cluster edges.
pub fn generate_two_cluster_graph(
    sizes: (usize, usize),
    p_in: f64,
    bridges: usize,
    seed: u64,
) -> Result<TwoClusterGraph, GraphError> {
    if !(p_in > 0.0 && p_in <= 1.0) {
        return Err(GraphError::InvalidParameter(format!("p_in must lie in (0, 1], got {p_in}")));
    }
    check_common(sizes, bridges)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = sample_connected(sizes.0, 0, &mut rng, |rng, n| {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < p_in {
                    edges.push((i, j));
                }
            }
        }
        edges
    })?;
    let b = sample_connected(sizes.1, sizes.0, &mut rng, |rng, n| {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < p_in {
                    edges.push((i, j));
                }
            }
        }
        edges
    })?;
    assemble(sizes, a, b, bridges, &mut rng)
}

/// Like [`generate_two_cluster_graph`] but each cluster gets an exact number of
/// internal edges, drawn uniformly (resampled until connected).
pub fn generate_two_cluster_graph_exact(
    sizes: (usize, usize),
    intra_edges: (usize, usize),
    bridges: usize,
    seed: u64,
) -> Result<TwoClusterGraph, GraphError> {
    check_common(sizes, bridges)?;
    for (n, m) in [(sizes.0, intra_edges.0), (sizes.1, intra_edges.1)] {
        let max = n * (n - 1) / 2;
        if m + 1 < n || m > max {
            return Err(GraphError::InvalidParameter(format!("cluster of {n} vertices cannot be connected with {m} edges")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |m: usize| {
        move |rng: &mut ChaCha8Rng, n: usize| {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
            let mut chosen: Vec<(usize, usize)> = sample(rng, pairs.len(), m).into_iter().map(|k| pairs[k]).collect();
            chosen.sort_unstable();
            chosen
        }
    };
    let a = sample_connected(sizes.0, 0, &mut rng, pick(intra_edges.0))?;
    let b = sample_connected(sizes.1, sizes.0, &mut rng, pick(intra_edges.1))?;
    assemble(sizes, a, b, bridges, &mut rng)
}

fn check_common(sizes: (usize, usize), bridges: usize) -> Result<(), GraphError> {
    if sizes.0 == 0 || sizes.1 == 0 {
        return Err(GraphError::InvalidParameter("cluster sizes must be positive".into()));
    }
    if bridges == 0 || bridges > sizes.0 * sizes.1 {
        return Err(GraphError::InvalidParameter(format!("need 1 <= bridges <= {}, got {bridges}", sizes.0 * sizes.1)));
    }
    Ok(())
}

fn sample_connected(
    n: usize,
    offset: usize,
    rng: &mut ChaCha8Rng,
    mut draw: impl FnMut(&mut ChaCha8Rng, usize) -> Vec<(usize, usize)>,
) -> Result<Vec<Edge>, GraphError> {
    for _ in 0..MAX_ATTEMPTS {
        let pairs = draw(rng, n);
        let local = Graph::new(n, pairs.iter().map(|&(i, j)| Edge::unit(i, j)))?;
        if local.is_connected() {
            return Ok(pairs.into_iter().map(|(i, j)| Edge::unit(i + offset, j + offset)).collect());
        }
    }
    Err(GraphError::GenerationFailed(format!("no connected cluster of {n} vertices after {MAX_ATTEMPTS} attempts")))
}

fn assemble(
    sizes: (usize, usize),
    mut a: Vec<Edge>,
    b: Vec<Edge>,
    bridges: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TwoClusterGraph, GraphError> {
    let n = sizes.0 + sizes.1;
    let mut bridge_pairs: Vec<(usize, usize)> =
        sample(rng, sizes.0 * sizes.1, bridges).into_iter().map(|k| (k / sizes.1, sizes.0 + k % sizes.1)).collect();
    bridge_pairs.sort_unstable();
    a.extend(b);
    a.extend(bridge_pairs.iter().map(|&(i, j)| Edge::unit(i, j)));
    let graph = Graph::new(n, a)?;
    let labels = (0..n).map(|v| usize::from(v >= sizes.0)).collect();
    Ok(TwoClusterGraph { graph, labels, bridges: bridge_pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_clusters_with_one_bridge() {
        let g = generate_two_cluster_graph((3, 3), 1.0, 1, 7).unwrap();
        assert_eq!(g.graph.num_edges(), 7);
        assert!(g.graph.is_connected());
        assert_eq!(g.bridges.len(), 1);
    }

    #[test]
    fn deterministic_for_seed() {
        let a = generate_two_cluster_graph((20, 20), 0.5, 4, 99).unwrap();
        let b = generate_two_cluster_graph((20, 20), 0.5, 4, 99).unwrap();
        assert_eq!(a.graph, b.graph);
        let c = generate_two_cluster_graph((20, 20), 0.5, 4, 100).unwrap();
        assert_ne!(a.graph, c.graph);
    }

    #[test]
    fn bridge_count_and_connectivity() {
        for seed in 0..25 {
            let g = generate_two_cluster_graph((8, 11), 0.4, 3, seed).unwrap();
            assert!(g.graph.is_connected());
            let inter = g.graph.edges().iter().filter(|e| g.is_bridge(e.i, e.j)).count();
            assert_eq!(inter, 3);
        }
    }

    #[test]
    fn exact_edge_counts() {
        let g = generate_two_cluster_graph_exact((30, 30), (378, 379), 4, 1).unwrap();
        assert_eq!(g.graph.num_edges(), 761);
        assert!(g.graph.is_connected());
    }

    #[test]
    fn impossible_parameters() {
        assert!(generate_two_cluster_graph((3, 3), 0.0, 1, 0).is_err());
        assert!(generate_two_cluster_graph((3, 3), 1.0, 0, 0).is_err());
        assert!(generate_two_cluster_graph((1, 1), 1.0, 2, 0).is_err());
        assert!(matches!(generate_two_cluster_graph((40, 3), 1e-6, 1, 0), Err(GraphError::GenerationFailed(_))));
        assert!(generate_two_cluster_graph_exact((5, 5), (3, 4), 1, 0).is_err());
    }
}

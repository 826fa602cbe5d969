//! Undirected weighted graphs and their Laplacians.
//!
//! A [`Graph`] stores each undirected edge once as `(i, j, w)` with `i < j`
//! after normalization. The Laplacian `L = D - A` is built densely; the
//! spectral side lives in [`eigen`].

mod eigen;
mod generate;

pub use eigen::{algebraic_connectivity, eigendecompose, LaplacianSpectrum};
pub use generate::{generate_two_cluster_graph, generate_two_cluster_graph_exact, TwoClusterGraph};

use std::collections::{BTreeMap, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge ({0}, {0}) is a self-loop")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("vertex {vertex} out of range for graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("edge ({i}, {j}) has invalid weight {w}")]
    InvalidWeight { i: usize, j: usize, w: f64 },
    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("matrix is not square: {0} x {1}")]
    NotSquare(usize, usize),
    #[error("need at least {need} vertices, got {got}")]
    TooFewVertices { need: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("graph generation failed: {0}")]
    GenerationFailed(String),
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },
}

/// One undirected edge. Vertex ids are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

impl Edge {
    pub fn new(i: usize, j: usize, w: f64) -> Self {
        Self { i, j, w }
    }

    pub fn unit(i: usize, j: usize) -> Self {
        Self { i, j, w: 1.0 }
    }

    /// The unordered endpoint pair with the smaller id first.
    pub fn key(&self) -> (usize, usize) {
        if self.i < self.j {
            (self.i, self.j)
        } else {
            (self.j, self.i)
        }
    }
}

/// Undirected weighted graph. Edges with weight zero are dropped on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self, GraphError> {
        let mut seen = BTreeMap::new();
        for e in edges {
            if e.i >= n || e.j >= n {
                return Err(GraphError::VertexOutOfRange { vertex: e.i.max(e.j), n });
            }
            if e.i == e.j {
                return Err(GraphError::SelfLoop(e.i));
            }
            if !e.w.is_finite() || e.w < 0.0 {
                return Err(GraphError::InvalidWeight { i: e.i, j: e.j, w: e.w });
            }
            let (a, b) = e.key();
            if seen.insert((a, b), e.w).is_some() {
                return Err(GraphError::DuplicateEdge(a, b));
            }
        }
        let edges = seen.into_iter().filter(|&(_, w)| w > 0.0).map(|((i, j), w)| Edge { i, j, w }).collect();
        Ok(Self { n, edges })
    }

    /// Builds a graph from a dense symmetric weight matrix; entries `<= 0` are absent.
    pub fn from_adjacency(a: &DMatrix<f64>) -> Result<Self, GraphError> {
        if a.nrows() != a.ncols() {
            return Err(GraphError::NotSquare(a.nrows(), a.ncols()));
        }
        let n = a.nrows();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let diff = (a[(i, j)] - a[(j, i)]).abs();
                if diff > 1e-12 * a[(i, j)].abs().max(1.0) {
                    return Err(GraphError::NotSymmetric { i, j, diff });
                }
                if a[(i, j)] > 0.0 {
                    edges.push(Edge::new(i, j, a[(i, j)]));
                }
            }
        }
        Self::new(n, edges)
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges sorted lexicographically by `(i, j)` with `i < j`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.edges.binary_search_by(|e| (e.i, e.j).cmp(&key)).map(|idx| self.edges[idx].w).unwrap_or(0.0)
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        adj
    }

    /// Connected-component label per vertex, labels assigned in order of the
    /// smallest vertex of each component.
    pub fn component_labels(&self) -> Vec<usize> {
        let adj = self.adjacency_lists();
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &u in &adj[v] {
                    if label[u] == usize::MAX {
                        label[u] = next;
                        queue.push_back(u);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn num_components(&self) -> usize {
        self.component_labels().into_iter().max().map_or(0, |m| m + 1)
    }

    pub fn is_connected(&self) -> bool {
        self.n > 0 && self.num_components() == 1
    }

    /// Copy of the graph with the weight of edge `(i, j)` replaced; weight 0 removes it.
    pub fn with_edge_weight(&self, i: usize, j: usize, w: f64) -> Result<Self, GraphError> {
        let key = if i < j { (i, j) } else { (j, i) };
        let mut edges: Vec<Edge> = self.edges.iter().copied().filter(|e| (e.i, e.j) != key).collect();
        edges.push(Edge::new(key.0, key.1, w));
        Self::new(self.n, edges)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GraphJson::from(self)).expect("graph serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, GraphJsonError> {
        let raw: GraphJson = serde_json::from_str(s)?;
        Ok(raw.try_into()?)
    }
}

/// Wire form: `{"n": int, "edges": [[i, j, w], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl From<&Graph> for GraphJson {
    fn from(g: &Graph) -> Self {
        Self { n: g.n, edges: g.edges.iter().map(|e| (e.i, e.j, e.w)).collect() }
    }
}

impl TryFrom<GraphJson> for Graph {
    type Error = GraphError;

    fn try_from(raw: GraphJson) -> Result<Self, Self::Error> {
        Graph::new(raw.n, raw.edges.into_iter().map(|(i, j, w)| Edge::new(i, j, w)))
    }
}

#[derive(Debug, Error)]
pub enum GraphJsonError {
    #[error("malformed graph JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Dense Laplacian `L = D - A`. An empty graph yields a 0x0 matrix.
pub fn build_laplacian(g: &Graph) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(g.n, g.n);
    for e in &g.edges {
        l[(e.i, e.j)] -= e.w;
        l[(e.j, e.i)] -= e.w;
        l[(e.i, e.i)] += e.w;
        l[(e.j, e.j)] += e.w;
    }
    l
}

/// Laplacian of an arbitrary dense symmetric nonnegative weight matrix (diagonal ignored).
pub fn laplacian_from_adjacency(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut l = -a.clone();
    for i in 0..n {
        l[(i, i)] = 0.0;
        let d: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)]).sum();
        l[(i, i)] = d;
    }
    l
}

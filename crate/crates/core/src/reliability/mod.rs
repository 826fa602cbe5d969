//! First-order Laplacian perturbation under edge failures, the perturbation
//! centrality built on it, and outage-aware power allocation that keeps the
//! expected loss of algebraic connectivity small.
//!
//! Eigen indices are 0-based: index 0 is the null eigenvalue of a connected
//! graph and index 1 is the algebraic connectivity.

mod allocation;
mod outage;

use nalgebra::DVector;
use thiserror::Error;

use crate::graph::{Edge, GraphError, LaplacianSpectrum};
use crate::solver::PgdError;

pub use allocation::{
    connected_spectrum, expected_connectivity_perturbation, solve_robust_allocation, uniform_power_baseline, Allocation, KKT_TOL,
};
pub use outage::{gamma_cdf, gamma_cdf_inverse, gamma_pdf, outage_probability, power_from_outage, FadingLink, FadingLinkModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReliabilityError {
    #[error("eigenvalue {index} is within {gap:e} of a neighbour; first-order formulas need distinct eigenvalues")]
    Degenerate { index: usize, gap: f64 },
    #[error("eigen index {index} out of range for {n} eigenvalues")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("edge ({0}, {1}) has an endpoint outside the graph")]
    EdgeOutOfRange(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("probability {0} outside the allowed range")]
    InvalidProbability(f64),
    #[error("transmit power must be positive, got {0}")]
    NonPositivePower(f64),
    #[error("budget {budget} is below the minimum {floor}")]
    InfeasibleBudget { budget: f64, floor: f64 },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Pgd(#[from] PgdError),
}

/// Relative resolution at which centrality values are considered tied.
pub const TIE_RTOL: f64 = 1e-12;

/// Whether an edge is removed from or added to the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeChange {
    Deletion,
    Addition,
}

impl EdgeChange {
    fn sign(self) -> f64 {
        match self {
            EdgeChange::Deletion => -1.0,
            EdgeChange::Addition => 1.0,
        }
    }
}

/// First-order effect of one edge change on every eigenpair.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePerturbation {
    pub edge: Edge,
    pub change: EdgeChange,
    /// `Δλ_k` for every index `k`.
    pub delta_lambda: Vec<f64>,
}

/// `a_m`: `+1` at `i`, `-1` at `j`.
pub fn incidence_vector(n: usize, edge: &Edge) -> Result<DVector<f64>, ReliabilityError> {
    if edge.i >= n || edge.j >= n || edge.i == edge.j {
        return Err(ReliabilityError::EdgeOutOfRange(edge.i, edge.j));
    }
    let mut a = DVector::zeros(n);
    a[edge.i] = 1.0;
    a[edge.j] = -1.0;
    Ok(a)
}

fn endpoint_difference(spec: &LaplacianSpectrum, edge: &Edge, k: usize) -> f64 {
    spec.eigenvectors[(edge.j, k)] - spec.eigenvectors[(edge.i, k)]
}

fn check_edge(spec: &LaplacianSpectrum, edge: &Edge) -> Result<(), ReliabilityError> {
    incidence_vector(spec.len(), edge).map(|_| ())
}

fn check_simple(spec: &LaplacianSpectrum, k: usize) -> Result<(), ReliabilityError> {
    let n = spec.len();
    if k >= n {
        return Err(ReliabilityError::IndexOutOfRange { index: k, n });
    }
    if !spec.is_simple(k) {
        let lam = &spec.eigenvalues;
        let below = if k > 0 { lam[k] - lam[k - 1] } else { f64::INFINITY };
        let above = if k + 1 < n { lam[k + 1] - lam[k] } else { f64::INFINITY };
        return Err(ReliabilityError::Degenerate { index: k, gap: below.min(above) });
    }
    Ok(())
}

/// First-order shift of every eigenvalue, `±w [u_k(j) - u_k(i)]²`.
///
/// Individual entries are meaningful only for simple eigenvalues; their sum
/// is always the trace of the perturbation, `±2w`.
pub fn edge_perturbation(
    spec: &LaplacianSpectrum,
    edge: &Edge,
    change: EdgeChange,
) -> Result<EdgePerturbation, ReliabilityError> {
    check_edge(spec, edge)?;
    let delta_lambda = (0..spec.len()).map(|k| change.sign() * edge.w * endpoint_difference(spec, edge, k).powi(2)).collect();
    Ok(EdgePerturbation { edge: *edge, change, delta_lambda })
}

/// First-order shift of eigenvalue `k`, refused when `k` is not simple.
pub fn eigenvalue_perturbation(
    spec: &LaplacianSpectrum,
    edge: &Edge,
    k: usize,
    change: EdgeChange,
) -> Result<f64, ReliabilityError> {
    check_edge(spec, edge)?;
    check_simple(spec, k)?;
    Ok(change.sign() * edge.w * endpoint_difference(spec, edge, k).powi(2))
}

/// First-order change of eigenvector `k`:
/// `Σ_{j≠k} u_jᵀ δL u_k / (λ_k - λ_j) u_j`.
pub fn eigenvector_perturbation(
    spec: &LaplacianSpectrum,
    edge: &Edge,
    k: usize,
    change: EdgeChange,
) -> Result<DVector<f64>, ReliabilityError> {
    check_edge(spec, edge)?;
    check_simple(spec, k)?;
    let n = spec.len();
    let dk = endpoint_difference(spec, edge, k);
    let mut du = DVector::zeros(n);
    for j in (0..n).filter(|&j| j != k) {
        // u_jᵀ (±w a aᵀ) u_k with a·u = u(i) - u(j)
        let coupling = change.sign() * edge.w * endpoint_difference(spec, edge, j) * dk;
        let gap = spec.eigenvalues[k] - spec.eigenvalues[j];
        du.axpy(coupling / gap, &spec.eigenvectors.column(j), 1.0);
    }
    Ok(du)
}

/// Sum of single-edge first-order shifts of eigenvalue `k`.
pub fn multi_edge_perturbation(
    spec: &LaplacianSpectrum,
    edges: &[Edge],
    k: usize,
    change: EdgeChange,
) -> Result<f64, ReliabilityError> {
    check_simple(spec, k)?;
    edges.iter().map(|e| eigenvalue_perturbation(spec, e, k, change)).sum()
}

/// `p_K(m) = Σ_{k=1}^{K-1} |Δλ_k(m)|` for deletion of `edge`.
///
/// The sum is basis independent whenever it covers whole eigenspaces, so
/// repeated eigenvalues inside the range are accepted; only a tie across
/// either end of the range (index 0 or `K`) is refused.
pub fn perturbation_centrality(spec: &LaplacianSpectrum, edge: &Edge, clusters: usize) -> Result<f64, ReliabilityError> {
    check_edge(spec, edge)?;
    let n = spec.len();
    if clusters < 2 {
        return Err(ReliabilityError::InvalidParameter(format!("cluster count must be at least 2, got {clusters}")));
    }
    if clusters > n {
        return Err(ReliabilityError::IndexOutOfRange { index: clusters - 1, n });
    }
    for k in [1, clusters] {
        if !spec.has_gap_before(k) {
            let gap = spec.eigenvalues[k] - spec.eigenvalues[k - 1];
            return Err(ReliabilityError::Degenerate { index: k, gap });
        }
    }
    Ok((1..clusters).map(|k| edge.w * endpoint_difference(spec, edge, k).powi(2)).sum())
}

/// Edges with their centrality, largest first. Values equal to within
/// [`TIE_RTOL`] of the largest one are ties and keep the lexicographic edge
/// order.
pub fn centrality_ranking(
    spec: &LaplacianSpectrum,
    edges: &[Edge],
    clusters: usize,
) -> Result<Vec<(Edge, f64)>, ReliabilityError> {
    let mut ranked =
        edges.iter().map(|e| perturbation_centrality(spec, e, clusters).map(|p| (*e, p))).collect::<Result<Vec<_>, _>>()?;
    let top = ranked.iter().fold(0.0_f64, |a, r| a.max(r.1));
    let bucket = |p: f64| if top > 0.0 { (p / (top * TIE_RTOL)).round() as i64 } else { 0 };
    ranked.sort_by(|a, b| bucket(b.1).cmp(&bucket(a.1)).then(a.0.key().cmp(&b.0.key())));
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_laplacian, eigendecompose, Graph};

    fn spectrum(g: &Graph) -> LaplacianSpectrum {
        eigendecompose(&build_laplacian(g)).unwrap()
    }

    #[test]
    fn single_edge_deletion_matches_exact_change() {
        let g = Graph::new(2, [Edge::unit(0, 1)]).unwrap();
        let s = spectrum(&g);
        assert!((eigenvalue_perturbation(&s, &Edge::unit(0, 1), 1, EdgeChange::Deletion).unwrap() + 2.0).abs() < 1e-12);
        assert!(eigenvalue_perturbation(&s, &Edge::unit(0, 1), 0, EdgeChange::Deletion).unwrap().abs() < 1e-12);
        assert!((eigenvalue_perturbation(&s, &Edge::unit(0, 1), 1, EdgeChange::Addition).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn null_eigenvalue_is_never_perturbed() {
        let g = Graph::new(4, [Edge::unit(0, 1), Edge::unit(1, 2), Edge::new(2, 3, 2.5), Edge::unit(0, 3)]).unwrap();
        let s = spectrum(&g);
        for e in g.edges() {
            assert!(edge_perturbation(&s, e, EdgeChange::Deletion).unwrap().delta_lambda[0].abs() < 1e-14);
        }
    }

    #[test]
    fn complete_graph_trace_identity_and_degeneracy() {
        let edges: Vec<Edge> = (0..4).flat_map(|i| ((i + 1)..4).map(move |j| Edge::unit(i, j))).collect();
        let g = Graph::new(4, edges).unwrap();
        let s = spectrum(&g);
        let p = edge_perturbation(&s, &Edge::unit(0, 2), EdgeChange::Deletion).unwrap();
        assert!((p.delta_lambda.iter().sum::<f64>() + 2.0).abs() < 1e-12);
        assert!(matches!(
            eigenvalue_perturbation(&s, &Edge::unit(0, 2), 1, EdgeChange::Deletion),
            Err(ReliabilityError::Degenerate { index: 1, .. })
        ));
    }

    #[test]
    fn edges_outside_the_graph_are_rejected() {
        let s = spectrum(&Graph::new(2, [Edge::unit(0, 1)]).unwrap());
        assert_eq!(
            eigenvalue_perturbation(&s, &Edge::unit(0, 2), 1, EdgeChange::Deletion),
            Err(ReliabilityError::EdgeOutOfRange(0, 2))
        );
        assert!(perturbation_centrality(&s, &Edge::unit(0, 1), 1).is_err());
    }

    #[test]
    fn eigenvector_shift_is_orthogonal() {
        let g = Graph::new(4, [Edge::unit(0, 1), Edge::new(1, 2, 2.0), Edge::new(2, 3, 0.5)]).unwrap();
        let s = spectrum(&g);
        for k in 0..4 {
            let du = eigenvector_perturbation(&s, &Edge::new(1, 2, 2.0), k, EdgeChange::Deletion).unwrap();
            assert!(du.dot(&s.eigenvectors.column(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn ranking_breaks_ties_lexicographically() {
        let edges: Vec<Edge> = (0..5).map(|i| Edge::unit(i, (i + 1) % 5)).collect();
        let g = Graph::new(5, edges).unwrap();
        let s = spectrum(&g);
        // the cycle's λ₂ is doubly degenerate: K = 2 splits the pair, K = 3 covers it
        assert!(matches!(centrality_ranking(&s, g.edges(), 2), Err(ReliabilityError::Degenerate { index: 2, .. })));
        let r = centrality_ranking(&s, g.edges(), 3).unwrap();
        assert!(r.iter().all(|(_, p)| (p - r[0].1).abs() < 1e-12));
        let keys: Vec<_> = r.iter().map(|(e, _)| e.key()).collect();
        assert_eq!(keys, vec![(0, 1), (0, 4), (1, 2), (2, 3), (3, 4)]);
        let path = Graph::new(3, [Edge::unit(0, 1), Edge::unit(1, 2)]).unwrap();
        let s = spectrum(&path);
        let r = centrality_ranking(&s, path.edges(), 2).unwrap();
        assert_eq!(r[0].0.key(), (0, 1));
        assert_eq!(r[1].0.key(), (1, 2));
        assert!((r[0].1 - r[1].1).abs() < 1e-12);
    }
}

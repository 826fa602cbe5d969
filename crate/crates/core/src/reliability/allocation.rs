//! Outage-aware power allocation. With `t_m = 1 / F_n⁻¹(pout_m)` the
//! expected loss of algebraic connectivity becomes `Σ c_m F_n(1/t_m)`,
//! convex above `t_m = λ/(n+1)`, under the linear budget `Σ r_m² t_m ≤ C_max`.

use crate::graph::{build_laplacian, eigendecompose, Edge, Graph, LaplacianSpectrum};
use crate::solver::{project_weighted_floor, solve_projected_gradient, ProjectedProblem, StepRule};

use super::outage::{gamma_cdf, gamma_pdf, FadingLinkModel};
use super::{eigenvalue_perturbation, EdgeChange, ReliabilityError};

/// Required KKT residual relative to the largest gradient entry.
pub const KKT_TOL: f64 = 1e-6;
const MAX_ITERS: usize = 200_000;
const MAX_RESTARTS: usize = 20;
/// Relative slack under which a coordinate counts as sitting on its floor.
const ACTIVE_RTOL: f64 = 1e-6;

/// Per-edge allocation and its expected connectivity loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// `1 / F_n⁻¹(pout)` per edge.
    pub t: Vec<f64>,
    pub pout: Vec<f64>,
    /// Transmit power per edge, in watts.
    pub power: Vec<f64>,
    /// `Σ pout_m |Δλ₂(m)|`.
    pub objective: f64,
    /// Objective divided by `λ₂`.
    pub normalized: f64,
    pub lambda2: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// `Σ pout_m |Δλ₂(m)|` for independent single-edge failures.
pub fn expected_connectivity_perturbation(
    spec: &LaplacianSpectrum,
    edges: &[Edge],
    pouts: &[f64],
) -> Result<f64, ReliabilityError> {
    if edges.len() != pouts.len() {
        return Err(ReliabilityError::InvalidParameter(format!("{} probabilities for {} edges", pouts.len(), edges.len())));
    }
    if let Some(&p) = pouts.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(ReliabilityError::InvalidProbability(p));
    }
    let c = sensitivities(spec, edges)?;
    Ok(c.iter().zip(pouts).map(|(c, p)| c * p).sum())
}

/// `|Δλ₂(m)|` per edge.
fn sensitivities(spec: &LaplacianSpectrum, edges: &[Edge]) -> Result<Vec<f64>, ReliabilityError> {
    if spec.len() < 2 || spec.eigenvalues[1] <= spec.eigengap_floor {
        return Err(ReliabilityError::Disconnected);
    }
    edges.iter().map(|e| eigenvalue_perturbation(spec, e, 1, EdgeChange::Deletion).map(f64::abs)).collect()
}

struct Setup {
    lambda2: f64,
    c: Vec<f64>,
    w: Vec<f64>,
    floor: Vec<f64>,
}

fn setup(spec: &LaplacianSpectrum, edges: &[Edge], model: &FadingLinkModel, c_max: f64) -> Result<Setup, ReliabilityError> {
    model.validate(edges.len())?;
    if edges.is_empty() {
        return Err(ReliabilityError::InvalidParameter("graph has no edges".into()));
    }
    if !(c_max.is_finite() && c_max > 0.0) {
        return Err(ReliabilityError::InvalidParameter(format!("budget {c_max}")));
    }
    if model.rate <= 0.0 {
        return Err(ReliabilityError::InvalidParameter("rate must be positive".into()));
    }
    let c = sensitivities(spec, edges)?;
    let w: Vec<f64> = (0..edges.len()).map(|m| model.distance(m).powi(2)).collect();
    let floor = vec![model.t_floor(); edges.len()];
    let need: f64 = w.iter().zip(&floor).map(|(a, b)| a * b).sum();
    if c_max < need * (1.0 - 1e-12) {
        return Err(ReliabilityError::InfeasibleBudget { budget: c_max, floor: need });
    }
    Ok(Setup { lambda2: spec.eigenvalues[1], c, w, floor })
}

fn objective(c: &[f64], t: &[f64], model: &FadingLinkModel) -> f64 {
    c.iter().zip(t).map(|(c, t)| c * gamma_cdf(1.0 / t, model.n, model.lambda)).sum()
}

fn gradient(c: &[f64], t: &[f64], model: &FadingLinkModel, g: &mut [f64]) {
    for ((g, c), t) in g.iter_mut().zip(c).zip(t) {
        *g = -c * gamma_pdf(1.0 / t, model.n, model.lambda) / (t * t);
    }
}

/// Largest violation of the KKT conditions of `min Σ c F(1/t)` over
/// `{Σ w t ≤ cap, t ≥ floor}`, relative to the largest gradient entry.
fn kkt_residual(t: &[f64], g: &[f64], w: &[f64], floor: &[f64], cap: f64) -> f64 {
    let scale = g.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let at_floor: Vec<bool> = t.iter().zip(floor).map(|(t, l)| t - l <= ACTIVE_RTOL * l.max(1.0)).collect();
    let load: f64 = t.iter().zip(w).map(|(t, w)| t * w).sum();
    let budget_active = load >= cap * (1.0 - 1e-9);
    // multiplier that best balances the free coordinates
    let (num, den) = (0..t.len()).filter(|&m| !at_floor[m]).fold((0.0, 0.0), |(n, d), m| (n - g[m] * w[m], d + w[m] * w[m]));
    let mu = if !budget_active {
        0.0
    } else if den > 0.0 {
        (num / den).max(0.0)
    } else {
        (0..t.len()).map(|m| -g[m] / w[m]).fold(0.0, f64::max)
    };
    let worst = (0..t.len())
        .map(|m| {
            let r = g[m] + mu * w[m];
            if at_floor[m] {
                (-r).max(0.0)
            } else {
                r.abs()
            }
        })
        .fold(0.0, f64::max);
    let slack = if budget_active { 0.0 } else { 0.0_f64.max(load - cap) };
    worst.max(slack) / scale
}

fn finish(s: &Setup, t: Vec<f64>, model: &FadingLinkModel, kkt_residual: f64, iterations: usize) -> Allocation {
    let pout: Vec<f64> = t.iter().map(|t| gamma_cdf(1.0 / t, model.n, model.lambda)).collect();
    let objective = s.c.iter().zip(&pout).map(|(c, p)| c * p).sum::<f64>();
    let scale = model.noise_var * (2f64.powf(model.rate) - 1.0);
    let power = t.iter().zip(&s.w).map(|(t, w)| scale * w * t).collect();
    Allocation { t, pout, power, objective, normalized: objective / s.lambda2, lambda2: s.lambda2, kkt_residual, iterations }
}

/// Minimizes the expected loss of `λ₂` under a total power budget given in
/// `t` units (see [`FadingLinkModel::c_max`]).
pub fn solve_robust_allocation(
    spec: &LaplacianSpectrum,
    edges: &[Edge],
    model: &FadingLinkModel,
    c_max: f64,
) -> Result<Allocation, ReliabilityError> {
    let s = setup(spec, edges, model, c_max)?;
    let dim = edges.len();
    let total_w: f64 = s.w.iter().sum();
    let x0: Vec<f64> = vec![c_max / total_w; dim];
    let problem = ProjectedProblem::new(
        dim,
        |t| objective(&s.c, t, model),
        |t, g| gradient(&s.c, t, model, g),
        |t| {
            project_weighted_floor(t, &s.w, &s.floor, c_max).expect("budget checked feasible");
        },
    );
    // the step-length test can fire early where gradients are tiny, so
    // restart from the current point with a step scaled to the gradient
    let t_scale = c_max / total_w;
    let tol = 1e-15 * t_scale.max(1.0);
    let mut x = x0;
    let mut g = vec![0.0; dim];
    let mut iterations = 0;
    let mut kkt = f64::INFINITY;
    for _ in 0..MAX_RESTARTS {
        gradient(&s.c, &x, model, &mut g);
        let g_max = g.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let initial = if g_max > 0.0 { t_scale / g_max } else { 1.0 };
        let res = solve_projected_gradient(&problem, &x, StepRule::Backtracking { initial }, tol, MAX_ITERS)?;
        iterations += res.iterations;
        x = res.x;
        gradient(&s.c, &x, model, &mut g);
        kkt = kkt_residual(&x, &g, &s.w, &s.floor, c_max);
        if kkt <= KKT_TOL {
            return Ok(finish(&s, x, model, kkt, iterations));
        }
    }
    Err(ReliabilityError::Numerical(format!("projected gradient stalled with KKT residual {kkt:e}")))
}

/// The same total power split evenly over the edges.
pub fn uniform_power_baseline(
    spec: &LaplacianSpectrum,
    edges: &[Edge],
    model: &FadingLinkModel,
    c_max: f64,
) -> Result<Allocation, ReliabilityError> {
    let s = setup(spec, edges, model, c_max)?;
    let share = c_max / edges.len() as f64;
    let t: Vec<f64> = s.w.iter().map(|w| share / w).collect();
    let mut g = vec![0.0; t.len()];
    gradient(&s.c, &t, model, &mut g);
    let kkt = kkt_residual(&t, &g, &s.w, &s.floor, c_max);
    Ok(finish(&s, t, model, kkt, 0))
}

/// Spectrum of a connected graph, for the allocation entry points.
pub fn connected_spectrum(g: &Graph) -> Result<LaplacianSpectrum, ReliabilityError> {
    if !g.is_connected() {
        return Err(ReliabilityError::Disconnected);
    }
    Ok(eigendecompose(&build_laplacian(g))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> (LaplacianSpectrum, Vec<Edge>) {
        let g = Graph::new(3, [Edge::unit(0, 1), Edge::unit(1, 2)]).unwrap();
        (connected_spectrum(&g).unwrap(), g.edges().to_vec())
    }

    #[test]
    fn expected_perturbation_edge_cases() {
        let (s, e) = path3();
        assert_eq!(expected_connectivity_perturbation(&s, &e, &[0.0, 0.0]).unwrap(), 0.0);
        let single = expected_connectivity_perturbation(&s, &e, &[1.0, 0.0]).unwrap();
        let direct = eigenvalue_perturbation(&s, &e[0], 1, EdgeChange::Deletion).unwrap();
        assert!((single + direct).abs() < 1e-15);
        assert!(expected_connectivity_perturbation(&s, &e, &[1.5, 0.0]).is_err());
        assert!(expected_connectivity_perturbation(&s, &e, &[0.5]).is_err());
    }

    #[test]
    fn symmetric_edges_get_equal_shares() {
        let (s, e) = path3();
        let m = FadingLinkModel::default();
        let a = solve_robust_allocation(&s, &e, &m, 3.0).unwrap();
        assert!((a.t[0] - a.t[1]).abs() < 1e-9 && (a.t[0] - 1.5).abs() < 1e-9, "{:?}", a.t);
        assert!(a.kkt_residual <= KKT_TOL);
    }

    #[test]
    fn budget_at_floor_forces_floor() {
        let (s, e) = path3();
        let m = FadingLinkModel { n: 3, ..FadingLinkModel::default() };
        let a = solve_robust_allocation(&s, &e, &m, 0.5).unwrap();
        assert!(a.t.iter().all(|t| (t - 0.25).abs() < 1e-12));
        assert!(matches!(solve_robust_allocation(&s, &e, &m, 0.49), Err(ReliabilityError::InfeasibleBudget { .. })));
    }

    #[test]
    fn power_matches_outage_inverse() {
        let (s, e) = path3();
        let m = FadingLinkModel { n: 2, rate: 1.5, noise_var: 0.3, distances: vec![2.0, 0.5], ..FadingLinkModel::default() };
        let a = solve_robust_allocation(&s, &e, &m, 10.0).unwrap();
        for k in 0..2 {
            let p = super::super::power_from_outage(a.pout[k], &m.link(k)).unwrap();
            assert!((p - a.power[k]).abs() <= 1e-8 * p);
        }
        let total: f64 = a.power.iter().sum();
        assert!(total <= m.p_tmax(10.0) * (1.0 + 1e-9));
    }

    #[test]
    fn disconnected_graphs_are_refused() {
        let g = Graph::new(3, [Edge::unit(0, 1)]).unwrap();
        assert_eq!(connected_spectrum(&g).unwrap_err(), ReliabilityError::Disconnected);
    }
}

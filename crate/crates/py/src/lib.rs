use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use edgecloud::experiments::{run_experiment, Experiment, ExperimentError, RunContext, Sweep};
use edgecloud::graph::{algebraic_connectivity, build_laplacian, eigendecompose, Edge, Graph};
use edgecloud::reliability::{self, FadingLink, FadingLinkModel};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn experiment_err(e: ExperimentError) -> PyErr {
    match e {
        ExperimentError::Schema(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn graph(n: usize, edges: Vec<(usize, usize, f64)>) -> PyResult<Graph> {
    Graph::new(n, edges.into_iter().map(|(i, j, w)| Edge::new(i, j, w))).map_err(value_err)
}

/// Gamma CDF of integer order `n` and rate `lambda`.
#[pyfunction]
#[pyo3(signature = (x, n, lambda=1.0))]
fn gamma_cdf(x: f64, n: u32, lambda: f64) -> f64 {
    reliability::gamma_cdf(x, n, lambda)
}

/// Outage probability of a Rayleigh link over `n` independent channels.
#[pyfunction]
#[pyo3(signature = (power, distance=1.0, rate=1.0, noise_var=1.0, lambda=1.0, n=1))]
fn outage_probability(power: f64, distance: f64, rate: f64, noise_var: f64, lambda: f64, n: u32) -> PyResult<f64> {
    let link = FadingLink { distance, rate, noise_var, lambda, n };
    reliability::outage_probability(power, &link).map_err(value_err)
}

/// Transmit power that achieves the given outage probability.
#[pyfunction]
#[pyo3(signature = (pout, distance=1.0, rate=1.0, noise_var=1.0, lambda=1.0, n=1))]
fn power_from_outage(pout: f64, distance: f64, rate: f64, noise_var: f64, lambda: f64, n: u32) -> PyResult<f64> {
    let link = FadingLink { distance, rate, noise_var, lambda, n };
    reliability::power_from_outage(pout, &link).map_err(value_err)
}

/// Second-smallest Laplacian eigenvalue of a weighted graph.
#[pyfunction(name = "algebraic_connectivity")]
fn py_algebraic_connectivity(n: usize, edges: Vec<(usize, usize, f64)>) -> PyResult<f64> {
    let g = graph(n, edges)?;
    let spec = eigendecompose(&build_laplacian(&g)).map_err(value_err)?;
    algebraic_connectivity(&spec).map_err(value_err)
}

/// Edges ranked by perturbation centrality, as `(i, j, score)`.
#[pyfunction]
#[pyo3(signature = (n, edges, clusters=2))]
fn centrality_ranking(n: usize, edges: Vec<(usize, usize, f64)>, clusters: usize) -> PyResult<Vec<(usize, usize, f64)>> {
    let g = graph(n, edges)?;
    let spec = eigendecompose(&build_laplacian(&g)).map_err(value_err)?;
    let ranked = reliability::centrality_ranking(&spec, g.edges(), clusters).map_err(value_err)?;
    Ok(ranked.into_iter().map(|(e, p)| (e.i, e.j, p)).collect())
}

/// Robust power allocation under a total power budget in watts.
///
/// Returns `(power, pout, normalized_perturbation)`.
#[pyfunction]
#[pyo3(signature = (n, edges, budget, rate=1.0, noise_var=1.0, lambda=1.0, channels=1, distances=None))]
#[allow(clippy::too_many_arguments)]
fn robust_allocation(
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    budget: f64,
    rate: f64,
    noise_var: f64,
    lambda: f64,
    channels: u32,
    distances: Option<Vec<f64>>,
) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let g = graph(n, edges)?;
    let model = FadingLinkModel { rate, noise_var, lambda, n: channels, distances: distances.unwrap_or_default() };
    model.validate(g.num_edges()).map_err(value_err)?;
    let spec = reliability::connected_spectrum(&g).map_err(value_err)?;
    let a = reliability::solve_robust_allocation(&spec, g.edges(), &model, model.c_max(budget)).map_err(value_err)?;
    Ok((a.power, a.pout, a.normalized))
}

/// Runs a CLI experiment on a JSON scenario and returns `(csv, summary)`.
#[pyfunction(name = "run_experiment")]
#[pyo3(signature = (kind, scenario, seed=0, sweep=None, base_dir="."))]
fn py_run_experiment(
    py: Python<'_>,
    kind: &str,
    scenario: &str,
    seed: u64,
    sweep: Option<&str>,
    base_dir: &str,
) -> PyResult<(String, Option<String>)> {
    let kind: Experiment = kind.parse().map_err(experiment_err)?;
    let sweep = sweep.map(Sweep::parse).transpose().map_err(experiment_err)?;
    let ctx = RunContext::new(base_dir, seed);
    let out = py.detach(|| run_experiment(kind, scenario, &ctx, sweep.as_ref())).map_err(experiment_err)?;
    Ok((out.csv, out.summary))
}

#[pymodule]
fn edgecloud_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(gamma_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(outage_probability, m)?)?;
    m.add_function(wrap_pyfunction!(power_from_outage, m)?)?;
    m.add_function(wrap_pyfunction!(py_algebraic_connectivity, m)?)?;
    m.add_function(wrap_pyfunction!(centrality_ranking, m)?)?;
    m.add_function(wrap_pyfunction!(robust_allocation, m)?)?;
    m.add_function(wrap_pyfunction!(py_run_experiment, m)?)?;
    Ok(())
}

//! Projected gradient descent for smooth convex objectives over sets with a
//! cheap Euclidean projection.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PgdError {
    #[error("expected a point of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: usize },
}

type Objective<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;
type Gradient<'a> = Box<dyn Fn(&[f64], &mut [f64]) + 'a>;
type Projector<'a> = Box<dyn Fn(&mut [f64]) + 'a>;

/// `min f(x)` over a convex set given by its projector.
pub struct ProjectedProblem<'a> {
    pub dimension: usize,
    pub objective: Objective<'a>,
    /// Writes the gradient at `x` into the output slice.
    pub gradient: Gradient<'a>,
    /// Maps a point onto the feasible set in place.
    pub projector: Projector<'a>,
}

impl<'a> ProjectedProblem<'a> {
    pub fn new(
        dimension: usize,
        objective: impl Fn(&[f64]) -> f64 + 'a,
        gradient: impl Fn(&[f64], &mut [f64]) + 'a,
        projector: impl Fn(&mut [f64]) + 'a,
    ) -> Self {
        Self { dimension, objective: Box::new(objective), gradient: Box::new(gradient), projector: Box::new(projector) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Armijo backtracking (halving, constant `1e-4`); trial steps after the
    /// first use the Barzilai-Borwein estimate.
    Backtracking {
        initial: f64,
    },
    Fixed(f64),
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Backtracking { initial: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Step length fell to `tol`.
    Converged,
    MaxIterations,
    /// Backtracking could not find a decrease; the point is stationary to
    /// working precision.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub objective: f64,
    pub step_norm: f64,
    pub step_size: f64,
}

#[derive(Debug, Clone)]
pub struct PgdResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Objective after each accepted step (the entry before the first step is the start).
    pub trace: Vec<TraceEntry>,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 80;

pub fn solve_projected_gradient(
    p: &ProjectedProblem<'_>,
    x0: &[f64],
    rule: StepRule,
    tol: f64,
    max_iters: usize,
) -> Result<PgdResult, PgdError> {
    let n = p.dimension;
    if x0.len() != n {
        return Err(PgdError::DimensionMismatch { expected: n, got: x0.len() });
    }
    let mut x = x0.to_vec();
    (p.projector)(&mut x);
    let mut f = (p.objective)(&x);
    let mut g = vec![0.0; n];
    (p.gradient)(&x, &mut g);
    check(f, &g, 0)?;

    let mut trace = vec![TraceEntry { objective: f, step_norm: 0.0, step_size: 0.0 }];
    let mut step = match rule {
        StepRule::Backtracking { initial } | StepRule::Fixed(initial) => initial,
    };
    let mut trial = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    for it in 1..=max_iters {
        let mut t = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                trial[i] = x[i] - t * g[i];
            }
            (p.projector)(&mut trial);
            let ft = (p.objective)(&trial);
            if let StepRule::Fixed(_) = rule {
                accepted = Some(ft);
                break;
            }
            let decrease: f64 = (0..n).map(|i| g[i] * (trial[i] - x[i])).sum();
            if ft.is_finite() && ft <= f + ARMIJO * decrease && ft <= f {
                accepted = Some(ft);
                break;
            }
            t *= 0.5;
        }
        let Some(ft) = accepted else {
            return Ok(finish(x, f, it - 1, Termination::Stalled, trace));
        };
        if !ft.is_finite() {
            return Err(PgdError::NonFinite { what: "objective", iteration: it });
        }
        (p.gradient)(&trial, &mut g_new);
        check(ft, &g_new, it)?;

        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let s = trial[i] - x[i];
            ss += s * s;
            sy += s * (g_new[i] - g[i]);
        }
        let step_norm = ss.sqrt();
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        f = ft;
        trace.push(TraceEntry { objective: f, step_norm, step_size: t });
        if step_norm <= tol {
            return Ok(finish(x, f, it, Termination::Converged, trace));
        }
        if let StepRule::Backtracking { .. } = rule {
            step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { (2.0 * t).min(1e12) };
        }
    }
    Ok(finish(x, f, max_iters, Termination::MaxIterations, trace))
}

fn check(f: f64, g: &[f64], iteration: usize) -> Result<(), PgdError> {
    if !f.is_finite() {
        return Err(PgdError::NonFinite { what: "objective", iteration });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(PgdError::NonFinite { what: "gradient", iteration });
    }
    Ok(())
}

fn finish(x: Vec<f64>, objective: f64, iterations: usize, termination: Termination, trace: Vec<TraceEntry>) -> PgdResult {
    PgdResult { x, objective, iterations, termination, trace }
}

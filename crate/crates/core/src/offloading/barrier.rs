//! Damped Newton log-barrier method for the small smooth convex programs
//! produced by the successive convex approximation.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::OffloadError;

/// Value of one inequality `g(z) <= 0` with sparse first and second derivatives.
#[derive(Debug, Clone, Default)]
pub(super) struct ConstraintEval {
    pub value: f64,
    pub grad: Vec<(usize, f64)>,
    /// Symmetric Hessian entries; both `(i, j)` and `(j, i)` are listed.
    pub hess: Vec<(usize, usize, f64)>,
}

pub(super) trait SmoothProgram {
    fn dim(&self) -> usize;
    fn objective(&self, z: &[f64]) -> f64;
    /// Adds the objective gradient and Hessian scaled by `t`.
    fn objective_derivs(&self, z: &[f64], t: f64, grad: &mut [f64], hess: &mut DMatrix<f64>);
    fn constraints(&self, z: &[f64], derivs: bool) -> Vec<ConstraintEval>;
}

pub(super) struct BarrierSetup<'a> {
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    /// Index ranges whose sum stays fixed at its starting value.
    pub sums: &'a [Range<usize>],
    /// Constraints are enforced as `g(z) < shift`.
    pub shift: f64,
}

const T_GROWTH: f64 = 20.0;
const GAP_TOL: f64 = 1e-7;

/// Minimizes the objective over the strictly feasible region containing `z0`.
pub(super) fn barrier_minimize<P: SmoothProgram>(p: &P, z0: &[f64], setup: &BarrierSetup<'_>) -> Result<Vec<f64>, OffloadError> {
    let n = p.dim();
    let mut z = z0.to_vec();
    if !strictly_inside(p, &z, setup) {
        return Err(OffloadError::Numerical("barrier start is not strictly feasible".into()));
    }
    let n_terms = p.constraints(&z, false).len()
        + setup.lower.iter().filter(|v| v.is_finite()).count()
        + setup.upper.iter().filter(|v| v.is_finite()).count();
    let n_eq = setup.sums.len();
    let scale = 1.0 + p.objective(&z).abs();
    let mut t = 1.0 / scale;

    loop {
        for _ in 0..200 {
            let mut grad = vec![0.0; n];
            let mut hess = DMatrix::zeros(n, n);
            p.objective_derivs(&z, t, &mut grad, &mut hess);
            for c in p.constraints(&z, true) {
                let s = setup.shift - c.value;
                for &(i, gi) in &c.grad {
                    grad[i] += gi / s;
                    for &(j, gj) in &c.grad {
                        hess[(i, j)] += gi * gj / (s * s);
                    }
                }
                for &(i, j, h) in &c.hess {
                    hess[(i, j)] += h / s;
                }
            }
            for i in 0..n {
                if setup.lower[i].is_finite() {
                    let s = z[i] - setup.lower[i];
                    grad[i] -= 1.0 / s;
                    hess[(i, i)] += 1.0 / (s * s);
                }
                if setup.upper[i].is_finite() {
                    let s = setup.upper[i] - z[i];
                    grad[i] += 1.0 / s;
                    hess[(i, i)] += 1.0 / (s * s);
                }
            }
            // KKT system with the fixed-sum rows.
            let dim = n + n_eq;
            let mut kkt = DMatrix::zeros(dim, dim);
            kkt.view_mut((0, 0), (n, n)).copy_from(&hess);
            for (e, r) in setup.sums.iter().enumerate() {
                for i in r.clone() {
                    kkt[(n + e, i)] = 1.0;
                    kkt[(i, n + e)] = 1.0;
                }
            }
            let mut rhs = DVector::zeros(dim);
            for i in 0..n {
                rhs[i] = -grad[i];
            }
            let sol = kkt.lu().solve(&rhs).ok_or_else(|| OffloadError::Numerical("singular Newton system".into()))?;
            let mut dz: Vec<f64> = sol.iter().take(n).copied().collect();
            // remove rounding drift from the fixed sums
            for r in setup.sums {
                let mean = dz[r.clone()].iter().sum::<f64>() / r.len() as f64;
                dz[r.clone()].iter_mut().for_each(|d| *d -= mean);
            }
            let slope: f64 = grad.iter().zip(&dz).map(|(g, d)| g * d).sum();
            if !slope.is_finite() {
                return Err(OffloadError::Numerical("non-finite Newton step".into()));
            }
            if -slope * 0.5 <= 1e-12 {
                break;
            }
            let phi0 = merit(p, &z, t, setup);
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-16 {
                let cand: Vec<f64> = z.iter().zip(&dz).map(|(a, d)| a + step * d).collect();
                if strictly_inside(p, &cand, setup) {
                    let phi = merit(p, &cand, t, setup);
                    if phi <= phi0 + 0.25 * step * slope {
                        z = cand;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if n_terms as f64 / t <= GAP_TOL * scale {
            return Ok(z);
        }
        t *= T_GROWTH;
    }
}

fn strictly_inside<P: SmoothProgram>(p: &P, z: &[f64], s: &BarrierSetup<'_>) -> bool {
    z.iter().enumerate().all(|(i, &v)| v > s.lower[i] && v < s.upper[i])
        && p.constraints(z, false).iter().all(|c| c.value < s.shift)
}

fn merit<P: SmoothProgram>(p: &P, z: &[f64], t: f64, s: &BarrierSetup<'_>) -> f64 {
    let mut v = t * p.objective(z);
    for c in p.constraints(z, false) {
        v -= (s.shift - c.value).ln();
    }
    for (i, &x) in z.iter().enumerate() {
        if s.lower[i].is_finite() {
            v -= (x - s.lower[i]).ln();
        }
        if s.upper[i].is_finite() {
            v -= (s.upper[i] - x).ln();
        }
    }
    v
}

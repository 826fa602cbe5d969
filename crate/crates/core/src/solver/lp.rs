//! Bounded-variable revised simplex for `min cᵀx` subject to sparse linear
//! rows and per-variable bounds.
//!
//! The basis inverse is kept dense (column-major) and updated in product
//! form; updates only touch the nonzero pattern of the pivot column, which
//! keeps network-like programs with a few thousand rows tractable. Phase 1
//! adds one artificial per row whose logical starts out of bounds, so no
//! big-M constant is involved. Pricing is Dantzig's largest reduced cost and
//! drops to Bland's smallest-index rule after a run of degenerate pivots.

use nalgebra::DMatrix;
use thiserror::Error;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("variable {index} has empty bound interval [{lo}, {hi}]")]
    InvalidBounds { index: usize, lo: f64, hi: f64 },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `min cᵀx` subject to rows and `lo <= x <= hi` (infinite bounds allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per constraint, in the sign convention of
    /// `c - Aᵀy` being the reduced costs (`y <= 0` on `Le` rows, `y >= 0` on `Ge`).
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LinearProgram {
    /// Program over `n` variables, default bounds `[0, +inf)` and zero cost.
    pub fn new(n: usize) -> Self {
        Self { objective: vec![0.0; n], constraints: Vec::new(), lower: vec![0.0; n], upper: vec![f64::INFINITY; n] }
    }

    /// Dense constructor: `A_eq x = b_eq`, `A_le x <= b_le`, bounds per variable.
    pub fn from_dense(
        objective: Vec<f64>,
        a_eq: &DMatrix<f64>,
        b_eq: &[f64],
        a_le: &DMatrix<f64>,
        b_le: &[f64],
        bounds: &[(f64, f64)],
    ) -> Result<Self, LpError> {
        let n = objective.len();
        if bounds.len() != n {
            return Err(LpError::DimensionMismatch(format!("{} bounds for {n} variables", bounds.len())));
        }
        let mut lp = Self::new(n);
        lp.objective = objective;
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            lp.set_bounds(j, lo, hi);
        }
        for (a, b, sense, name) in [(a_eq, b_eq, Sense::Eq, "A_eq"), (a_le, b_le, Sense::Le, "A_le")] {
            if a.nrows() == 0 && b.is_empty() {
                continue;
            }
            if a.ncols() != n || a.nrows() != b.len() {
                return Err(LpError::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {}x{n}",
                    a.nrows(),
                    a.ncols(),
                    b.len()
                )));
            }
            for i in 0..a.nrows() {
                let coeffs = (0..n).filter(|&j| a[(i, j)] != 0.0).map(|j| (j, a[(i, j)])).collect();
                lp.constraints.push(Constraint { coeffs, sense, rhs: b[i] });
            }
        }
        lp.validate()?;
        Ok(lp)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lower[j] = lo;
        self.upper[j] = hi;
    }

    pub fn add(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.constraints.push(Constraint { coeffs, sense, rhs });
        self.constraints.len() - 1
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::DimensionMismatch("bounds length differs from objective".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("objective".into()));
        }
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(LpError::InvalidBounds { index: j, lo, hi });
            }
        }
        for (r, row) in self.constraints.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("rhs of row {r}")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(LpError::DimensionMismatch(format!("row {r} references variable {j}")));
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite(format!("row {r}")));
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for row in &self.constraints {
            let act: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for j in 0..x.len() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }

    /// Lagrangian dual bound `bᵀy + Σ min over [lo, hi] of (c - Aᵀy)_j x_j`.
    ///
    /// Returns `None` when `y` has the wrong sign on an inequality row or a
    /// reduced cost pushes toward an infinite bound.
    pub fn dual_bound(&self, y: &[f64]) -> Option<f64> {
        let mut z = self.objective.clone();
        let mut value = 0.0;
        for (row, &yi) in self.constraints.iter().zip(y) {
            match row.sense {
                Sense::Le if yi > DUAL_TOL => return None,
                Sense::Ge if yi < -DUAL_TOL => return None,
                _ => {}
            }
            value += row.rhs * yi;
            for &(j, a) in &row.coeffs {
                z[j] -= a * yi;
            }
        }
        for (j, &zj) in z.iter().enumerate() {
            if zj > 0.0 {
                if self.lower[j].is_infinite() {
                    if zj > DUAL_TOL {
                        return None;
                    }
                } else {
                    value += zj * self.lower[j];
                }
            } else if zj < 0.0 {
                if self.upper[j].is_infinite() {
                    if zj < -DUAL_TOL {
                        return None;
                    }
                } else {
                    value += zj * self.upper[j];
                }
            }
        }
        Some(value)
    }
}

/// Solves the program. Dimension and bound errors are `Err`; infeasible,
/// unbounded and numerically failed solves come back as a status.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_vars();
    let reduced = match presolve(lp) {
        Presolved::Infeasible => return Ok(failure(lp, LpStatus::Infeasible, 0)),
        Presolved::Reduced(r) => r,
    };

    let core = reduced.core_program(lp);
    let (status, xr, yr, iterations) = if core.rows.is_empty() && core.n == 0 {
        (LpStatus::Optimal, Vec::new(), Vec::new(), 0)
    } else {
        Simplex::new(&core).run()
    };

    let mut x = reduced.fixed_values.clone();
    for (k, &j) in reduced.kept_cols.iter().enumerate() {
        x[j] = xr.get(k).copied().unwrap_or(0.0);
    }
    let mut duals = vec![0.0; lp.constraints.len()];
    for (k, &r) in reduced.kept_rows.iter().enumerate() {
        duals[r] = yr.get(k).copied().unwrap_or(0.0);
    }
    debug_assert_eq!(x.len(), n);
    let mut status = status;
    if status == LpStatus::Optimal {
        let scale = 1.0 + lp.constraints.iter().fold(0.0_f64, |m, r| m.max(r.rhs.abs()));
        if lp.max_violation(&x) > 1e-7 * scale {
            status = LpStatus::NumericalFailure;
        }
    }
    Ok(LpSolution { status, objective: lp.objective_value(&x), x, duals, iterations })
}

fn failure(lp: &LinearProgram, status: LpStatus, iterations: usize) -> LpSolution {
    LpSolution {
        status,
        x: vec![f64::NAN; lp.num_vars()],
        objective: f64::NAN,
        duals: vec![0.0; lp.constraints.len()],
        iterations,
    }
}

// ---------------------------------------------------------------------------
// Presolve: fixed columns, redundant rows, dominated columns.
// ---------------------------------------------------------------------------

enum Presolved {
    Infeasible,
    Reduced(Reduction),
}

struct Reduction {
    kept_rows: Vec<usize>,
    kept_cols: Vec<usize>,
    /// Value of every original variable that was fixed (others are placeholders).
    fixed_values: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

fn presolve(lp: &LinearProgram) -> Presolved {
    let n = lp.num_vars();
    let m = lp.constraints.len();
    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    let mut col_alive = vec![true; n];
    let mut row_alive = vec![true; m];
    let mut fixed = vec![0.0; n];
    let mut col_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (r, row) in lp.constraints.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            if a != 0.0 {
                col_rows[j].push((r, a));
            }
        }
    }

    let fix = |j: usize, v: f64, col_alive: &mut Vec<bool>, fixed: &mut Vec<f64>| {
        col_alive[j] = false;
        fixed[j] = v;
    };

    for j in 0..n {
        if lower[j] == upper[j] {
            fix(j, lower[j], &mut col_alive, &mut fixed);
        }
    }

    loop {
        let mut changed = false;
        for r in 0..m {
            if !row_alive[r] {
                continue;
            }
            let row = &lp.constraints[r];
            let (mut min_act, mut max_act, mut fixed_part) = (0.0, 0.0, 0.0);
            let mut live = 0;
            for &(j, a) in &row.coeffs {
                if a == 0.0 {
                    continue;
                }
                if !col_alive[j] {
                    fixed_part += a * fixed[j];
                    continue;
                }
                live += 1;
                let (lo_c, hi_c) = if a > 0.0 { (a * lower[j], a * upper[j]) } else { (a * upper[j], a * lower[j]) };
                min_act += lo_c;
                max_act += hi_c;
            }
            let rhs = row.rhs - fixed_part;
            let tol = PRIMAL_TOL * (1.0 + rhs.abs());
            let (lo_ok, hi_ok) = match row.sense {
                Sense::Le => (min_act <= rhs + tol, max_act <= rhs + tol),
                Sense::Ge => (max_act >= rhs - tol, min_act >= rhs - tol),
                Sense::Eq => (min_act <= rhs + tol && max_act >= rhs - tol, live == 0 && (rhs.abs() <= tol)),
            };
            if !lo_ok || (live == 0 && row.sense == Sense::Eq && !hi_ok) {
                return Presolved::Infeasible;
            }
            if hi_ok {
                row_alive[r] = false;
                changed = true;
            }
        }

        for j in 0..n {
            if !col_alive[j] {
                continue;
            }
            let c = lp.objective[j];
            let mut hurts_up = true;
            let mut hurts_down = true;
            let mut any = false;
            for &(r, a) in &col_rows[j] {
                if !row_alive[r] {
                    continue;
                }
                any = true;
                match lp.constraints[r].sense {
                    Sense::Le => {
                        hurts_up &= a > 0.0;
                        hurts_down &= a < 0.0;
                    }
                    Sense::Ge => {
                        hurts_up &= a < 0.0;
                        hurts_down &= a > 0.0;
                    }
                    Sense::Eq => {
                        hurts_up = false;
                        hurts_down = false;
                    }
                }
            }
            if !any {
                hurts_up = true;
                hurts_down = true;
            }
            if c >= 0.0 && hurts_up && lower[j].is_finite() {
                fix(j, lower[j], &mut col_alive, &mut fixed);
                changed = true;
            } else if c <= 0.0 && hurts_down && upper[j].is_finite() {
                fix(j, upper[j], &mut col_alive, &mut fixed);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // Tighten nothing else; hand the live part to the simplex.
    let kept_cols: Vec<usize> = (0..n).filter(|&j| col_alive[j]).collect();
    let kept_rows: Vec<usize> = (0..m).filter(|&r| row_alive[r]).collect();
    for j in 0..n {
        if col_alive[j] {
            continue;
        }
        lower[j] = fixed[j];
        upper[j] = fixed[j];
    }
    Presolved::Reduced(Reduction { kept_rows, kept_cols, fixed_values: fixed, lower, upper })
}

/// Standard-shape program handed to the simplex: structural columns in CSC form.
struct CoreProgram {
    n: usize,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    col_start: Vec<usize>,
    col_rows: Vec<usize>,
    col_vals: Vec<f64>,
    rows: Vec<(Sense, f64)>,
}

impl Reduction {
    fn core_program(&self, lp: &LinearProgram) -> CoreProgram {
        let n = self.kept_cols.len();
        let mut col_pos = vec![usize::MAX; lp.num_vars()];
        for (k, &j) in self.kept_cols.iter().enumerate() {
            col_pos[j] = k;
        }
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut rows = Vec::with_capacity(self.kept_rows.len());
        for (i, &r) in self.kept_rows.iter().enumerate() {
            let row = &lp.constraints[r];
            let mut rhs = row.rhs;
            for &(j, a) in &row.coeffs {
                if a == 0.0 {
                    continue;
                }
                if col_pos[j] == usize::MAX {
                    rhs -= a * self.fixed_values[j];
                } else {
                    cols[col_pos[j]].push((i, a));
                }
            }
            rows.push((row.sense, rhs));
        }
        let mut col_start = Vec::with_capacity(n + 1);
        let mut col_rows = Vec::new();
        let mut col_vals = Vec::new();
        col_start.push(0);
        for mut col in cols {
            col.sort_unstable_by_key(|&(i, _)| i);
            // merge duplicates within a row
            let mut last: Option<usize> = None;
            for (i, a) in col {
                if last == Some(i) {
                    *col_vals.last_mut().unwrap() += a;
                } else {
                    col_rows.push(i);
                    col_vals.push(a);
                    last = Some(i);
                }
            }
            col_start.push(col_rows.len());
        }
        CoreProgram {
            n,
            cost: self.kept_cols.iter().map(|&j| lp.objective[j]).collect(),
            lower: self.kept_cols.iter().map(|&j| self.lower[j]).collect(),
            upper: self.kept_cols.iter().map(|&j| self.upper[j]).collect(),
            col_start,
            col_rows,
            col_vals,
            rows,
        }
    }
}

// ---------------------------------------------------------------------------
// Simplex proper.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable resting at zero.
    Free,
}

struct Simplex<'a> {
    p: &'a CoreProgram,
    m: usize,
    /// Structural, then logical (one per row), then artificial variables.
    total: usize,
    art_row: Vec<usize>,
    art_sign: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    /// Dense basis inverse, column-major `m x m`.
    binv: Vec<f64>,
    y: Vec<f64>,
    rhs: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Continue,
    Failed,
}

impl<'a> Simplex<'a> {
    fn new(p: &'a CoreProgram) -> Self {
        let m = p.rows.len();
        let n = p.n;
        let mut lower = p.lower.clone();
        let mut upper = p.upper.clone();
        for &(sense, _) in &p.rows {
            let (lo, hi) = match sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
        }
        let mut x = vec![0.0; n + m];
        let mut state = vec![State::Lower; n + m];
        for j in 0..n {
            let (lo, hi) = (lower[j], upper[j]);
            (x[j], state[j]) = if lo.is_finite() {
                (lo, State::Lower)
            } else if hi.is_finite() {
                (hi, State::Upper)
            } else {
                (0.0, State::Free)
            };
        }
        let rhs: Vec<f64> = p.rows.iter().map(|&(_, b)| b).collect();
        let mut residual = rhs.clone();
        for j in 0..n {
            if x[j] != 0.0 {
                for k in p.col_start[j]..p.col_start[j + 1] {
                    residual[p.col_rows[k]] -= p.col_vals[k] * x[j];
                }
            }
        }

        let mut basis = vec![0; m];
        let mut binv = vec![0.0; m * m];
        let mut art_row = Vec::new();
        let mut art_sign = Vec::new();
        for i in 0..m {
            let s = n + i;
            let r = residual[i];
            if r >= lower[s] - PRIMAL_TOL && r <= upper[s] + PRIMAL_TOL {
                x[s] = r;
                state[s] = State::Basic;
                basis[i] = s;
                binv[i * m + i] = 1.0;
            } else {
                let bound = if r < lower[s] { lower[s] } else { upper[s] };
                x[s] = bound;
                state[s] = if bound == lower[s] { State::Lower } else { State::Upper };
                let sign = if r > bound { 1.0 } else { -1.0 };
                let a = n + m + art_row.len();
                art_row.push(i);
                art_sign.push(sign);
                lower.push(0.0);
                upper.push(f64::INFINITY);
                x.push((r - bound).abs());
                state.push(State::Basic);
                basis[i] = a;
                binv[i * m + i] = sign;
            }
        }
        let total = n + m + art_row.len();
        let mut cost = vec![0.0; total];
        for c in cost.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        Self {
            p,
            m,
            total,
            art_row,
            art_sign,
            lower,
            upper,
            cost,
            x,
            state,
            basis,
            binv,
            y: vec![0.0; m],
            rhs,
            iterations: 0,
            since_refactor: 0,
        }
    }

    /// Calls `f(row, coeff)` for every nonzero of column `j`.
    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        let n = self.p.n;
        if j < n {
            for k in self.p.col_start[j]..self.p.col_start[j + 1] {
                f(self.p.col_rows[k], self.p.col_vals[k]);
            }
        } else if j < n + self.m {
            f(j - n, 1.0);
        } else {
            let a = j - n - self.m;
            f(self.art_row[a], self.art_sign[a]);
        }
    }

    fn run(mut self) -> (LpStatus, Vec<f64>, Vec<f64>, usize) {
        let limit = 50 * (self.total + self.m) + 10_000;
        if !self.art_row.is_empty() {
            self.compute_duals();
            match self.iterate(limit) {
                Step::Optimal => {}
                _ => return (LpStatus::NumericalFailure, Vec::new(), Vec::new(), self.iterations),
            }
            let infeas: f64 = (self.p.n + self.m..self.total).map(|j| self.x[j]).sum();
            let scale = 1.0 + self.rhs.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            if infeas > 1e-7 * scale {
                return (LpStatus::Infeasible, Vec::new(), Vec::new(), self.iterations);
            }
            for j in self.p.n + self.m..self.total {
                self.upper[j] = 0.0;
                self.cost[j] = 0.0;
                if self.state[j] != State::Basic {
                    self.x[j] = 0.0;
                    self.state[j] = State::Lower;
                }
            }
        }
        for j in 0..self.p.n {
            self.cost[j] = self.p.cost[j];
        }
        if !self.refactor() {
            return (LpStatus::NumericalFailure, Vec::new(), Vec::new(), self.iterations);
        }
        let status = match self.iterate(limit) {
            Step::Optimal => LpStatus::Optimal,
            Step::Unbounded => LpStatus::Unbounded,
            _ => LpStatus::NumericalFailure,
        };
        let x = self.x[..self.p.n].to_vec();
        (status, x, self.y.clone(), self.iterations)
    }

    fn iterate(&mut self, limit: usize) -> Step {
        let mut degenerate = 0;
        loop {
            if self.iterations >= limit {
                return Step::Failed;
            }
            let bland = degenerate >= DEGENERATE_RUN;
            match self.step(bland, &mut degenerate) {
                Step::Continue => {}
                other => {
                    if matches!(other, Step::Optimal) && self.since_refactor > 0 {
                        // confirm optimality on a fresh factorization
                        if !self.refactor() {
                            return Step::Failed;
                        }
                        if self.price(false).is_some() {
                            continue;
                        }
                    }
                    return other;
                }
            }
        }
    }

    fn compute_duals(&mut self) {
        let m = self.m;
        for j in 0..m {
            let col = &self.binv[j * m..(j + 1) * m];
            self.y[j] = (0..m).map(|r| self.cost[self.basis[r]] * col[r]).sum();
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let mut d = self.cost[j];
        self.for_column(j, |i, a| d -= self.y[i] * a);
        d
    }

    /// Entering variable and direction (+1 increase, -1 decrease).
    fn price(&self, bland: bool) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.total {
            let st = self.state[j];
            if st == State::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.reduced_cost(j);
            let dir = match st {
                State::Lower if d < -DUAL_TOL => 1.0,
                State::Upper if d > DUAL_TOL => -1.0,
                State::Free if d.abs() > DUAL_TOL => -d.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir, d));
            }
            if best.is_none_or(|(_, _, bd)| d.abs() > bd.abs()) {
                best = Some((j, dir, d));
            }
        }
        best
    }

    fn step(&mut self, bland: bool, degenerate: &mut usize) -> Step {
        let Some((q, dir, dq)) = self.price(bland) else {
            return Step::Optimal;
        };
        let m = self.m;
        let mut alpha = vec![0.0; m];
        self.for_column(q, |i, a| {
            let col = &self.binv[i * m..(i + 1) * m];
            for (r, v) in alpha.iter_mut().enumerate() {
                *v += a * col[r];
            }
        });

        // Ratio test over basic variables plus the entering variable's own range.
        let mut theta = self.upper[q] - self.lower[q];
        let mut leave: Option<(usize, bool)> = None;
        let mut best_pivot = 0.0;
        for r in 0..m {
            let ar = alpha[r] * dir;
            if ar.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[r];
            let (limit, to_lower) = if ar > 0.0 {
                if self.lower[b].is_infinite() {
                    continue;
                }
                (((self.x[b] - self.lower[b]) / ar).max(0.0), true)
            } else {
                if self.upper[b].is_infinite() {
                    continue;
                }
                (((self.upper[b] - self.x[b]) / -ar).max(0.0), false)
            };
            let tie = (limit - theta).abs() <= 1e-12 * (1.0 + theta.abs());
            let better = match leave {
                _ if limit < theta && !tie => true,
                Some((lr, _)) if tie => {
                    if bland {
                        b < self.basis[lr]
                    } else {
                        ar.abs() > best_pivot
                    }
                }
                None if tie => true,
                _ => false,
            };
            if better {
                theta = limit;
                leave = Some((r, to_lower));
                best_pivot = ar.abs();
            }
        }
        if theta.is_infinite() {
            return Step::Unbounded;
        }

        self.iterations += 1;
        if theta <= 1e-12 {
            *degenerate += 1;
        } else {
            *degenerate = 0;
        }

        for r in 0..m {
            if alpha[r] != 0.0 {
                let b = self.basis[r];
                self.x[b] -= theta * dir * alpha[r];
            }
        }
        self.x[q] += theta * dir;

        let Some((r, to_lower)) = leave else {
            // bound flip
            self.state[q] = if dir > 0.0 { State::Upper } else { State::Lower };
            self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
            return Step::Continue;
        };

        let out = self.basis[r];
        self.x[out] = if to_lower { self.lower[out] } else { self.upper[out] };
        self.state[out] = if to_lower { State::Lower } else { State::Upper };
        self.state[q] = State::Basic;
        self.basis[r] = q;

        if !self.pivot(r, &alpha) {
            return Step::Failed;
        }
        // y += dq * (new row r of B^-1)
        for j in 0..m {
            let v = self.binv[j * m + r];
            if v != 0.0 {
                self.y[j] += dq * v;
            }
        }
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY && !self.refactor() {
            return Step::Failed;
        }
        Step::Continue
    }

    /// Product-form update of the inverse for a pivot on `alpha[r]`.
    fn pivot(&mut self, r: usize, alpha: &[f64]) -> bool {
        let m = self.m;
        let ar = alpha[r];
        if ar.abs() <= 1e-13 {
            return false;
        }
        let nz: Vec<(usize, f64)> =
            alpha.iter().enumerate().filter(|&(i, &a)| i != r && a != 0.0).map(|(i, &a)| (i, a)).collect();
        for j in 0..m {
            let col = &mut self.binv[j * m..(j + 1) * m];
            let v = col[r];
            if v == 0.0 {
                continue;
            }
            let v = v / ar;
            col[r] = v;
            for &(i, a) in &nz {
                col[i] -= a * v;
            }
        }
        true
    }

    /// Rebuilds the inverse from scratch and recomputes basic values and duals.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            self.binv[i * m + i] = 1.0;
        }
        let mut placed = vec![false; m];
        let mut order: Vec<usize> = self.basis.clone();
        // unit columns first: they pivot without fill
        order.sort_by_key(|&j| (j < self.p.n, j));
        let mut new_basis = vec![usize::MAX; m];
        for j in order {
            let mut alpha = vec![0.0; m];
            self.for_column(j, |i, a| {
                let col = &self.binv[i * m..(i + 1) * m];
                for (r, v) in alpha.iter_mut().enumerate() {
                    *v += a * col[r];
                }
            });
            let mut best = None;
            let mut best_abs = 1e-11;
            for r in 0..m {
                if !placed[r] && alpha[r].abs() > best_abs {
                    best_abs = alpha[r].abs();
                    best = Some(r);
                }
            }
            let Some(r) = best else {
                return false;
            };
            placed[r] = true;
            new_basis[r] = j;
            if !self.pivot(r, &alpha) {
                return false;
            }
        }
        self.basis = new_basis;
        self.since_refactor = 0;

        // x_B = B^-1 (b - N x_N)
        let mut resid = self.rhs.clone();
        for j in 0..self.total {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                self.for_column(j, |i, a| resid[i] -= a * xj);
            }
        }
        let mut xb = vec![0.0; m];
        for (i, &ri) in resid.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            let col = &self.binv[i * m..(i + 1) * m];
            for (r, v) in xb.iter_mut().enumerate() {
                *v += ri * col[r];
            }
        }
        for r in 0..m {
            self.x[self.basis[r]] = xb[r];
        }
        self.compute_duals();
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(lp: &LinearProgram) -> LpSolution {
        let sol = solve_lp(lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        sol
    }

    #[test]
    fn single_lower_bound() {
        let mut lp = LinearProgram::new(1);
        lp.objective[0] = 1.0;
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add(vec![(0, 1.0)], Sense::Ge, 3.0);
        let sol = optimal(&lp);
        assert!((sol.x[0] - 3.0).abs() < 1e-12);
        assert!((sol.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_face() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, -1.0];
        lp.set_bounds(0, 0.0, 1.0);
        lp.set_bounds(1, 0.0, 1.0);
        lp.add(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.0);
        let sol = optimal(&lp);
        assert!((sol.objective + 1.0).abs() < 1e-12);
        let bound = lp.dual_bound(&sol.duals).unwrap();
        assert!((bound - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.add(vec![(0, 1.0)], Sense::Le, -1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, 0.0];
        lp.add(vec![(0, 1.0), (1, -1.0)], Sense::Le, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);

        let mut lp = LinearProgram::new(2);
        lp.add(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 1.0);
        lp.add(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 2.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn equality_with_free_variables() {
        // min |x1| + |x2| written as split, with x1 + 2 x2 = 4
        let mut lp = LinearProgram::new(4);
        lp.objective = vec![1.0; 4];
        lp.add(vec![(0, 1.0), (1, -1.0), (2, 2.0), (3, -2.0)], Sense::Eq, 4.0);
        let sol = optimal(&lp);
        assert!((sol.objective - 2.0).abs() < 1e-12);
        assert!((sol.x[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let a = DMatrix::zeros(1, 3);
        assert!(matches!(
            LinearProgram::from_dense(vec![1.0, 1.0], &a, &[1.0], &DMatrix::zeros(0, 2), &[], &[(0.0, 1.0); 2]),
            Err(LpError::DimensionMismatch(_))
        ));
        let mut lp = LinearProgram::new(1);
        lp.set_bounds(0, 2.0, 1.0);
        assert!(matches!(solve_lp(&lp), Err(LpError::InvalidBounds { .. })));
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling instance (as a minimization).
        let mut lp = LinearProgram::new(4);
        lp.objective = vec![-0.75, 150.0, -0.02, 6.0];
        lp.add(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], Sense::Le, 0.0);
        lp.add(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], Sense::Le, 0.0);
        lp.add(vec![(2, 1.0)], Sense::Le, 1.0);
        let sol = optimal(&lp);
        assert!((sol.objective + 0.05).abs() < 1e-9);
    }

    #[test]
    fn presolve_fixed_and_dominated() {
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![1.0, 2.0, 0.0];
        lp.set_bounds(2, 5.0, 5.0);
        lp.add(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Ge, 6.0);
        lp.add(vec![(1, 1.0)], Sense::Le, 10.0);
        let sol = optimal(&lp);
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert_eq!(sol.x[2], 5.0);
    }
}

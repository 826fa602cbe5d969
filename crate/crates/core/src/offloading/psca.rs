//! Penalty successive convex approximation for the joint association,
//! power and rate problem over several APs and MEC servers.
//!
//! Variables are normalized: `p̂_k = p_k / P_k` and `f̂_mk = f_mk / F_m` live in
//! `[lo, 1]`, and each user's association vector `a_k` lives in the simplex
//! with a small floor `δ`. On that set the objective `Σ_k p_k Σ_nm a_knm` is
//! exactly `Σ_k p_k`. At each iterate the nonconvex pieces are replaced by
//! convex inner approximations that are tight at the iterate:
//!
//! * latency `a X(p, f) <= L'` is rewritten `X <= L'/a` and the convex right
//!   side is replaced by its tangent `L'(2/ā - a/ā²)`;
//! * the bilinear load `A_km f_mk` (with `A_km = Σ_n a_knm`) is bounded by
//!   `γ/2 A² + f²/(2γ)` with `γ = f̄/Ā`;
//! * the concave penalty is replaced by its tangent plane;
//! * a proximal term `τ/2 |z - z̄|²` is added.
//!
//! Each convex subproblem is solved by a damped Newton barrier method started
//! at the current iterate. Steps that fail to lower the penalized objective are
//! shortened, so the objective is monotone within a penalty stage.

use nalgebra::DMatrix;

use super::barrier::{barrier_minimize, BarrierSetup, ConstraintEval, SmoothProgram};
use super::{argmax_pair, snr_association_baseline, Assignment, OffloadError, Scenario};

/// `Σ (a_i + ε)^p - c_ε` with `c_ε = (1 + ε)^p + (len - 1) ε^p`.
///
/// Zero exactly at the vertices of the unit simplex and positive elsewhere on it.
pub fn penalty_value(a: &[f64], eps: f64, p_exp: f64) -> Result<f64, OffloadError> {
    check_penalty(eps, p_exp)?;
    let c = (1.0 + eps).powf(p_exp) + (a.len() as f64 - 1.0) * eps.powf(p_exp);
    Ok(a.iter().map(|v| (v + eps).powf(p_exp)).sum::<f64>() - c)
}

pub fn penalty_gradient(a: &[f64], eps: f64, p_exp: f64) -> Result<Vec<f64>, OffloadError> {
    check_penalty(eps, p_exp)?;
    Ok(a.iter().map(|v| p_exp * (v + eps).powf(p_exp - 1.0)).collect())
}

fn check_penalty(eps: f64, p_exp: f64) -> Result<(), OffloadError> {
    if !(p_exp > 0.0 && p_exp < 1.0) {
        return Err(OffloadError::InvalidParameter(format!("p_exp must lie in (0, 1), got {p_exp}")));
    }
    if !(eps > 0.0) {
        return Err(OffloadError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PscaParams {
    pub sigma0: f64,
    pub sigma_growth: f64,
    pub eps: f64,
    pub p_exp: f64,
    pub tau: f64,
    /// Successive-iterate change (max norm) that ends a penalty stage.
    pub tol: f64,
    pub max_outer: usize,
    pub max_stages: usize,
    /// Floor on every association variable.
    pub floor: f64,
    /// Binarity gap `max_k (1 - max_nm a_knm)` that ends the schedule.
    pub gap_tol: f64,
}

impl Default for PscaParams {
    fn default() -> Self {
        Self {
            sigma0: 1e-2,
            sigma_growth: 5.0,
            eps: 1e-2,
            p_exp: 0.025,
            tau: 1e-2,
            tol: 1e-3,
            max_outer: 200,
            max_stages: 25,
            floor: 1e-4,
            gap_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PscaTraceEntry {
    pub stage: usize,
    pub sigma: f64,
    /// Penalized objective `Σ p_k + σ P_ε(a)` after the step.
    pub merit: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct PscaResult {
    pub assignment: Assignment,
    pub total_power: f64,
    /// Relaxed association `a[k][n][m]` before rounding.
    pub relaxed: Vec<Vec<Vec<f64>>>,
    pub binarity_gap: f64,
    pub trace: Vec<PscaTraceEntry>,
}

const LO: f64 = 1e-6;
/// Constraints are kept strictly below this value so every iterate can start a barrier solve.
const SHIFT: f64 = 1e-10;
/// Bounds are widened by this much so iterates on a bound stay strictly inside.
const BOUND_SLACK: f64 = 1e-9;

/// Latency of one user on one AP/MEC pair with first and second partials in `p̂_k` and `f̂_mk`.
struct Latency {
    x: f64,
    dp: f64,
    dpp: f64,
    df: f64,
    dff: f64,
}

/// Normalized problem data and variable layout.
struct Ctx {
    k: usize,
    nb: usize,
    nc: usize,
    pcap: Vec<f64>,
    cap: Vec<f64>,
    c: Vec<f64>,
    w: Vec<f64>,
    budget: Vec<f64>,
    alpha: Vec<Vec<f64>>,
    tb: Vec<Vec<f64>>,
    floor: f64,
}

impl Ctx {
    fn new(s: &Scenario, floor: f64) -> Self {
        Self {
            k: s.num_users(),
            nb: s.topology.num_aps(),
            nc: s.topology.num_mecs(),
            pcap: s.tasks.iter().map(|t| t.power_cap).collect(),
            cap: s.topology.mec_capacity.clone(),
            c: s.tasks.iter().map(|t| s.channel.c(t)).collect(),
            w: s.tasks.iter().map(|t| t.cycles).collect(),
            budget: s.tasks.iter().map(|t| t.budget()).collect(),
            alpha: s.channel.alpha.clone(),
            tb: s.topology.backhaul.clone(),
            floor,
        }
    }

    fn dim(&self) -> usize {
        self.k + self.nc * self.k + self.k * self.nb * self.nc
    }
    fn ip(&self, k: usize) -> usize {
        k
    }
    fn i_f(&self, m: usize, k: usize) -> usize {
        self.k + m * self.k + k
    }
    fn ia(&self, k: usize, n: usize, m: usize) -> usize {
        self.k + self.nc * self.k + k * self.nb * self.nc + n * self.nc + m
    }
    fn a_block(&self, k: usize) -> std::ops::Range<usize> {
        let s = self.ia(k, 0, 0);
        s..s + self.nb * self.nc
    }
    fn n_con(&self) -> usize {
        self.k * self.nb * self.nc + self.nc
    }
    fn load(&self, z: &[f64], k: usize, m: usize) -> f64 {
        (0..self.nb).map(|n| z[self.ia(k, n, m)]).sum()
    }

    /// Upload, execution and backhaul time.
    fn latency(&self, z: &[f64], k: usize, n: usize, m: usize) -> Latency {
        let ln2 = std::f64::consts::LN_2;
        let ap = self.alpha[k][n] * self.pcap[k];
        let u = ap * z[self.ip(k)];
        let r = u.ln_1p() / ln2;
        let dr = ap / ((1.0 + u) * ln2);
        let ddr = -ap * ap / ((1.0 + u) * (1.0 + u) * ln2);
        let fh = z[self.i_f(m, k)];
        let e = self.w[k] / self.cap[m];
        let c = self.c[k];
        Latency {
            x: c / r + e / fh + self.tb[n][m],
            dp: -c * dr / (r * r),
            dpp: c * (2.0 * dr * dr / (r * r * r) - ddr / (r * r)),
            df: -e / (fh * fh),
            dff: 2.0 * e / (fh * fh * fh),
        }
    }

    /// Relaxed constraints in the form the surrogate bounds, `< 0` when strictly satisfied.
    fn max_violation(&self, z: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for k in 0..self.k {
            for n in 0..self.nb {
                for m in 0..self.nc {
                    let x = self.latency(z, k, n, m).x;
                    worst = worst.max(x / self.budget[k] - 1.0 / z[self.ia(k, n, m)]);
                }
            }
        }
        for m in 0..self.nc {
            let load: f64 = (0..self.k).map(|k| self.load(z, k, m) * z[self.i_f(m, k)]).sum();
            worst = worst.max(load - 1.0);
        }
        worst
    }

    fn merit(&self, z: &[f64], sigma: f64, params: &PscaParams) -> f64 {
        let power: f64 = (0..self.k).map(|k| self.pcap[k] * z[self.ip(k)]).sum();
        let pen: f64 =
            (0..self.k).map(|k| penalty_value(&z[self.a_block(k)], params.eps, params.p_exp).unwrap_or(f64::NAN)).sum();
        power + sigma * pen
    }

    fn binarity_gap(&self, z: &[f64]) -> f64 {
        (0..self.k).map(|k| 1.0 - z[self.a_block(k)].iter().fold(0.0_f64, |m, &v| m.max(v))).fold(0.0, f64::max)
    }
}

/// Convex inner approximation around `bar`.
struct Surrogate<'a> {
    ctx: &'a Ctx,
    bar: Vec<f64>,
    lin: Vec<f64>,
    gamma: Vec<f64>,
    tau: f64,
}

impl<'a> Surrogate<'a> {
    fn new(ctx: &'a Ctx, bar: &[f64], sigma: f64, params: &PscaParams) -> Self {
        let mut lin = vec![0.0; ctx.dim()];
        for k in 0..ctx.k {
            lin[ctx.ip(k)] = ctx.pcap[k];
            let g = penalty_gradient(&bar[ctx.a_block(k)], params.eps, params.p_exp).expect("validated");
            for (i, gi) in ctx.a_block(k).zip(g) {
                lin[i] = sigma * gi;
            }
        }
        let mut gamma = vec![0.0; ctx.nc * ctx.k];
        for m in 0..ctx.nc {
            for k in 0..ctx.k {
                gamma[m * ctx.k + k] = bar[ctx.i_f(m, k)] / ctx.load(bar, k, m);
            }
        }
        Self { ctx, bar: bar.to_vec(), lin, gamma, tau: params.tau }
    }
}

impl SmoothProgram for Surrogate<'_> {
    fn dim(&self) -> usize {
        self.ctx.dim()
    }

    fn objective(&self, z: &[f64]) -> f64 {
        z.iter().zip(&self.bar).zip(&self.lin).map(|((v, b), l)| l * v + 0.5 * self.tau * (v - b) * (v - b)).sum()
    }

    fn objective_derivs(&self, z: &[f64], t: f64, grad: &mut [f64], hess: &mut DMatrix<f64>) {
        for i in 0..z.len() {
            grad[i] += t * (self.lin[i] + self.tau * (z[i] - self.bar[i]));
            hess[(i, i)] += t * self.tau;
        }
    }

    fn constraints(&self, z: &[f64], derivs: bool) -> Vec<ConstraintEval> {
        let c = self.ctx;
        let mut out = Vec::with_capacity(c.n_con());
        for k in 0..c.k {
            for n in 0..c.nb {
                for m in 0..c.nc {
                    let lat = c.latency(z, k, n, m);
                    let ia = c.ia(k, n, m);
                    let ab = self.bar[ia];
                    let l = c.budget[k];
                    let mut e = ConstraintEval { value: lat.x / l - 2.0 / ab + z[ia] / (ab * ab), ..Default::default() };
                    if derivs {
                        let (ip, jf) = (c.ip(k), c.i_f(m, k));
                        e.grad = vec![(ip, lat.dp / l), (jf, lat.df / l), (ia, 1.0 / (ab * ab))];
                        e.hess = vec![(ip, ip, lat.dpp / l), (jf, jf, lat.dff / l)];
                    }
                    out.push(e);
                }
            }
        }
        for m in 0..c.nc {
            let mut e = ConstraintEval { value: -1.0, ..Default::default() };
            for k in 0..c.k {
                let gm = self.gamma[m * c.k + k];
                let a = c.load(z, k, m);
                let jf = c.i_f(m, k);
                let f = z[jf];
                e.value += 0.5 * gm * a * a + f * f / (2.0 * gm);
                if derivs {
                    for n in 0..c.nb {
                        let ia = c.ia(k, n, m);
                        e.grad.push((ia, gm * a));
                        for n2 in 0..c.nb {
                            e.hess.push((ia, c.ia(k, n2, m), gm));
                        }
                    }
                    e.grad.push((jf, f / gm));
                    e.hess.push((jf, jf, 1.0 / gm));
                }
            }
            out.push(e);
        }
        out
    }
}

/// Barrier solve of the surrogate from the strictly feasible point `bar`.
fn solve_surrogate(s: &Surrogate<'_>) -> Result<Vec<f64>, OffloadError> {
    let ctx = s.ctx;
    let nk = ctx.k + ctx.nc * ctx.k;
    let mut lower = vec![LO; ctx.dim()];
    let mut upper = vec![1.0 + BOUND_SLACK; ctx.dim()];
    for i in nk..ctx.dim() {
        lower[i] = ctx.floor - BOUND_SLACK;
        upper[i] = f64::INFINITY;
    }
    let sums: Vec<_> = (0..ctx.k).map(|k| ctx.a_block(k)).collect();
    let setup = BarrierSetup { lower: &lower, upper: &upper, sums: &sums, shift: SHIFT };
    barrier_minimize(s, &s.bar, &setup)
}

fn initial_point(ctx: &Ctx, s: &Scenario) -> Option<Vec<f64>> {
    let mut z = vec![0.0; ctx.dim()];
    let share = 1.0 / (ctx.nb * ctx.nc) as f64;
    for k in 0..ctx.k {
        z[ctx.ip(k)] = 1.0;
        for i in ctx.a_block(k) {
            z[i] = share;
        }
        for m in 0..ctx.nc {
            z[ctx.i_f(m, k)] = 0.999 * (ctx.nc as f64 / ctx.k as f64).min(1.0);
        }
    }
    if ctx.max_violation(&z) < 0.0 {
        return Some(z);
    }
    // Fall back to the strongest-channel association with a little CPU headroom.
    let base = snr_association_baseline(s, true).ok()?;
    let mut shrunk = s.clone();
    for f in shrunk.topology.mec_capacity.iter_mut() {
        *f *= 1.0 - 1e-3;
    }
    let pairs: Vec<(usize, usize)> = (0..ctx.k).map(|k| base.pair(k)).collect();
    let x = shrunk.complete_assignment(&pairs).ok()?;
    let top = 1.0 - (ctx.nb * ctx.nc - 1) as f64 * ctx.floor;
    for k in 0..ctx.k {
        z[ctx.ip(k)] = (x.powers[k] / ctx.pcap[k]).clamp(LO, 1.0);
        for i in ctx.a_block(k) {
            z[i] = ctx.floor;
        }
        let (n, m) = pairs[k];
        z[ctx.ia(k, n, m)] = top;
        for mm in 0..ctx.nc {
            z[ctx.i_f(mm, k)] = if mm == m { x.rates[m][k] / ctx.cap[m] } else { 1e-3 };
        }
    }
    (ctx.max_violation(&z) < 0.0).then_some(z)
}

/// Runs the penalty schedule, rounds by per-user argmax and re-optimizes
/// powers and rates for the rounded association.
pub fn solve_multi_mec_psca(s: &Scenario, params: &PscaParams) -> Result<PscaResult, OffloadError> {
    s.validate()?;
    check_penalty(params.eps, params.p_exp)?;
    if !(params.sigma0 > 0.0 && params.sigma_growth > 1.0 && params.tau > 0.0) {
        return Err(OffloadError::InvalidParameter("need sigma0 > 0, sigma_growth > 1, tau > 0".into()));
    }
    let ctx = Ctx::new(s, params.floor);
    if (ctx.nb * ctx.nc) as f64 * params.floor >= 1.0 {
        return Err(OffloadError::InvalidParameter("association floor too large".into()));
    }
    let mut z = initial_point(&ctx, s).ok_or(OffloadError::RelaxedInfeasible)?;
    let mut trace = Vec::new();
    let mut sigma = params.sigma0;

    for stage in 0..params.max_stages {
        let mut merit = ctx.merit(&z, sigma, params);
        for _ in 0..params.max_outer {
            let sur = Surrogate::new(&ctx, &z, sigma, params);
            let target = solve_surrogate(&sur)?;
            let mut gamma = 1.0;
            let mut accepted = None;
            while gamma > 1e-6 {
                let cand: Vec<f64> = z.iter().zip(&target).map(|(a, b)| a + gamma * (b - a)).collect();
                let m = ctx.merit(&cand, sigma, params);
                if m < merit && ctx.max_violation(&cand) < SHIFT {
                    accepted = Some((cand, m));
                    break;
                }
                gamma *= 0.5;
            }
            let Some((cand, m)) = accepted else {
                break;
            };
            let step = cand.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            z = cand;
            merit = m;
            trace.push(PscaTraceEntry { stage, sigma, merit, step });
            if step <= params.tol {
                break;
            }
        }
        if ctx.binarity_gap(&z) <= params.gap_tol {
            break;
        }
        sigma *= params.sigma_growth;
    }

    let relaxed: Vec<Vec<Vec<f64>>> =
        (0..ctx.k).map(|k| (0..ctx.nb).map(|n| (0..ctx.nc).map(|m| z[ctx.ia(k, n, m)]).collect()).collect()).collect();
    let pairs: Vec<(usize, usize)> = relaxed.iter().map(|a| argmax_pair(a)).collect();
    let assignment = s.complete_assignment(&pairs).map_err(|e| match e {
        OffloadError::Infeasible { user, .. } => OffloadError::RoundingInfeasible { user },
        other => other,
    })?;
    Ok(PscaResult { total_power: assignment.total_power(), assignment, binarity_gap: ctx.binarity_gap(&z), relaxed, trace })
}

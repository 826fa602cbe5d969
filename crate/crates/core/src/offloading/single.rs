//! Users sharing one MEC server: minimum total power under per-user latency
//! deadlines and a shared CPU budget.
//!
//! For a fixed rate `f` the cheapest power makes the deadline bind,
//! `p(f) = (2^{c/(D - w/f)} - 1)/α`, which is convex and decreasing in `f`.
//! The rate split then solves `min Σ p_k(f_k)` s.t. `Σ f_k = F`, whose KKT
//! conditions equalize the marginal saving `-p_k'(f_k) = μ` across users not
//! pinned at the rate where their power cap binds. Eliminating the latency
//! multipliers `η_k = r_k² (1 + α_k p_k) ln 2 / (c_k α_k)` gives
//! `f_k = √(w_k η_k / μ)`, i.e. the square-root split
//! `f_k = √(w_k η_k) / Σ_j √(w_j η_j) · F`.

use std::f64::consts::LN_2;

use super::{ChannelModel, OffloadError, OffloadTask};

/// A user as seen by one MEC server: upload scale `c = b/B`, cycles, the
/// deadline, latency already spent elsewhere (receive plus backhaul), channel
/// gain of the serving AP and power cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MecUser {
    pub c: f64,
    pub cycles: f64,
    /// Time available for upload and execution.
    pub budget: f64,
    pub alpha: f64,
    pub power_cap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MecSolution {
    pub powers: Vec<f64>,
    pub rates: Vec<f64>,
    pub total_power: f64,
    /// Latency-constraint multipliers (1/W per second of slack).
    pub eta: Vec<f64>,
    /// Multiplier of the shared CPU budget.
    pub mu: f64,
}

/// Least power meeting an upload-time budget `tau`: `(2^{c/τ} - 1)/α`.
pub fn minimal_power(c: f64, alpha: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return f64::INFINITY;
    }
    (c / tau * LN_2).exp_m1() / alpha
}

impl MecUser {
    fn power_at(&self, f: f64) -> f64 {
        minimal_power(self.c, self.alpha, self.budget - self.cycles / f)
    }

    /// `-p'(f)`, decreasing in `f`.
    fn marginal(&self, f: f64) -> f64 {
        let t = self.budget - self.cycles / f;
        if t <= 0.0 {
            return f64::INFINITY;
        }
        let e = self.c / t;
        e.exp2() * LN_2 * self.c * self.cycles / (self.alpha * t * t * f * f)
    }

    fn cap_rate(&self) -> f64 {
        (self.alpha * self.power_cap).ln_1p() / LN_2
    }

    /// Smallest rate that meets the deadline at full power, if any.
    fn floor_rate(&self) -> Option<f64> {
        let slack = self.budget - self.c / self.cap_rate();
        (slack > 0.0).then(|| self.cycles / slack)
    }

    /// Rate where the marginal saving equals `mu`, never below `floor`.
    fn rate_for(&self, mu: f64, floor: f64) -> f64 {
        if self.marginal(floor) <= mu {
            return floor;
        }
        let mut lo = floor;
        let mut hi = floor * 2.0;
        while self.marginal(hi) > mu {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if mid <= lo || mid >= hi {
                break;
            }
            if self.marginal(mid) > mu {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    fn validate(&self, k: usize) -> Result<(), OffloadError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.c) && ok(self.cycles) && ok(self.alpha) && ok(self.power_cap) && self.budget.is_finite() {
            Ok(())
        } else {
            Err(OffloadError::InvalidScenario(format!("user {k}: non-positive or non-finite parameter")))
        }
    }
}

fn feasible(users: &[MecUser], capacity: f64) -> Result<(), usize> {
    let mut total = 0.0;
    let mut worst = (0, 0.0);
    for (k, u) in users.iter().enumerate() {
        let Some(f) = u.floor_rate() else {
            return Err(k);
        };
        total += f;
        if f > worst.1 {
            worst = (k, f);
        }
    }
    if total > capacity {
        Err(worst.0)
    } else {
        Ok(())
    }
}

/// Smallest factor `s >= 1` such that scaling every full deadline by `s`
/// (fixed latency terms unchanged) makes the instance feasible.
fn inflation_factor(users: &[MecUser], deadlines: &[f64], capacity: f64) -> f64 {
    let scaled = |s: f64| -> Vec<MecUser> {
        users.iter().zip(deadlines).map(|(u, &l)| MecUser { budget: u.budget + (s - 1.0) * l, ..*u }).collect()
    };
    let mut hi = 2.0;
    while feasible(&scaled(hi), capacity).is_err() {
        hi *= 2.0;
        if hi > 1e18 {
            return f64::INFINITY;
        }
    }
    let mut lo = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(&scaled(mid), capacity).is_ok() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Minimum-power rates and powers for users sharing a server of `capacity` cycles/s.
pub fn solve_mec_subproblem(users: &[MecUser], capacity: f64) -> Result<MecSolution, OffloadError> {
    solve_with_deadlines(users, capacity, None)
}

fn solve_with_deadlines(users: &[MecUser], capacity: f64, deadlines: Option<&[f64]>) -> Result<MecSolution, OffloadError> {
    if !(capacity.is_finite() && capacity > 0.0) {
        return Err(OffloadError::InvalidScenario("capacity must be positive".into()));
    }
    for (k, u) in users.iter().enumerate() {
        u.validate(k)?;
    }
    if users.is_empty() {
        return Ok(MecSolution { powers: vec![], rates: vec![], total_power: 0.0, eta: vec![], mu: 0.0 });
    }
    if let Err(user) = feasible(users, capacity) {
        let own: Vec<f64> = users.iter().map(|u| u.budget).collect();
        let inflation = inflation_factor(users, deadlines.unwrap_or(&own), capacity);
        return Err(OffloadError::Infeasible { user, inflation });
    }
    let floors: Vec<f64> = users.iter().map(|u| u.floor_rate().expect("checked")).collect();
    let total = |mu: f64| -> f64 { users.iter().zip(&floors).map(|(u, &fl)| u.rate_for(mu, fl)).sum() };

    // At mu_hi every user sits at its floor, so the sum is feasible.
    let mut mu_hi = users.iter().zip(&floors).map(|(u, &fl)| u.marginal(fl)).fold(0.0_f64, f64::max);
    let mut mu_lo = mu_hi;
    if total(mu_hi) <= capacity {
        let mut guard = 0;
        while total(mu_lo) <= capacity && guard < 2000 {
            mu_hi = mu_lo;
            mu_lo *= 0.5;
            guard += 1;
        }
        if guard == 2000 {
            return Err(OffloadError::Numerical("rate multiplier bracketing failed".into()));
        }
        for _ in 0..200 {
            let mid = (mu_lo * mu_hi).sqrt();
            if mid <= mu_lo || mid >= mu_hi {
                break;
            }
            if total(mid) > capacity {
                mu_lo = mid;
            } else {
                mu_hi = mid;
            }
        }
    }
    let mu = mu_hi;
    let rates: Vec<f64> = users.iter().zip(&floors).map(|(u, &fl)| u.rate_for(mu, fl)).collect();
    let powers: Vec<f64> = users.iter().zip(&rates).map(|(u, &f)| u.power_at(f).min(u.power_cap)).collect();
    if powers.iter().any(|p| !p.is_finite()) {
        return Err(OffloadError::Numerical("non-finite power".into()));
    }
    let eta = users
        .iter()
        .zip(rates.iter().zip(&floors))
        .zip(&powers)
        .map(|((u, (&f, &fl)), &p)| {
            if f > fl {
                let r = (u.alpha * p).ln_1p() / LN_2;
                r * r * (1.0 + u.alpha * p) * LN_2 / (u.c * u.alpha)
            } else {
                mu * f * f / u.cycles
            }
        })
        .collect();
    Ok(MecSolution { total_power: powers.iter().sum(), powers, rates, eta, mu })
}

/// Single AP/MEC pair: every task uses column 0 of the channel gains.
pub fn solve_single_mec(tasks: &[OffloadTask], channel: &ChannelModel, capacity: f64) -> Result<MecSolution, OffloadError> {
    if channel.alpha.len() != tasks.len() || channel.alpha.iter().any(|r| r.is_empty()) {
        return Err(OffloadError::InvalidScenario("one channel gain per task required".into()));
    }
    for (k, t) in tasks.iter().enumerate() {
        t.validate(k)?;
    }
    let users: Vec<MecUser> = tasks
        .iter()
        .zip(&channel.alpha)
        .map(|(t, a)| MecUser { c: channel.c(t), cycles: t.cycles, budget: t.budget(), alpha: a[0], power_cap: t.power_cap })
        .collect();
    let deadlines: Vec<f64> = tasks.iter().map(|t| t.deadline).collect();
    solve_with_deadlines(&users, capacity, Some(&deadlines))
}

/// Rates proportional to workload: `f_k = w_k F / Σ_j w_j`.
pub fn proportional_rate_baseline(tasks: &[OffloadTask], capacity: f64) -> Result<Vec<f64>, OffloadError> {
    let total: f64 = tasks.iter().map(|t| t.cycles).sum();
    if !(total > 0.0) || tasks.iter().any(|t| t.cycles < 0.0) {
        return Err(OffloadError::InvalidParameter("workloads must be non-negative with a positive sum".into()));
    }
    Ok(tasks.iter().map(|t| t.cycles * capacity / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(c: f64, w: f64, d: f64, alpha: f64) -> MecUser {
        MecUser { c, cycles: w, budget: d, alpha, power_cap: 1.0 }
    }

    #[test]
    fn one_user_takes_the_whole_server() {
        let u = user(0.1, 1e8, 0.5, 100.0);
        let sol = solve_mec_subproblem(&[u], 1e9).unwrap();
        assert!((sol.rates[0] - 1e9).abs() < 1e-3);
        let want = (2f64.powf(0.1 / (0.5 - 0.1)) - 1.0) / 100.0;
        assert!((sol.powers[0] - want).abs() < 1e-12 * want.max(1.0));
    }

    #[test]
    fn marginal_matches_finite_difference() {
        let u = user(0.2, 3e8, 0.6, 50.0);
        let f = 1.2e9;
        let h = 1e3;
        let fd = -(u.power_at(f + h) - u.power_at(f - h)) / (2.0 * h);
        assert!((u.marginal(f) - fd).abs() < 1e-6 * fd.abs());
    }

    #[test]
    fn minimal_power_inverts_rate() {
        let p = minimal_power(0.3, 20.0, 0.1);
        let r = (20.0 * p).ln_1p() / LN_2;
        assert!((0.3 / r - 0.1).abs() < 1e-12);
        assert_eq!(minimal_power(1.0, 1.0, 0.0), f64::INFINITY);
    }

    #[test]
    fn unreachable_deadline_names_the_user() {
        let ok = user(0.1, 1e8, 0.5, 100.0);
        let bad = user(10.0, 1e8, 0.5, 1.0);
        match solve_mec_subproblem(&[ok, bad], 1e9) {
            Err(OffloadError::Infeasible { user, inflation }) => {
                assert_eq!(user, 1);
                assert!(inflation > 1.0 && inflation.is_finite());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn proportional_split() {
        let t = |w| OffloadTask::new(1.0, w, 1.0, 1.0);
        assert_eq!(proportional_rate_baseline(&[t(1.0), t(1.0)], 2.0).unwrap(), vec![1.0, 1.0]);
        assert_eq!(proportional_rate_baseline(&[t(1.0), t(3.0)], 4.0).unwrap(), vec![1.0, 3.0]);
    }
}

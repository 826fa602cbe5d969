//! Reference association strategies: exhaustive search over binary
//! associations and strongest-channel association.

use super::{minimal_power, Assignment, OffloadError, Scenario};

/// Largest number of associations `(N_b N_c)^K` the exhaustive search will visit.
pub const EXHAUSTIVE_BUDGET: usize = 1_000_000;

/// Global optimum over all binary associations; each candidate is completed
/// with the optimal per-MEC powers and rates. Ties keep the first candidate in
/// lexicographic order of the per-user pair index `n * N_c + m`.
pub fn exhaustive_baseline(s: &Scenario) -> Result<Assignment, OffloadError> {
    s.validate()?;
    let k = s.num_users();
    let (nb, nc) = (s.topology.num_aps(), s.topology.num_mecs());
    let choices = nb * nc;
    let count = (choices as f64).powi(k as i32);
    if count > EXHAUSTIVE_BUDGET as f64 {
        return Err(OffloadError::BudgetExceeded { count, budget: EXHAUSTIVE_BUDGET });
    }
    let mut digits = vec![0usize; k];
    let mut best: Option<Assignment> = None;
    let mut last_err = None;
    loop {
        let pairs: Vec<(usize, usize)> = digits.iter().map(|&d| (d / nc, d % nc)).collect();
        match s.complete_assignment(&pairs) {
            Ok(x) => {
                if best.as_ref().is_none_or(|b| x.total_power() < b.total_power()) {
                    best = Some(x);
                }
            }
            Err(e @ OffloadError::Infeasible { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
        // odometer increment, last user fastest
        let mut i = k;
        loop {
            if i == 0 {
                return best.ok_or_else(|| last_err.unwrap_or(OffloadError::RelaxedInfeasible));
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < choices {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Each user attaches to its strongest AP (lowest index on ties) and runs on
/// the MEC with the smallest backhaul latency from that AP (lowest index on
/// ties). With `joint`, powers and rates are co-optimized per MEC; otherwise
/// rates are split in proportion to workload and each user then spends the
/// least power meeting its remaining latency budget.
pub fn snr_association_baseline(s: &Scenario, joint: bool) -> Result<Assignment, OffloadError> {
    s.validate()?;
    let pairs: Vec<(usize, usize)> = (0..s.num_users())
        .map(|k| {
            let row = &s.channel.alpha[k];
            let n = (0..row.len()).fold(0, |b, i| if row[i] > row[b] { i } else { b });
            let tb = &s.topology.backhaul[n];
            let m = (0..tb.len()).fold(0, |b, i| if tb[i] < tb[b] { i } else { b });
            (n, m)
        })
        .collect();
    if joint {
        return s.complete_assignment(&pairs);
    }

    let k = s.num_users();
    let (nb, nc) = (s.topology.num_aps(), s.topology.num_mecs());
    let mut a = vec![vec![vec![0.0; nc]; nb]; k];
    let mut powers = vec![0.0; k];
    let mut rates = vec![vec![0.0; k]; nc];
    for m in 0..nc {
        let members: Vec<usize> = (0..k).filter(|&u| pairs[u].1 == m).collect();
        let load: f64 = members.iter().map(|&u| s.tasks[u].cycles).sum();
        for &u in &members {
            let (n, _) = pairs[u];
            let t = &s.tasks[u];
            let f = t.cycles * s.topology.mec_capacity[m] / load;
            let tau = t.budget() - s.topology.backhaul[n][m] - t.cycles / f;
            let c = s.channel.c(t);
            let alpha = s.channel.alpha[u][n];
            let p = minimal_power(c, alpha, tau);
            if !(p <= t.power_cap) {
                // deadline factor at which full power just suffices
                let r_cap = (alpha * t.power_cap).ln_1p() / std::f64::consts::LN_2;
                let needed = c / r_cap + t.cycles / f + s.topology.backhaul[n][m] + t.rx_latency;
                return Err(OffloadError::Infeasible { user: u, inflation: needed / t.deadline });
            }
            a[u][n][m] = 1.0;
            powers[u] = p;
            rates[m][u] = f;
        }
    }
    Ok(Assignment { a, powers, rates })
}

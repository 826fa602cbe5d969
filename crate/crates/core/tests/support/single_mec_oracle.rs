use edgecloud::offloading::*;
use edgecloud::solver::{project_weighted_floor, solve_projected_gradient, ProjectedProblem, StepRule};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const LN2: f64 = std::f64::consts::LN_2;

pub fn random_single(rng: &mut ChaCha8Rng, k: usize) -> (Vec<OffloadTask>, ChannelModel, f64) {
    let tasks: Vec<OffloadTask> = (0..k)
        .map(|_| {
            OffloadTask::new(
                rng.random_range(1e5..5e5),
                rng.random_range(5e7..2e8),
                rng.random_range(0.3..0.8),
                rng.random_range(0.2..1.0),
            )
        })
        .collect();
    let alpha = (0..k).map(|_| vec![10f64.powf(rng.random_range(1.0..3.0))]).collect();
    (tasks, ChannelModel { bandwidth: 1e6, alpha }, 3e9)
}

/// Power that makes the deadline bind at rate `f`.
fn power_at(t: &OffloadTask, c: f64, alpha: f64, f: f64) -> f64 {
    let tau = t.budget() - t.cycles / f;
    if tau <= 0.0 {
        return f64::INFINITY;
    }
    ((c / tau) * LN2).exp_m1() / alpha
}

/// Minimum total power by projected gradient over rate fractions `f_k / F`,
/// each bounded below where the power cap starts to bind.
pub fn numeric_single(tasks: &[OffloadTask], ch: &ChannelModel, cap: f64) -> Option<f64> {
    let k = tasks.len();
    let c: Vec<f64> = tasks.iter().map(|t| t.bits / ch.bandwidth).collect();
    let alpha: Vec<f64> = ch.alpha.iter().map(|r| r[0]).collect();
    let lo: Vec<f64> = (0..k)
        .map(|i| {
            let r_cap = (1.0 + alpha[i] * tasks[i].power_cap).log2();
            let tau = tasks[i].budget() - c[i] / r_cap;
            if tau <= 0.0 {
                f64::INFINITY
            } else {
                tasks[i].cycles / tau / cap
            }
        })
        .collect();
    if lo.iter().sum::<f64>() > 1.0 {
        return None;
    }
    let obj = |x: &[f64]| -> f64 { (0..k).map(|i| power_at(&tasks[i], c[i], alpha[i], x[i] * cap)).sum() };
    let grad = |x: &[f64], g: &mut [f64]| {
        for i in 0..k {
            let f = x[i] * cap;
            let tau = tasks[i].budget() - tasks[i].cycles / f;
            let e = c[i] / tau;
            let dp_dtau = -LN2 * e / tau * (e * LN2).exp() / alpha[i];
            g[i] = dp_dtau * tasks[i].cycles / (f * f) * cap;
        }
    };
    let ones = vec![1.0; k];
    let proj = |x: &mut [f64]| {
        project_weighted_floor(x, &ones, &lo, 1.0).expect("non-empty");
    };
    // start between the floors and an even split of the remaining capacity
    let spare = (1.0 - lo.iter().sum::<f64>()) / k as f64;
    let x0: Vec<f64> = lo.iter().map(|l| l + 0.5 * spare).collect();
    let p = ProjectedProblem::new(k, obj, grad, proj);
    let r = solve_projected_gradient(&p, &x0, StepRule::Backtracking { initial: 1e-3 }, 1e-15, 200_000).ok()?;
    Some(r.objective)
}

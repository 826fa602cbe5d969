//! Euclidean projections onto the simple sets used by the resource allocators.

/// Clamps every coordinate into `[lo[i], hi[i]]`.
pub fn project_box(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

/// Projects onto `{t : t_i >= floor, Σ t_i = total}`.
///
/// Panics if the set is empty (`total < n * floor`).
pub fn project_simplex_floor(x: &mut [f64], total: f64, floor: f64) {
    let n = x.len();
    if n == 0 {
        return;
    }
    let mass = total - floor * n as f64;
    assert!(mass >= -1e-12 * total.abs().max(1.0), "empty simplex: total {total} < {n} * {floor}");
    let mass = mass.max(0.0);
    let mut sorted: Vec<f64> = x.iter().map(|v| v - floor).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - mass) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for v in x.iter_mut() {
        *v = floor + (*v - floor - theta).max(0.0);
    }
}

/// Projects onto `{t : t_i >= lo_i, Σ w_i t_i <= cap}` with positive weights.
///
/// Returns `None` when the set is empty (`Σ w_i lo_i > cap`).
pub fn project_weighted_floor(x: &mut [f64], w: &[f64], lo: &[f64], cap: f64) -> Option<()> {
    let base: f64 = w.iter().zip(lo).map(|(a, b)| a * b).sum();
    if base > cap * (1.0 + 1e-12) + 1e-300 {
        return None;
    }
    let load = |lam: f64| -> f64 { x.iter().zip(w).zip(lo).map(|((&v, &wi), &l)| wi * (v - lam * wi).max(l)).sum() };
    if load(0.0) <= cap {
        for (v, &l) in x.iter_mut().zip(lo) {
            *v = v.max(l);
        }
        return Some(());
    }
    let mut hi = x.iter().zip(w).zip(lo).map(|((&v, &wi), &l)| (v - l) / wi).fold(0.0_f64, f64::max);
    let mut lo_lam = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo_lam + hi);
        if mid <= lo_lam || mid >= hi {
            break;
        }
        if load(mid) > cap {
            lo_lam = mid;
        } else {
            hi = mid;
        }
    }
    // Solve exactly on the linear piece identified by the bracket.
    let lam = 0.5 * (lo_lam + hi);
    let (mut num, mut den) = (-cap, 0.0);
    for ((&v, &wi), &l) in x.iter().zip(w).zip(lo) {
        if v - lam * wi > l {
            num += wi * v;
            den += wi * wi;
        } else {
            num += wi * l;
        }
    }
    let lam = if den > 0.0 { (num / den).clamp(lo_lam, hi) } else { hi };
    for ((v, &wi), &l) in x.iter_mut().zip(w).zip(lo) {
        *v = (*v - lam * wi).max(l);
    }
    Some(())
}

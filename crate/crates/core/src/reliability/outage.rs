//! Rayleigh fading outage model. The sum of `n` independent exponential
//! channel gains with rate `λ` is Gamma distributed with integer order `n`.

use serde::{Deserialize, Serialize};

use super::ReliabilityError;

/// Relative width at which the inverse CDF bisection stops.
const INVERSE_RTOL: f64 = 1e-12;

/// One fading link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingLink {
    /// Meters.
    pub distance: f64,
    /// Bits/s/Hz.
    pub rate: f64,
    /// Watts.
    pub noise_var: f64,
    pub lambda: f64,
    /// Independent channels, `n_T n_R`.
    pub n: u32,
}

/// Shared fading parameters with one distance per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingLinkModel {
    #[serde(rename = "R")]
    pub rate: f64,
    #[serde(rename = "sigma_n2")]
    pub noise_var: f64,
    pub lambda: f64,
    pub n: u32,
    /// Per-edge distances; empty means unit distance everywhere.
    #[serde(default, rename = "r_m")]
    pub distances: Vec<f64>,
}

impl Default for FadingLinkModel {
    fn default() -> Self {
        Self { rate: 1.0, noise_var: 1.0, lambda: 1.0, n: 1, distances: Vec::new() }
    }
}

impl FadingLinkModel {
    pub fn validate(&self, edges: usize) -> Result<(), ReliabilityError> {
        let bad = |m: String| Err(ReliabilityError::InvalidParameter(m));
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return bad(format!("rate {}", self.rate));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) || !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("noise variance {} and lambda {} must be positive", self.noise_var, self.lambda));
        }
        if self.n == 0 {
            return bad("need at least one channel".into());
        }
        if !self.distances.is_empty() && self.distances.len() != edges {
            return bad(format!("{} distances for {edges} edges", self.distances.len()));
        }
        if self.distances.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return bad("distances must be positive".into());
        }
        Ok(())
    }

    pub fn distance(&self, m: usize) -> f64 {
        self.distances.get(m).copied().unwrap_or(1.0)
    }

    pub fn link(&self, m: usize) -> FadingLink {
        FadingLink { distance: self.distance(m), rate: self.rate, noise_var: self.noise_var, lambda: self.lambda, n: self.n }
    }

    /// Budget in `t` units: `P_Tmax / (σ² (2^R - 1))`.
    pub fn c_max(&self, p_tmax: f64) -> f64 {
        p_tmax / (self.noise_var * (2f64.powf(self.rate) - 1.0))
    }

    /// Total power for a budget in `t` units.
    pub fn p_tmax(&self, c_max: f64) -> f64 {
        c_max * self.noise_var * (2f64.powf(self.rate) - 1.0)
    }

    /// Lower bound on `t` that keeps the objective convex, `λ / (n + 1)`.
    pub fn t_floor(&self) -> f64 {
        self.lambda / (self.n as f64 + 1.0)
    }
}

/// Gamma density of integer order `n` and rate `λ`.
pub fn gamma_pdf(x: f64, n: u32, lambda: f64) -> f64 {
    if x <= 0.0 {
        return if x == 0.0 && n == 1 { lambda } else { 0.0 };
    }
    let y = lambda * x;
    // λ^n x^{n-1} e^{-λx} / (n-1)! evaluated in logs
    let log_fact: f64 = (1..n).map(|k| (k as f64).ln()).sum();
    (n as f64 * lambda.ln() + (n as f64 - 1.0) * x.ln() - y - log_fact).exp()
}

/// Gamma CDF of integer order `n` and rate `λ`.
pub fn gamma_cdf(x: f64, n: u32, lambda: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let y = lambda * x;
    if n == 1 {
        return -(-y).exp_m1();
    }
    if y < n as f64 {
        // e^{-y} Σ_{k≥n} y^k / k!, free of cancellation below the mode
        let mut term = (-y).exp();
        for k in 1..=n {
            term *= y / k as f64;
        }
        let mut sum = 0.0;
        let mut k = n;
        while term > sum * 1e-17 {
            sum += term;
            k += 1;
            term *= y / k as f64;
        }
        sum.min(1.0)
    } else {
        let mut term = (-y).exp();
        let mut tail = 0.0;
        for k in 0..n {
            tail += term;
            term *= y / (k + 1) as f64;
        }
        (1.0 - tail).max(0.0)
    }
}

/// `x` with `gamma_cdf(x) = q`, by bisection; closed form for `n = 1`.
pub fn gamma_cdf_inverse(q: f64, n: u32, lambda: f64) -> Result<f64, ReliabilityError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(ReliabilityError::InvalidProbability(q));
    }
    if n == 1 {
        return Ok(-(-q).ln_1p() / lambda);
    }
    let mut hi = n as f64 / lambda;
    while gamma_cdf(hi, n, lambda) < q {
        hi *= 2.0;
    }
    let mut lo = hi;
    while gamma_cdf(lo, n, lambda) > q {
        lo *= 0.5;
        if lo == 0.0 {
            return Ok(0.0);
        }
    }
    while hi - lo > INVERSE_RTOL * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gamma_cdf(mid, n, lambda) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_link(link: &FadingLink) -> Result<(), ReliabilityError> {
    FadingLinkModel { rate: link.rate, noise_var: link.noise_var, lambda: link.lambda, n: link.n, distances: vec![link.distance] }
        .validate(1)
}

/// `F_n((2^R - 1) / ρ; λ)` with `ρ = P / (σ² r²)`.
pub fn outage_probability(power: f64, link: &FadingLink) -> Result<f64, ReliabilityError> {
    check_link(link)?;
    if !(power > 0.0) {
        return Err(ReliabilityError::NonPositivePower(power));
    }
    let rho = power / (link.noise_var * link.distance * link.distance);
    Ok(gamma_cdf((2f64.powf(link.rate) - 1.0) / rho, link.n, link.lambda))
}

/// Transmit power achieving outage `pout`: `σ² r² (2^R - 1) / F_n⁻¹(pout; λ)`.
pub fn power_from_outage(pout: f64, link: &FadingLink) -> Result<f64, ReliabilityError> {
    check_link(link)?;
    let x = gamma_cdf_inverse(pout, link.n, link.lambda)?;
    if x == 0.0 {
        return Err(ReliabilityError::Numerical(format!("outage {pout} needs unbounded power")));
    }
    Ok(link.noise_var * link.distance * link.distance * (2f64.powf(link.rate) - 1.0) / x)
}

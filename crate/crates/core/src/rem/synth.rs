//! Synthetic prior fields: log-distance path loss from access points at
//! the corners of a rectangular area plus smooth shadowing bumps, sampled on
//! a jittered lattice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{FieldGrid, RemDictionary, RemError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub nodes: usize,
    pub aps: usize,
    /// Area in meters.
    pub width: f64,
    pub height: f64,
    /// Lattice jitter as a fraction of the spacing.
    pub jitter: f64,
    /// Transmit power minus the loss at 1 m, in dB.
    pub reference_db: f64,
    pub path_loss_exponent: f64,
    /// Shadowing bumps per access point.
    pub bumps: usize,
    pub bump_db: f64,
    pub bump_radius: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            nodes: 547,
            aps: 4,
            width: 600.0,
            height: 500.0,
            jitter: 0.3,
            reference_db: -20.0,
            path_loss_exponent: 3.0,
            bumps: 4,
            bump_db: 6.0,
            bump_radius: 80.0,
        }
    }
}

impl SyntheticSpec {
    /// Mean spacing of the lattice in meters.
    pub fn spacing(&self) -> f64 {
        (self.width * self.height / self.nodes.max(1) as f64).sqrt()
    }

    fn validate(&self) -> Result<(), RemError> {
        let bad = |m: &str| Err(RemError::InvalidParameter(m.into()));
        if self.nodes < 2 || self.aps == 0 {
            return bad("need at least two nodes and one access point");
        }
        if !(self.width > 0.0 && self.height > 0.0) || !(0.0..0.5).contains(&self.jitter) {
            return bad("area must be positive and jitter in [0, 0.5)");
        }
        if !(self.bump_radius > 0.0) || !self.reference_db.is_finite() || !self.path_loss_exponent.is_finite() {
            return bad("invalid propagation parameters");
        }
        Ok(())
    }
}

/// Access point `m` of `aps`: the four corners clockwise from south-east
/// when `aps = 4`, otherwise evenly spread on the circumscribed ellipse.
fn ap_position(spec: &SyntheticSpec, m: usize) -> [f64; 2] {
    let theta = -std::f64::consts::FRAC_PI_4 + std::f64::consts::TAU * m as f64 / spec.aps as f64;
    let r = std::f64::consts::SQRT_2 / 2.0;
    [spec.width * (0.5 + r * theta.cos()), spec.height * (0.5 + r * theta.sin())]
}

/// One prior field per access point over shared positions, in dB.
pub fn synthetic_grids(spec: &SyntheticSpec, seed: u64) -> Result<Vec<FieldGrid>, RemError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = ((spec.nodes as f64 * spec.width / spec.height).sqrt().ceil() as usize).max(1);
    let rows = spec.nodes.div_ceil(cols);
    let (dx, dy) = (spec.width / cols as f64, spec.height / rows as f64);
    let positions: Vec<Vec<f64>> = (0..spec.nodes)
        .map(|i| {
            let (c, r) = ((i % cols) as f64, (i / cols) as f64);
            let jx = spec.jitter * (2.0 * rng.random::<f64>() - 1.0);
            let jy = spec.jitter * (2.0 * rng.random::<f64>() - 1.0);
            vec![(c + 0.5 + jx) * dx, (r + 0.5 + jy) * dy]
        })
        .collect();
    let mut grids = Vec::with_capacity(spec.aps);
    for m in 0..spec.aps {
        let ap = ap_position(spec, m);
        let bumps: Vec<([f64; 2], f64)> = (0..spec.bumps)
            .map(|_| {
                let centre = [rng.random::<f64>() * spec.width, rng.random::<f64>() * spec.height];
                let amp: f64 = StandardNormal.sample(&mut rng);
                (centre, amp * spec.bump_db)
            })
            .collect();
        let field = positions
            .iter()
            .map(|p| {
                let d = ((p[0] - ap[0]).powi(2) + (p[1] - ap[1]).powi(2)).sqrt().max(1.0);
                let shadow: f64 = bumps
                    .iter()
                    .map(|(c, a)| {
                        let r2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                        a * (-r2 / (2.0 * spec.bump_radius * spec.bump_radius)).exp()
                    })
                    .sum();
                spec.reference_db - 10.0 * spec.path_loss_exponent * d.log10() + shadow
            })
            .collect();
        grids.push(FieldGrid { positions: positions.clone(), field });
    }
    Ok(grids)
}

/// `x = U s` with standard normal coefficients on the blocks of the active
/// access points and zeros elsewhere. Returns `(x, s)`.
pub fn bandlimited_signal<R: Rng + ?Sized>(dict: &RemDictionary, active: &[usize], rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let mut s = vec![0.0; dict.num_columns()];
    for &m in active {
        for j in dict.block(m) {
            s[j] = StandardNormal.sample(rng);
        }
    }
    let x = (&dict.stacked * nalgebra::DVector::from_column_slice(&s)).as_slice().to_vec();
    (x, s)
}

//! Radio environment map reconstruction.
//!
//! Each access point contributes a dictionary of low-frequency Laplacian
//! eigenvectors of a similarity graph built from its prior field. A map is
//! recovered from sparse samples by basis pursuit over the stacked
//! dictionary, solved as a linear program.

mod synth;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{eigendecompose, laplacian_from_adjacency, GraphError};
use crate::solver::{solve_lp, LinearProgram, LpError, LpStatus, Sense};

pub use synth::{bandlimited_signal, synthetic_grids, SyntheticSpec};

/// Singular values below this fraction of the largest count as zero in rank tests.
pub const RANK_RTOL: f64 = 1e-6;
/// Half-width of the noisy observation band, in noise standard deviations.
pub const NOISE_BAND: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RemError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite field value at vertex {0}")]
    NonFiniteField(usize),
    #[error("bandwidth {k} must be below the number of vertices {n}")]
    BandwidthTooLarge { k: usize, n: usize },
    #[error("sampling mask is empty")]
    EmptyMask,
    #[error("mask index {index} out of range for {n} vertices")]
    MaskOutOfRange { index: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("true signal is zero")]
    ZeroSignal,
    #[error("observations are inconsistent with the dictionary")]
    Infeasible,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("json: {0}")]
    Json(String),
}

/// Field values over a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub positions: Vec<Vec<f64>>,
    pub field: Vec<f64>,
}

impl FieldGrid {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn validate(&self) -> Result<(), RemError> {
        let n = self.positions.len();
        if n == 0 {
            return Err(RemError::InvalidGrid("no points".into()));
        }
        if self.field.len() != n {
            return Err(RemError::DimensionMismatch(format!("{} field values for {n} points", self.field.len())));
        }
        let dim = self.positions[0].len();
        if dim == 0 || self.positions.iter().any(|p| p.len() != dim) {
            return Err(RemError::InvalidGrid("positions must share a nonzero dimension".into()));
        }
        if let Some(i) = self.positions.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(RemError::InvalidGrid(format!("non-finite coordinate at point {i}")));
        }
        if let Some(i) = self.field.iter().position(|e| !e.is_finite()) {
            return Err(RemError::NonFiniteField(i));
        }
        let mut sorted: Vec<(&Vec<f64>, usize)> = self.positions.iter().zip(0..).collect();
        sorted.sort_by(|a, b| a.0.partial_cmp(b.0).expect("finite"));
        if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(RemError::InvalidGrid(format!("points {} and {} coincide", w[0].1, w[1].1)));
        }
        Ok(())
    }
}

/// How the neighbour radius `r0` is compared with point distances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceRule {
    /// Neighbours when the squared distance is at most `r0`.
    #[default]
    Squared,
    /// Neighbours when the distance is at most `r0`.
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityParams {
    pub sigma: f64,
    pub r0: f64,
    #[serde(default)]
    pub rule: DistanceRule,
}

impl SimilarityParams {
    fn validate(&self) -> Result<(), RemError> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) || !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(RemError::InvalidParameter(format!("sigma {} and r0 {} must be positive", self.sigma, self.r0)));
        }
        Ok(())
    }

    fn neighbours(&self, a: &[f64], b: &[f64]) -> bool {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        match self.rule {
            DistanceRule::Squared => d2 <= self.r0,
            DistanceRule::Euclidean => d2.sqrt() <= self.r0,
        }
    }
}

/// `a_ij = exp(-|E_i - E_j|² / 2σ²)` for neighbouring points, zero otherwise.
pub fn build_similarity_adjacency(grid: &FieldGrid, params: &SimilarityParams) -> Result<DMatrix<f64>, RemError> {
    params.validate()?;
    grid.validate()?;
    let n = grid.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if params.neighbours(&grid.positions[i], &grid.positions[j]) {
                let d = grid.field[i] - grid.field[j];
                let w = (-d * d / (2.0 * params.sigma * params.sigma)).exp();
                a[(i, j)] = w;
                a[(j, i)] = w;
            }
        }
    }
    Ok(a)
}

/// Low-frequency basis of one access point.
#[derive(Debug, Clone, PartialEq)]
pub struct ApBasis {
    /// `N x K'` orthonormal columns, eigenvalues ascending.
    pub basis: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Set when the cut at the requested bandwidth split a tied eigenvalue
    /// block and the whole block was kept.
    pub warning: Option<String>,
}

/// Eigenvectors of the `k` smallest Laplacian eigenvalues of one prior field.
/// A tied block at the cut is kept whole, so the basis may be wider than `k`.
pub fn build_ap_basis(grid: &FieldGrid, params: &SimilarityParams, k: usize) -> Result<ApBasis, RemError> {
    let n = grid.len();
    if k == 0 {
        return Err(RemError::InvalidParameter("bandwidth must be positive".into()));
    }
    if k >= n {
        return Err(RemError::BandwidthTooLarge { k, n });
    }
    let a = build_similarity_adjacency(grid, params)?;
    let spec = eigendecompose(&laplacian_from_adjacency(&a))?;
    let mut kk = k;
    while !spec.has_gap_before(kk) {
        kk += 1;
    }
    let warning =
        (kk > k).then(|| format!("eigenvalue {:.3e} is tied across the cut at {k}; kept {kk} columns", spec.eigenvalues[k]));
    Ok(ApBasis {
        basis: spec.eigenvectors.columns(0, kk).into_owned(),
        eigenvalues: spec.eigenvalues.iter().take(kk).copied().collect(),
        warning,
    })
}

/// Per-AP dictionaries and their horizontal stack.
#[derive(Debug, Clone, PartialEq)]
pub struct RemDictionary {
    pub per_ap: Vec<ApBasis>,
    /// Requested columns per AP.
    pub bandwidth: usize,
    /// `[U_1, ..., U_M]`.
    pub stacked: DMatrix<f64>,
}

impl RemDictionary {
    pub fn from_bases(per_ap: Vec<ApBasis>, bandwidth: usize) -> Result<Self, RemError> {
        let Some(first) = per_ap.first() else {
            return Err(RemError::InvalidParameter("need at least one access point".into()));
        };
        let n = first.basis.nrows();
        if per_ap.iter().any(|b| b.basis.nrows() != n) {
            return Err(RemError::DimensionMismatch("access point grids differ in size".into()));
        }
        let cols: usize = per_ap.iter().map(|b| b.basis.ncols()).sum();
        let mut stacked = DMatrix::zeros(n, cols);
        let mut c = 0;
        for b in &per_ap {
            stacked.columns_mut(c, b.basis.ncols()).copy_from(&b.basis);
            c += b.basis.ncols();
        }
        Ok(Self { per_ap, bandwidth, stacked })
    }

    pub fn num_vertices(&self) -> usize {
        self.stacked.nrows()
    }

    pub fn num_aps(&self) -> usize {
        self.per_ap.len()
    }

    pub fn num_columns(&self) -> usize {
        self.stacked.ncols()
    }

    /// Column range of access point `m` in the stacked dictionary.
    pub fn block(&self, m: usize) -> std::ops::Range<usize> {
        let start: usize = self.per_ap[..m].iter().map(|b| b.basis.ncols()).sum();
        start..start + self.per_ap[m].basis.ncols()
    }

    pub fn warnings(&self) -> Vec<String> {
        self.per_ap.iter().enumerate().filter_map(|(m, b)| b.warning.as_ref().map(|w| format!("ap {m}: {w}"))).collect()
    }
}

/// Builds one basis per prior field. All grids must share their positions.
pub fn build_dictionary(grids: &[FieldGrid], params: &SimilarityParams, k: usize) -> Result<RemDictionary, RemError> {
    if let Some(first) = grids.first() {
        if grids.iter().any(|g| g.positions != first.positions) {
            return Err(RemError::DimensionMismatch("access point grids must share positions".into()));
        }
    }
    let bases = grids.iter().map(|g| build_ap_basis(g, params, k)).collect::<Result<Vec<_>, _>>()?;
    RemDictionary::from_bases(bases, k)
}

/// Observed vertex indices, sorted and distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingMask {
    observed: Vec<usize>,
    n: usize,
}

impl SamplingMask {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self, RemError> {
        if let Some(&index) = indices.iter().find(|&&i| i >= n) {
            return Err(RemError::MaskOutOfRange { index, n });
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(Self { observed: indices, n })
    }

    pub fn full(n: usize) -> Self {
        Self { observed: (0..n).collect(), n }
    }

    /// `size` distinct vertices drawn uniformly.
    pub fn random<R: Rng + ?Sized>(n: usize, size: usize, rng: &mut R) -> Result<Self, RemError> {
        if size > n {
            return Err(RemError::InvalidParameter(format!("cannot observe {size} of {n} vertices")));
        }
        Self::new(sample(rng, n, size).into_vec(), n)
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    /// Diagonal 0/1 selector.
    pub fn selector(&self) -> DMatrix<f64> {
        let mut d = DVector::zeros(self.n);
        for &i in &self.observed {
            d[i] = 1.0;
        }
        DMatrix::from_diagonal(&d)
    }
}

/// Samples `x` on the mask with additive Gaussian noise; unobserved entries are zero.
pub fn sample_field<R: Rng + ?Sized>(x: &[f64], mask: &SamplingMask, noise_std: f64, rng: &mut R) -> Result<Vec<f64>, RemError> {
    if mask.is_empty() {
        return Err(RemError::EmptyMask);
    }
    if mask.n != x.len() {
        return Err(RemError::DimensionMismatch(format!("mask over {} vertices, signal has {}", mask.n, x.len())));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(RemError::InvalidParameter(format!("noise_std {noise_std}")));
    }
    let mut y = vec![0.0; x.len()];
    if noise_std == 0.0 {
        for &i in &mask.observed {
            y[i] = x[i];
        }
    } else {
        let normal = Normal::new(0.0, noise_std).map_err(|e| RemError::InvalidParameter(e.to_string()))?;
        for &i in &mask.observed {
            y[i] = x[i] + normal.sample(rng);
        }
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    /// Stacked coefficients `s`.
    pub coefficients: Vec<f64>,
    /// `U s` over every vertex.
    pub map: Vec<f64>,
}

/// Basis pursuit `min |s|₁` subject to `Σ U s = y` via `s = s⁺ - s⁻`.
/// With `noise_std > 0` the equalities become a band of `NOISE_BAND`
/// standard deviations around each observation.
pub fn recover_bp(y: &[f64], mask: &SamplingMask, dict: &RemDictionary, noise_std: f64) -> Result<Recovery, RemError> {
    let n = dict.num_vertices();
    if y.len() != n || mask.n != n {
        return Err(RemError::DimensionMismatch(format!(
            "{} observations and a mask over {} vertices for a dictionary over {n}",
            y.len(),
            mask.n
        )));
    }
    if mask.is_empty() {
        return Err(RemError::EmptyMask);
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(RemError::InvalidParameter(format!("noise_std {noise_std}")));
    }
    let p = dict.num_columns();
    let u = &dict.stacked;
    let mut lp = LinearProgram::new(2 * p);
    lp.objective = vec![1.0; 2 * p];
    for &i in &mask.observed {
        let coeffs: Vec<(usize, f64)> =
            (0..p).filter(|&j| u[(i, j)] != 0.0).flat_map(|j| [(j, u[(i, j)]), (p + j, -u[(i, j)])]).collect();
        if noise_std == 0.0 {
            lp.add(coeffs, Sense::Eq, y[i]);
        } else {
            let band = NOISE_BAND * noise_std;
            lp.add(coeffs.clone(), Sense::Le, y[i] + band);
            lp.add(coeffs, Sense::Ge, y[i] - band);
        }
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(RemError::Infeasible),
        other => return Err(RemError::Numerical(format!("basis pursuit ended {other:?}"))),
    }
    let coefficients: Vec<f64> = (0..p).map(|j| sol.x[j] - sol.x[p + j]).collect();
    let map = (u * DVector::from_column_slice(&coefficients)).as_slice().to_vec();
    Ok(Recovery { coefficients, map })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingCheck {
    pub recoverable: bool,
    /// Rank of the observed rows of the stacked dictionary.
    pub rank: usize,
    /// Rank of the full stacked dictionary.
    pub dictionary_rank: usize,
    pub columns: usize,
}

/// Numerical rank with singular values below `RANK_RTOL` of the largest dropped.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let top = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
    sv.iter().filter(|&&s| s > RANK_RTOL * top && s > 0.0).count()
}

/// Every map in the span of the dictionary is determined by its samples
/// exactly when the observed rows keep the full rank of the dictionary.
/// For a dictionary with independent columns this is `rank = M K`.
pub fn check_sampling(mask: &SamplingMask, dict: &RemDictionary) -> SamplingCheck {
    let u = &dict.stacked;
    let rows: Vec<_> = mask.observed.iter().filter(|&&i| i < u.nrows()).map(|&i| u.row(i).into_owned()).collect();
    let rank = if rows.is_empty() { 0 } else { numerical_rank(&DMatrix::from_rows(&rows)) };
    let dictionary_rank = numerical_rank(u);
    SamplingCheck { recoverable: rank == dictionary_rank, rank, dictionary_rank, columns: u.ncols() }
}

/// `|x_hat - x_true|² / |x_true|²`.
pub fn nmse(x_hat: &[f64], x_true: &[f64]) -> Result<f64, RemError> {
    if x_hat.len() != x_true.len() {
        return Err(RemError::DimensionMismatch(format!("{} vs {} entries", x_hat.len(), x_true.len())));
    }
    let den: f64 = x_true.iter().map(|x| x * x).sum();
    if den == 0.0 {
        return Err(RemError::ZeroSignal);
    }
    let num: f64 = x_hat.iter().zip(x_true).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(num / den)
}

/// Grid file: shared positions and one prior field per access point.
/// Access points are ordered by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub positions: Vec<Vec<f64>>,
    pub fields: BTreeMap<String, Vec<f64>>,
}

impl GridFile {
    pub fn from_grids(grids: &[FieldGrid]) -> Self {
        let positions = grids.first().map(|g| g.positions.clone()).unwrap_or_default();
        let width = grids.len().to_string().len();
        let fields = grids.iter().enumerate().map(|(m, g)| (format!("ap_{m:0width$}"), g.field.clone())).collect();
        Self { positions, fields }
    }

    pub fn grids(&self) -> Vec<FieldGrid> {
        self.fields.values().map(|f| FieldGrid { positions: self.positions.clone(), field: f.clone() }).collect()
    }

    pub fn from_json(text: &str) -> Result<Self, RemError> {
        serde_json::from_str(text).map_err(|e| RemError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("grid serializes")
    }
}

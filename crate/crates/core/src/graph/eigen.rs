//! Dense symmetric eigendecomposition by one-sided cyclic Jacobi rotations.
//!
//! The input is shifted by a Gershgorin bound so it is positive
//! semidefinite; rotations then orthogonalize the columns of the shifted
//! matrix and accumulate the eigenvectors. Every rotation reads and writes
//! contiguous columns only.

use nalgebra::{DMatrix, DVector};

use super::GraphError;

const MAX_SWEEPS: usize = 100;
const SYMMETRY_RTOL: f64 = 1e-12;
/// Entries below this magnitude (unit-norm eigenvectors) are skipped when
/// fixing the sign convention.
const SIGN_ENTRY_TOL: f64 = 1e-8;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct LaplacianSpectrum {
    pub eigenvalues: DVector<f64>,
    /// Column `k` is the unit eigenvector paired with `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
    /// Two eigenvalues closer than this are treated as tied.
    pub eigengap_floor: f64,
}

impl LaplacianSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvector(&self, k: usize) -> nalgebra::DVectorView<'_, f64> {
        self.eigenvectors.column(k)
    }

    /// Whether eigenvalue `k` is separated from both neighbours by more than the floor.
    pub fn is_simple(&self, k: usize) -> bool {
        let lam = &self.eigenvalues;
        let below = k == 0 || lam[k] - lam[k - 1] > self.eigengap_floor;
        let above = k + 1 >= lam.len() || lam[k + 1] - lam[k] > self.eigengap_floor;
        below && above
    }

    /// Whether a cut between indices `k - 1` and `k` separates distinct eigenvalues.
    pub fn has_gap_before(&self, k: usize) -> bool {
        k == 0 || k >= self.len() || self.eigenvalues[k] - self.eigenvalues[k - 1] > self.eigengap_floor
    }

    /// Number of eigenvalues within the floor of zero.
    pub fn zero_multiplicity(&self) -> usize {
        self.eigenvalues.iter().filter(|l| l.abs() <= self.eigengap_floor).count()
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// Eigenvectors are normalized so the first entry with magnitude above
/// `1e-8` is positive.
pub fn eigendecompose(l: &DMatrix<f64>) -> Result<LaplacianSpectrum, GraphError> {
    let n = l.nrows();
    if l.ncols() != n {
        return Err(GraphError::NotSquare(n, l.ncols()));
    }
    let scale = l.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (l[(i, j)] - l[(j, i)]).abs();
            if diff > SYMMETRY_RTOL * scale.max(1.0) {
                return Err(GraphError::NotSymmetric { i, j, diff });
            }
        }
    }

    // Column-major copies: `g` converges to (L + shift I) V, `v` to V.
    let shift = (0..n).map(|i| (0..n).map(|j| l[(i, j)].abs()).sum::<f64>()).fold(0.0_f64, f64::max);
    let mut g: Vec<f64> = l.as_slice().to_vec();
    for i in 0..n {
        g[i * n + i] += shift;
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let tol = f64::EPSILON * (n as f64).max(1.0);

    let mut sweeps = 0;
    loop {
        let mut worst = 0.0_f64;
        // squared column norms, refreshed each sweep and updated per rotation
        let mut norms: Vec<f64> = g.chunks_exact(n.max(1)).map(|c| dot(c, c)).collect();
        for p in 0..n {
            for q in (p + 1)..n {
                worst = worst.max(rotate(&mut g, &mut v, &mut norms, n, (p, q), tol));
            }
        }
        sweeps += 1;
        if worst <= tol {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(GraphError::NoConvergence { sweeps, off: worst });
        }
    }

    // Rayleigh quotients of the converged columns.
    let values: Vec<f64> = (0..n).map(|k| dot(&v[k * n..(k + 1) * n], &g[k * n..(k + 1) * n]) - shift).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| values[x].total_cmp(&values[y]).then(x.cmp(&y)));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| values[k]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let column = &v[k * n..(k + 1) * n];
        let flip = column.iter().find(|x| x.abs() > SIGN_ENTRY_TOL).is_some_and(|&x| x < 0.0);
        let sign = if flip { -1.0 } else { 1.0 };
        for (r, &x) in column.iter().enumerate() {
            eigenvectors[(r, col)] = sign * x;
        }
    }
    let lam_max = eigenvalues.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Ok(LaplacianSpectrum { eigenvalues, eigenvectors, eigengap_floor: 1e-9 * lam_max.max(1.0) })
}

/// Dot product with independent partial sums so the loop vectorizes.
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (xc, yc) = (x.chunks_exact(4), y.chunks_exact(4));
    let tail: f64 = xc.remainder().iter().zip(yc.remainder()).map(|(a, b)| a * b).sum();
    for (a, b) in xc.zip(yc) {
        for i in 0..4 {
            acc[i] += a[i] * b[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn rotate_pair(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Orthogonalizes columns `p < q` of `g` and applies the same rotation to
/// `v`. Returns the cosine between the columns before the rotation.
fn rotate(g: &mut [f64], v: &mut [f64], norms: &mut [f64], n: usize, (p, q): (usize, usize), tol: f64) -> f64 {
    let (head, tail) = g.split_at_mut(q * n);
    let gp = &mut head[p * n..(p + 1) * n];
    let gq = &mut tail[..n];
    let (alpha, beta) = (norms[p], norms[q]);
    let gamma = dot(gp, gq);
    if alpha == 0.0 || beta == 0.0 {
        return 0.0;
    }
    let cosine = gamma.abs() / (alpha * beta).sqrt();
    if cosine <= tol {
        return cosine;
    }
    let zeta = (beta - alpha) / (2.0 * gamma);
    let t = zeta.signum() / (zeta.abs() + (zeta * zeta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    rotate_pair(gp, gq, c, s);
    norms[p] = alpha - t * gamma;
    norms[q] = beta + t * gamma;
    let (head, tail) = v.split_at_mut(q * n);
    rotate_pair(&mut head[p * n..(p + 1) * n], &mut tail[..n], c, s);
    cosine
}

/// Second-smallest eigenvalue (algebraic connectivity).
pub fn algebraic_connectivity(spec: &LaplacianSpectrum) -> Result<f64, GraphError> {
    if spec.len() < 2 {
        return Err(GraphError::TooFewVertices { need: 2, got: spec.len() });
    }
    let l2 = spec.eigenvalues[1];
    Ok(if l2.abs() <= spec.eigengap_floor { 0.0 } else { l2 })
}

//! Kernel evaluation and the small dense linear algebra behind the Nyström map.
//!
//! Everything here is a pure function of its inputs. Matrices are
//! `nalgebra::DMatrix<f64>`; rows of a data matrix are samples.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Default number of power iterations for the warm-started refresh.
pub const DEFAULT_POWER_ITERS: usize = 3;

/// Default relative cutoff for the pseudo-inverse square root.
pub const DEFAULT_PINV_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Gaussian,
}

/// Gaussian kernel `exp(-gamma * ||x - z||^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub gamma: f64,
}

impl KernelConfig {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { kind: KernelKind::Gaussian, gamma })
    }

    #[inline]
    pub fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Gaussian => (-self.gamma * squared_distance(x, z)).exp(),
        }
    }

    /// Kernel value between a slice and a (possibly strided) matrix row.
    #[inline]
    pub(crate) fn eval_row<'a>(&self, x: &[f64], row: impl Iterator<Item = &'a f64>) -> f64 {
        let mut acc = 0.0;
        for (a, b) in x.iter().zip(row) {
            let d = a - b;
            acc += d * d;
        }
        (-self.gamma * acc).exp()
    }
}

#[inline]
pub fn squared_distance(x: &[f64], z: &[f64]) -> f64 {
    x.iter()
        .zip(z)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

pub fn gaussian_kernel(x: &[f64], z: &[f64], cfg: &KernelConfig) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::invalid(format!(
            "kernel arguments differ in dimension: {} vs {}",
            x.len(),
            z.len()
        )));
    }
    Ok(cfg.eval(x, z))
}

/// Cross-kernel matrix between the rows of `a` (n×d) and the rows of `b` (m×d).
pub fn kernel_cross(a: &DenseMatrix, b: &DenseMatrix, cfg: &KernelConfig) -> Result<DenseMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::invalid(format!(
            "kernel_cross column mismatch: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    // Row-contiguous copies keep the inner distance loop unit-stride.
    let a_rows = rows_of(a);
    let b_rows = rows_of(b);
    Ok(DenseMatrix::from_fn(a.nrows(), b.nrows(), |i, j| cfg.eval(&a_rows[i], &b_rows[j])))
}

pub(crate) fn rows_of(a: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()
}

/// Truncated symmetric eigendecomposition `E ≈ U diag(values) Uᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigPair {
    /// m×r, orthonormal columns.
    pub vectors: DenseMatrix,
    /// r values, non-increasing, clipped at zero.
    pub values: DVector<f64>,
}

impl EigPair {
    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let scaled = &self.vectors * DenseMatrix::from_diagonal(&self.values);
        scaled * self.vectors.transpose()
    }

    /// `(U S Uᵀ + a bᵀ + b aᵀ) q` without forming the m×m operator.
    fn apply_updated(&self, a: &DVector<f64>, b: &DVector<f64>, q: &DenseMatrix) -> DenseMatrix {
        let mut proj = self.vectors.tr_mul(q);
        for (i, mut row) in proj.row_iter_mut().enumerate() {
            row *= self.values[i];
        }
        let mut out = &self.vectors * proj;
        let bt_q = b.tr_mul(q);
        let at_q = a.tr_mul(q);
        out += a * bt_q;
        out += b * at_q;
        out
    }
}

fn check_symmetric(e: &DenseMatrix) -> Result<()> {
    if !e.is_square() {
        return Err(Error::invalid(format!("matrix is {}x{}, not square", e.nrows(), e.ncols())));
    }
    let scale = e.amax().max(1.0);
    for i in 0..e.nrows() {
        for j in (i + 1)..e.ncols() {
            if (e[(i, j)] - e[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::invalid(format!("matrix not symmetric at ({i},{j})")));
            }
            if !e[(i, j)].is_finite() {
                return Err(Error::invalid("matrix has non-finite entries"));
            }
        }
    }
    Ok(())
}

/// Flip each column so its largest-magnitude entry is positive. Makes the
/// factors a deterministic function of the input despite eigensolver sign freedom.
pub(crate) fn canonicalize_signs(v: &mut DenseMatrix) {
    for mut col in v.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &x in col.iter() {
            if x.abs() > best {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

/// Sort eigenpairs of a symmetric matrix descending and keep the top `r`.
fn top_r(eig: SymmetricEigen<f64, nalgebra::Dyn>, basis: Option<&DenseMatrix>, r: usize) -> EigPair {
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    order.truncate(r);
    let n = eig.eigenvectors.nrows();
    let small = DenseMatrix::from_fn(n, r, |i, k| eig.eigenvectors[(i, order[k])]);
    let mut vectors = match basis {
        Some(q) => q * small,
        None => small,
    };
    canonicalize_signs(&mut vectors);
    let values = DVector::from_iterator(r, order.iter().map(|&i| eig.eigenvalues[i].max(0.0)));
    EigPair { vectors, values }
}

/// Rank-`r` eigendecomposition of a symmetric PSD matrix, computed from scratch.
pub fn truncated_eig(e: &DenseMatrix, r: usize) -> Result<EigPair> {
    check_symmetric(e)?;
    let m = e.nrows();
    if r == 0 || r > m {
        return Err(Error::invalid(format!("rank {r} outside 1..={m}")));
    }
    let sym = (e + e.transpose()) * 0.5;
    Ok(top_r(SymmetricEigen::new(sym), None, r))
}

fn orthonormalize(q: DenseMatrix) -> DenseMatrix {
    q.qr().q()
}

/// Refresh the eigendecomposition after a rank-2 change `a bᵀ + b aᵀ`.
///
/// The operator `U S Uᵀ + a bᵀ + b aᵀ` is only ever applied in factored form.
/// The start block is the previous eigenvectors augmented with `a` and `b`,
/// whose span contains the operator's range; `p` power iterations with
/// re-orthonormalization follow, then a Rayleigh–Ritz projection.
pub fn warmstart_randomized_eig(
    prev: &EigPair,
    a: &[f64],
    b: &[f64],
    p: usize,
    r: usize,
) -> Result<EigPair> {
    let m = prev.dim();
    if r == 0 || r > m {
        return Err(Error::invalid(format!("rank {r} outside 1..={m}")));
    }
    if a.len() != m || b.len() != m {
        return Err(Error::invalid(format!(
            "update vectors must have length {m}, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("update vectors contain non-finite entries"));
    }
    let a = DVector::from_column_slice(a);
    let b = DVector::from_column_slice(b);
    let active = a.norm() > 0.0 && b.norm() > 0.0;

    let extra = if active { 2 } else { 0 };
    let width = (prev.rank() + extra).max(r).min(m);
    let mut start = DenseMatrix::zeros(m, width);
    let mut col = 0;
    for k in 0..prev.rank().min(width) {
        start.set_column(col, &prev.vectors.column(k));
        col += 1;
    }
    if active {
        for v in [&a, &b] {
            if col < width {
                start.set_column(col, v);
                col += 1;
            }
        }
    }
    // Only reachable when r exceeds the previous rank; fill deterministically.
    let mut basis_idx = 0;
    while col < width {
        start[(basis_idx % m, col)] = 1.0;
        basis_idx += 1;
        col += 1;
    }

    let mut q = orthonormalize(start);
    for _ in 0..p {
        q = orthonormalize(prev.apply_updated(&a, &b, &q));
    }
    let projected = q.tr_mul(&prev.apply_updated(&a, &b, &q));
    let projected = (&projected + projected.transpose()) * 0.5;
    Ok(top_r(SymmetricEigen::new(projected), Some(&q), r))
}

/// Diagonal of the pseudo-inverse square root: `1/sqrt(v)` above `rel_tol * max(v)`, else 0.
pub fn pinv_sqrt(values: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let max = values.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Err(Error::DegenerateSpectrum("no positive eigenvalues".into()));
    }
    let cutoff = rel_tol * max;
    Ok(values
        .iter()
        .map(|&v| if v > cutoff { 1.0 / v.sqrt() } else { 0.0 })
        .collect())
}

/// Ridge least squares `argmin ||Φ w - z||² + θ ||w||²` via the r×r normal equations.
pub fn solve_ridge(phi: &DenseMatrix, z: &DVector<f64>, theta: f64) -> Result<DVector<f64>> {
    if phi.nrows() != z.len() {
        return Err(Error::invalid(format!(
            "design has {} rows but target has {}",
            phi.nrows(),
            z.len()
        )));
    }
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::invalid(format!("theta must be non-negative, got {theta}")));
    }
    let r = phi.ncols();
    let mut gram = phi.tr_mul(phi);
    for i in 0..r {
        gram[(i, i)] += theta;
    }
    let rhs = phi.tr_mul(z);
    let max_diag = (0..r).map(|i| gram[(i, i)]).fold(0.0f64, f64::max);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("normal equations are not positive definite".into()))?;
    let l = chol.l_dirty();
    let floor = max_diag * f64::EPSILON * r as f64;
    if (0..r).any(|i| l[(i, i)] * l[(i, i)] <= floor) {
        return Err(Error::Singular("normal equations are numerically rank deficient".into()));
    }
    Ok(chol.solve(&rhs))
}

//! Christoffel-Darboux kernel and Christoffel function of a (possibly
//! singular) moment matrix.
//!
//! With `M = Σ λ_j u_j u_jᵀ` and `r` retained eigenpairs,
//! `κ(x, y) = Σ_{j<r} (u_jᵀ v(x)) (u_jᵀ v(y)) / λ_j` and
//! `Λ(x) = 1 / κ(x, x)` whenever `v(x)` has no component in the numerical
//! kernel of `M`; otherwise the variational value is `0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{spectral, spectral_of_matrix, MomentMatrix, PointCloud, SpectralData, Threshold};
use crate::par::{self, Execution, BLOCK_ROWS};
use crate::polybasis::GradedBasis;

/// Default tolerance on the normalized kernel residual that decides whether
/// a point is on the support.
pub const DEFAULT_KERNEL_TOL: f64 = 1e-6;

/// Christoffel function at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaValue {
    /// Variational value: `1/κ(x,x)` on the support, `0` off it.
    pub value: f64,
    /// `1/κ(x,x)` from the pseudo-inverse regardless of the case split.
    pub pinv_value: f64,
    /// `‖P_ker v(x)‖ / ‖v(x)‖`.
    pub kernel_residual: f64,
}

impl LambdaValue {
    pub fn on_support(&self, kernel_tol: f64) -> bool {
        self.kernel_residual <= kernel_tol
    }
}

/// Immutable evaluator built from a spectral decomposition.
#[derive(Debug, Clone)]
pub struct ChristoffelEvaluator {
    basis: GradedBasis,
    spectral: SpectralData,
    pinv_eigenvalues: Vec<f64>,
    /// Retained eigenvectors scaled by `1/√λ_j` (`s × r`).
    whitened: DMatrix<f64>,
    /// Kernel eigenvectors (`s × (s − r)`).
    kernel: DMatrix<f64>,
    kernel_tol: f64,
}

impl ChristoffelEvaluator {
    pub fn new(basis: GradedBasis, spectral: SpectralData) -> Result<Self> {
        Self::with_kernel_tol(basis, spectral, DEFAULT_KERNEL_TOL)
    }

    pub fn with_kernel_tol(basis: GradedBasis, spectral: SpectralData, kernel_tol: f64) -> Result<Self> {
        if spectral.size() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                actual: spectral.size(),
            });
        }
        if !(kernel_tol >= 0.0) {
            return Err(Error::invalid("kernel tolerance must be non-negative"));
        }
        let s = basis.len();
        let r = spectral.numerical_rank;
        let pinv_eigenvalues: Vec<f64> = spectral
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(j, &l)| if j < r { 1.0 / l } else { 0.0 })
            .collect();
        let whitened = DMatrix::from_fn(s, r, |i, j| spectral.eigenvectors[(i, j)] * pinv_eigenvalues[j].sqrt());
        let kernel = spectral.eigenvectors.columns(r, s - r).into_owned();
        Ok(Self {
            basis,
            spectral,
            pinv_eigenvalues,
            whitened,
            kernel,
            kernel_tol,
        })
    }

    /// Evaluator for a moment matrix through its eigendecomposition.
    pub fn from_moments(m: &MomentMatrix, threshold: Threshold) -> Result<Self> {
        Self::new(m.basis().clone(), spectral(m, threshold)?)
    }

    pub fn basis(&self) -> &GradedBasis {
        &self.basis
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    pub fn pinv_eigenvalues(&self) -> &[f64] {
        &self.pinv_eigenvalues
    }

    pub fn kernel_tol(&self) -> f64 {
        self.kernel_tol
    }

    pub fn rank(&self) -> usize {
        self.spectral.numerical_rank
    }

    /// `κ(x, y) = v(x)ᵀ M† v(y)`.
    pub fn cd_kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let vx = self.basis.eval(x)?;
        let vy = self.basis.eval(y)?;
        let u = &self.spectral.eigenvectors;
        let mut acc = 0.0;
        for j in 0..self.rank() {
            let col = u.column(j);
            let a: f64 = col.iter().zip(&vx).map(|(c, v)| c * v).sum();
            let b: f64 = col.iter().zip(&vy).map(|(c, v)| c * v).sum();
            acc += a * b * self.pinv_eigenvalues[j];
        }
        Ok(acc)
    }

    /// Christoffel function at `x`, with the kernel-residual case split.
    pub fn lambda(&self, x: &[f64]) -> Result<LambdaValue> {
        let v = DVector::from_vec(self.basis.eval(x)?);
        Ok(self.lambda_of_vector(&v))
    }

    /// Same as [`Self::lambda`] for a precomputed basis vector.
    pub fn lambda_of_vector(&self, v: &DVector<f64>) -> LambdaValue {
        let kappa = self.whitened.tr_mul(v).norm_squared();
        let norm = v.norm();
        let kernel_residual = if self.kernel.ncols() == 0 || norm == 0.0 {
            0.0
        } else {
            (self.kernel.tr_mul(v).norm() / norm).min(1.0)
        };
        let pinv_value = if kappa > 0.0 { 1.0 / kappa } else { 0.0 };
        let value = if kernel_residual <= self.kernel_tol { pinv_value } else { 0.0 };
        LambdaValue {
            value,
            pinv_value,
            kernel_residual,
        }
    }

    /// [`Self::lambda`] at every point of a cloud.
    pub fn lambda_many(&self, points: &PointCloud, exec: Execution) -> Result<Vec<LambdaValue>> {
        if points.dim() != self.basis.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.ambient_dim(),
                actual: points.dim(),
            });
        }
        Ok(par::map_indexed(exec, points.len(), |i| {
            self.lambda(points.point(i)).expect("dimension checked")
        }))
    }

    /// `κ(x_i, x_i)` for every point, in blocks of whitened matrix products.
    pub fn kernel_diagonal(&self, points: &PointCloud, exec: Execution) -> Result<Vec<f64>> {
        if points.dim() != self.basis.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.ambient_dim(),
                actual: points.dim(),
            });
        }
        let s = self.basis.len();
        let blocks = par::blocks(points.len(), BLOCK_ROWS);
        let parts = par::map_indexed(exec, blocks.len(), |b| {
            let (lo, hi) = blocks[b];
            let mut buf = vec![0.0; (hi - lo) * s];
            for (row, i) in buf.chunks_exact_mut(s).zip(lo..hi) {
                self.basis.eval_into(points.point(i), row).expect("dimension checked");
            }
            let x = DMatrix::from_row_slice(hi - lo, s, &buf);
            let w = x * &self.whitened;
            w.row_iter().map(|r| r.norm_squared()).collect::<Vec<_>>()
        });
        Ok(parts.concat())
    }

    /// Eigen-polynomial `P_j(x) = u_jᵀ v(x) / √λ_j`, orthonormal under the
    /// measure whose moments built this evaluator.
    pub fn orthonormal_polynomial(&self, j: usize, x: &[f64]) -> Result<f64> {
        if j >= self.rank() {
            return Err(Error::invalid(format!("eigen-polynomial {j} is not retained")));
        }
        let v = self.basis.eval(x)?;
        Ok(self.whitened.column(j).iter().zip(&v).map(|(c, b)| c * b).sum())
    }
}

/// Ridge-continuation evaluation of `min pᵀMp s.t. pᵀv = 1`, used as an
/// independent check of the pseudo-inverse formula.
///
/// For `l_k = 10^-k`, `k = 1..8`, the regularized problem has the closed
/// solution `1 / vᵀ(M + l I)⁻¹v`; the value is linear in `l` near `0` in
/// both branches, so consecutive pairs are extrapolated to `l = 0`.
pub fn lambda_variational_oracle(m: &DMatrix<f64>, v: &DVector<f64>) -> Result<f64> {
    let s = m.nrows();
    if s > 200 {
        return Err(Error::invalid("variational oracle limited to size 200"));
    }
    if v.len() != s {
        return Err(Error::DimensionMismatch {
            expected: s,
            actual: v.len(),
        });
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let ridge: Vec<f64> = (1..=8).map(|k| scale * 10f64.powi(-k)).collect();
    let mut values = Vec::with_capacity(ridge.len());
    for &l in &ridge {
        let reg = m + DMatrix::identity(s, s) * l;
        let chol = reg.cholesky().ok_or(Error::NotPsd { min_eigenvalue: f64::NAN })?;
        let q = v.dot(&chol.solve(v));
        values.push(1.0 / q);
    }
    let extrapolate = |k: usize| (ridge[k] * values[k + 1] - ridge[k + 1] * values[k]) / (ridge[k] - ridge[k + 1]);
    let a = extrapolate(ridge.len() - 3);
    let b = extrapolate(ridge.len() - 2);
    if (a - b).abs() > 1e-7 * b.abs().max(1.0) {
        return Err(Error::RidgeNonConvergence { a, b });
    }
    Ok(b.max(0.0))
}

/// Christoffel function of `M + l·A` at `x` via the pseudo-inverse.
pub fn perturbed_lambda(m: &MomentMatrix, a: &DMatrix<f64>, l: f64, x: &[f64], threshold: Threshold) -> Result<LambdaValue> {
    if !(l >= 0.0) {
        return Err(Error::invalid("perturbation weight must be non-negative"));
    }
    check_psd(a)?;
    let perturbed = m.perturbed(a, l)?;
    ChristoffelEvaluator::from_moments(&perturbed, threshold)?.lambda(x)
}

fn check_psd(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::invalid("perturbation matrix must be square"));
    }
    if (a - a.transpose()).amax() > 1e-12 * a.amax().max(1.0) {
        return Err(Error::invalid("perturbation matrix must be symmetric"));
    }
    let sp = spectral_of_matrix(a, Threshold::default())?;
    let min = sp.eigenvalues.last().copied().unwrap_or(0.0);
    if min < -1e-10 * sp.largest().max(0.0) {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(())
}

/// Sides of `max_i P(x_i)² ≤ max_i κ(x_i,x_i) · mean_i P(x_i)²` for a
/// polynomial given by its coefficients in the evaluator's basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupNormCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl SupNormCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-9) + f64::EPSILON
    }
}

pub fn supnorm_bound_check(ev: &ChristoffelEvaluator, cloud: &PointCloud, coeffs: &[f64]) -> Result<SupNormCheck> {
    if coeffs.len() != ev.basis().len() {
        return Err(Error::DimensionMismatch {
            expected: ev.basis().len(),
            actual: coeffs.len(),
        });
    }
    let kappa = ev.kernel_diagonal(cloud, Execution::default())?;
    let mut lhs: f64 = 0.0;
    let mut mean = 0.0;
    for x in cloud.points() {
        let v = ev.basis().eval(x)?;
        let p: f64 = v.iter().zip(coeffs).map(|(a, b)| a * b).sum();
        lhs = lhs.max(p * p);
        mean += p * p;
    }
    mean /= cloud.len() as f64;
    let rhs = kappa.iter().copied().fold(0.0, f64::max) * mean;
    Ok(SupNormCheck { lhs, rhs })
}

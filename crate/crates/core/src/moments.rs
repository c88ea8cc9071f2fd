//! Design matrices, empirical moment matrices and their spectra.
//!
//! Two spectral routes are available:
//!
//! * [`spectral`] diagonalizes the moment matrix `M = XᵀX / n` directly;
//! * [`DesignFactor`] computes a Householder QR of the design matrix `X`
//!   block by block (a TSQR tree), then takes the SVD of the small
//!   triangular factor. Singular values of `X / √n` are the square roots of
//!   the eigenvalues of `M` but are resolved about eight orders of magnitude
//!   further down, which matters for thresholds near `1e-10`.
//!
//! Both routes produce a [`SpectralData`] whose eigenvalues live on the
//! moment-matrix scale.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution, BLOCK_ROWS};
use crate::polybasis::{GradedBasis, ScaleBox};

// Looser tolerances let the bidiagonal SVD deflate early and return
// inaccurate singular vectors on rank-deficient inputs.
const EIGEN_EPS: f64 = f64::EPSILON;
const MAX_ITER: usize = 1_000_000;

/// `n` points in `R^p`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: Vec<f64>,
    n: usize,
    p: usize,
}

impl PointCloud {
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("point cloud must contain at least one point"));
        }
        if p == 0 {
            return Err(Error::invalid("ambient dimension must be positive"));
        }
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                actual: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: k / p,
                col: k % p,
            });
        }
        Ok(Self { data, n, p })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::invalid(format!(
                "row {i} has {} coordinates, expected {p}",
                r.len()
            )));
        }
        Self::new(rows.len(), p, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows `idx` as a new cloud.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            data.extend_from_slice(self.point(i));
        }
        Self::new(idx.len(), self.p, data)
    }

    /// Bounding box padded by 1% of the width on each side.
    pub fn default_scale_box(&self) -> ScaleBox {
        ScaleBox::bounding(self.p, self.points(), 0.01)
    }

    /// Applies `f` to every point.
    pub fn map_points(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut data = Vec::with_capacity(self.data.len());
        let mut q = None;
        for x in self.points() {
            let y = f(x);
            q.get_or_insert(y.len());
            data.extend(y);
        }
        Self::new(self.n, q.unwrap_or(0), data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `(1/n) XᵀX`: moments of the empirical probability measure.
    #[default]
    MeanOverN,
    /// `XᵀX`.
    Sum,
}

impl Normalization {
    fn factor(self, n: usize) -> f64 {
        match self {
            Normalization::MeanOverN => 1.0 / n as f64,
            Normalization::Sum => 1.0,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Normalization::MeanOverN => 0,
            Normalization::Sum => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Normalization::MeanOverN),
            1 => Some(Normalization::Sum),
            _ => None,
        }
    }
}

/// Symmetric PSD Gram matrix of a basis under the empirical measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    entries: DMatrix<f64>,
    basis: GradedBasis,
    sample_count: usize,
    normalization: Normalization,
}

impl MomentMatrix {
    /// Wraps an existing symmetric matrix (e.g. read from the cache or built
    /// by hand in tests). The matrix is symmetrized.
    pub fn from_entries(
        entries: DMatrix<f64>,
        basis: GradedBasis,
        sample_count: usize,
        normalization: Normalization,
    ) -> Result<Self> {
        if entries.nrows() != basis.len() || entries.ncols() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                actual: entries.nrows().max(entries.ncols()),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("moment matrix has non-finite entries"));
        }
        Ok(Self {
            entries: symmetrize(entries),
            basis,
            sample_count,
            normalization,
        })
    }

    /// Moment matrix of a design matrix `X` (`n × s(d)`).
    pub fn from_design(
        design: &DMatrix<f64>,
        basis: &GradedBasis,
        normalization: Normalization,
    ) -> Result<Self> {
        if design.nrows() == 0 {
            return Err(Error::invalid("design matrix has no rows"));
        }
        if design.ncols() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                actual: design.ncols(),
            });
        }
        let gram = design.tr_mul(design) * normalization.factor(design.nrows());
        Ok(Self {
            entries: symmetrize(gram),
            basis: basis.clone(),
            sample_count: design.nrows(),
            normalization,
        })
    }

    /// Accumulates `XᵀX` block by block without materializing `X`.
    pub fn from_cloud(
        cloud: &PointCloud,
        basis: &GradedBasis,
        normalization: Normalization,
        exec: Execution,
    ) -> Result<Self> {
        check_dim(cloud, basis)?;
        let blocks = par::blocks(cloud.len(), BLOCK_ROWS);
        let partial = par::map_indexed(exec, blocks.len(), |b| {
            let (lo, hi) = blocks[b];
            let x = design_rows(cloud, basis, lo, hi);
            x.tr_mul(&x)
        });
        let s = basis.len();
        let mut gram = DMatrix::zeros(s, s);
        for g in partial {
            gram += g;
        }
        gram *= normalization.factor(cloud.len());
        Ok(Self {
            entries: symmetrize(gram),
            basis: basis.clone(),
            sample_count: cloud.len(),
            normalization,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn basis(&self) -> &GradedBasis {
        &self.basis
    }

    pub fn degree(&self) -> usize {
        self.basis.max_degree()
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// `self + l·A` with the same basis and provenance.
    pub fn perturbed(&self, a: &DMatrix<f64>, l: f64) -> Result<Self> {
        if a.shape() != self.entries.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.size(),
                actual: a.nrows(),
            });
        }
        Self::from_entries(
            &self.entries + a * l,
            self.basis.clone(),
            self.sample_count,
            self.normalization,
        )
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

fn check_dim(cloud: &PointCloud, basis: &GradedBasis) -> Result<()> {
    if cloud.dim() != basis.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.ambient_dim(),
            actual: cloud.dim(),
        });
    }
    Ok(())
}

/// Rows `lo..hi` of the design matrix.
fn design_rows(cloud: &PointCloud, basis: &GradedBasis, lo: usize, hi: usize) -> DMatrix<f64> {
    let s = basis.len();
    let mut buf = vec![0.0; (hi - lo) * s];
    for (row, i) in buf.chunks_exact_mut(s).zip(lo..hi) {
        basis
            .eval_into(cloud.point(i), row)
            .expect("dimension checked by caller");
    }
    DMatrix::from_row_slice(hi - lo, s, &buf)
}

/// `n × s(d)` matrix whose row `i` is `v_d(x_i)`.
pub fn design_matrix(cloud: &PointCloud, basis: &GradedBasis, exec: Execution) -> Result<DMatrix<f64>> {
    check_dim(cloud, basis)?;
    let s = basis.len();
    let blocks = par::blocks(cloud.len(), BLOCK_ROWS);
    let parts = par::map_indexed(exec, blocks.len(), |b| {
        let (lo, hi) = blocks[b];
        let mut buf = vec![0.0; (hi - lo) * s];
        for (row, i) in buf.chunks_exact_mut(s).zip(lo..hi) {
            basis.eval_into(cloud.point(i), row).expect("dimension checked");
        }
        buf
    });
    Ok(DMatrix::from_row_slice(cloud.len(), s, &parts.concat()))
}

/// `MeanOverN` or `Sum` moment matrix of a design matrix.
pub fn moment_matrix(
    design: &DMatrix<f64>,
    basis: &GradedBasis,
    normalization: Normalization,
) -> Result<MomentMatrix> {
    MomentMatrix::from_design(design, basis, normalization)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Absolute,
    #[default]
    RelativeToLargest,
}

/// Rank threshold. On the eigen route it applies to eigenvalues of `M`; on
/// the design route to singular values of `X/√n` (or `X` for `Sum`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    pub mode: ThresholdMode,
}

impl Threshold {
    pub fn relative(value: f64) -> Self {
        Self {
            value,
            mode: ThresholdMode::RelativeToLargest,
        }
    }

    pub fn absolute(value: f64) -> Self {
        Self {
            value,
            mode: ThresholdMode::Absolute,
        }
    }

    fn effective(&self, largest: f64) -> f64 {
        match self.mode {
            ThresholdMode::Absolute => self.value,
            ThresholdMode::RelativeToLargest => self.value * largest.max(0.0),
        }
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Self::relative(1e-10)
    }
}

/// Which factorization produced a [`SpectralData`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralRoute {
    MomentEigen,
    #[default]
    DesignSvd,
}

/// Eigendecomposition of a moment matrix with its numerical rank.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    /// Non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal; column `j` pairs with `eigenvalues[j]`.
    pub eigenvectors: DMatrix<f64>,
    pub numerical_rank: usize,
    /// Effective threshold on the eigenvalue scale.
    pub threshold_used: f64,
    pub threshold: Threshold,
    pub route: SpectralRoute,
}

impl SpectralData {
    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// Smallest retained eigenvalue relative to the largest.
    pub fn retained_condition(&self) -> f64 {
        match self.numerical_rank {
            0 => 0.0,
            r => self.eigenvalues[r - 1] / self.largest(),
        }
    }

    /// Coefficient vectors of polynomials numerically vanishing on the support.
    pub fn kernel_basis(&self) -> Vec<DVector<f64>> {
        (self.numerical_rank..self.size())
            .map(|j| self.eigenvectors.column(j).into_owned())
            .collect()
    }

    /// Pseudo-inverse `M† = Σ u_j u_jᵀ / λ_j` over retained pairs.
    pub fn pseudo_inverse(&self) -> DMatrix<f64> {
        let r = self.numerical_rank;
        let u = self.eigenvectors.columns(0, r);
        let scaled = DMatrix::from_fn(u.nrows(), r, |i, j| u[(i, j)] / self.eigenvalues[j]);
        scaled * u.transpose()
    }

    fn from_sorted_pairs(mut pairs: Vec<(f64, DVector<f64>)>, s: usize, threshold_used: f64, threshold: Threshold, route: SpectralRoute) -> Self {
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let eigenvalues: Vec<f64> = pairs.iter().map(|(v, _)| *v).collect();
        let mut eigenvectors = DMatrix::zeros(s, s);
        for (j, (_, v)) in pairs.iter().enumerate() {
            eigenvectors.set_column(j, v);
        }
        let numerical_rank = eigenvalues.iter().filter(|&&v| v > threshold_used).count();
        Self {
            eigenvalues,
            eigenvectors,
            numerical_rank,
            threshold_used,
            threshold,
            route,
        }
    }
}

/// Full symmetric eigendecomposition of `M` with rank thresholding on its
/// eigenvalues.
pub fn spectral(m: &MomentMatrix, threshold: Threshold) -> Result<SpectralData> {
    spectral_of_matrix(m.entries(), threshold)
}

pub(crate) fn spectral_of_matrix(m: &DMatrix<f64>, threshold: Threshold) -> Result<SpectralData> {
    let s = m.nrows();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, MAX_ITER)
        .ok_or(Error::EigenSolver { dim: s })?;
    let pairs: Vec<(f64, DVector<f64>)> = (0..s)
        .map(|j| (eig.eigenvalues[j], eig.eigenvectors.column(j).into_owned()))
        .collect();
    let largest = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let used = threshold.effective(if s == 0 { 0.0 } else { largest });
    Ok(SpectralData::from_sorted_pairs(pairs, s, used, threshold, SpectralRoute::MomentEigen))
}

/// Triangular factor `R` of the design matrix (`X = QR`), computed once at the
/// highest degree; lower degrees reuse its leading block.
#[derive(Debug, Clone)]
pub struct DesignFactor {
    r: DMatrix<f64>,
    basis: GradedBasis,
    sample_count: usize,
}

impl DesignFactor {
    pub fn new(cloud: &PointCloud, basis: &GradedBasis, exec: Execution) -> Result<Self> {
        check_dim(cloud, basis)?;
        let blocks = par::blocks(cloud.len(), BLOCK_ROWS);
        let leaves = par::map_indexed(exec, blocks.len(), |b| {
            let (lo, hi) = blocks[b];
            r_factor(design_rows(cloud, basis, lo, hi))
        });
        let r = reduce_tree(exec, leaves);
        Ok(Self {
            r,
            basis: basis.clone(),
            sample_count: cloud.len(),
        })
    }

    pub fn basis(&self) -> &GradedBasis {
        &self.basis
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    /// `R` (at most `s × s`, upper trapezoidal).
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Leading `s(d) × s(d)` block of `R`, zero-padded when `n < s(d)`.
    fn leading_block(&self, d: usize) -> DMatrix<f64> {
        let s = self.basis.truncate(d).len();
        let rows = self.r.nrows().min(s);
        let mut out = DMatrix::zeros(s, s);
        out.view_mut((0, 0), (rows, s))
            .copy_from(&self.r.view((0, 0), (rows, s)));
        out
    }

    /// Moment matrix `RᵀR` at degree `d`, with the given normalization.
    pub fn moment_matrix(&self, d: usize, normalization: Normalization) -> Result<MomentMatrix> {
        let r = self.leading_block(d);
        MomentMatrix::from_entries(
            r.tr_mul(&r) * normalization.factor(self.sample_count),
            self.basis.truncate(d),
            self.sample_count,
            normalization,
        )
    }

    /// SVD of the leading block, thresholded on singular values of `X/√n`
    /// (`MeanOverN`) or `X` (`Sum`).
    pub fn spectral(&self, d: usize, normalization: Normalization, threshold: Threshold) -> Result<SpectralData> {
        let r = self.leading_block(d);
        let s = r.nrows();
        let scale = normalization.factor(self.sample_count).sqrt();
        let svd = SVD::try_new(r * scale, false, true, EIGEN_EPS, MAX_ITER)
            .ok_or(Error::Svd { rows: s, cols: s })?;
        let v_t = svd.v_t.as_ref().expect("requested V");
        let pairs: Vec<(f64, DVector<f64>)> = (0..s)
            .map(|j| {
                let sigma = svd.singular_values[j];
                (sigma * sigma, v_t.row(j).transpose())
            })
            .collect();
        let largest = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let sigma_cut = threshold.effective(largest);
        Ok(SpectralData::from_sorted_pairs(
            pairs,
            s,
            sigma_cut * sigma_cut,
            threshold,
            SpectralRoute::DesignSvd,
        ))
    }
}

fn r_factor(x: DMatrix<f64>) -> DMatrix<f64> {
    x.qr().r()
}

/// Pairwise QR reduction of stacked triangular factors, with a fixed tree
/// shape so the result does not depend on the thread count.
fn reduce_tree(exec: Execution, mut level: Vec<DMatrix<f64>>) -> DMatrix<f64> {
    while level.len() > 1 {
        let pairs = level.len().div_ceil(2);
        let mut slots: Vec<Option<DMatrix<f64>>> = level.into_iter().map(Some).collect();
        let taken: Vec<(DMatrix<f64>, Option<DMatrix<f64>>)> = (0..pairs)
            .map(|k| {
                let a = slots[2 * k].take().expect("left");
                let b = slots.get_mut(2 * k + 1).and_then(Option::take);
                (a, b)
            })
            .collect();
        level = par::map_indexed(exec, taken.len(), |k| {
            let (a, b) = &taken[k];
            match b {
                None => a.clone(),
                Some(b) => {
                    let mut stacked = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
                    stacked.view_mut((0, 0), a.shape()).copy_from(a);
                    stacked.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
                    r_factor(stacked)
                }
            }
        });
    }
    level.pop().unwrap_or_else(|| DMatrix::zeros(0, 0))
}

/// Rank of a design matrix via the design route, without keeping eigenvectors
/// beyond what [`SpectralData`] needs.
pub fn design_rank(cloud: &PointCloud, basis: &GradedBasis, threshold: Threshold, exec: Execution) -> Result<usize> {
    let f = DesignFactor::new(cloud, basis, exec)?;
    Ok(f.spectral(basis.max_degree(), Normalization::MeanOverN, threshold)?.numerical_rank)
}

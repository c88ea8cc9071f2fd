//! Density estimation on boundary-free algebraic sets.
//!
//! For a set whose uniform probability measure has Christoffel function
//! `1/N(d)`, the normalized Christoffel function `N(d)·Λ_{μ_n,d}` of a
//! sample estimates the sample's density relative to that uniform measure.

use serde::Serialize;

use crate::christoffel::{ChristoffelEvaluator, LambdaValue};
use crate::dimension::{hilbert_oracle, sphere_hilbert, HilbertSet};
use crate::error::{Error, Result};
use crate::geometry::{sample_with_density, EvaluationGrid, SurfaceSpec};
use crate::moments::{DesignFactor, Normalization, PointCloud, Threshold};
use crate::par::{self, Execution};
use crate::polybasis::{basis_size, BasisKind, GradedBasis};

/// Largest membership residual accepted for an input cloud.
pub const MEMBERSHIP_TOL: f64 = 1e-6;

/// Smallest retained eigenvalue (relative) below which a run is flagged.
pub const CONDITIONING_WARN: f64 = 1e-8;

/// Number of eigen-polynomials of the uniform measure on a sphere in `R^p`.
pub fn sphere_n(p: usize, d: usize) -> usize {
    sphere_hilbert(p, d)
}

/// `N(d)` for a surface with a uniform reference measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceNormalization {
    pub surface: SurfaceSpec,
    pub degree: usize,
    pub n_of_d: usize,
}

impl ReferenceNormalization {
    pub fn new(surface: &SurfaceSpec, degree: usize) -> Result<Self> {
        let set = match surface {
            SurfaceSpec::Circle => HilbertSet::Circle,
            SurfaceSpec::Sphere { p } => HilbertSet::Sphere { p: *p },
            SurfaceSpec::BiTorus => HilbertSet::BiTorus,
            other => {
                return Err(Error::invalid(format!(
                    "no reference normalization for {}; use circle, sphere or bitorus",
                    other.name()
                )))
            }
        };
        Ok(Self {
            surface: surface.clone(),
            degree,
            n_of_d: hilbert_oracle(set, degree),
        })
    }
}

/// Options shared by the density entry points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityOptions {
    pub basis: BasisKind,
    pub threshold: Threshold,
    pub kernel_tol: f64,
    pub exec: Execution,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            basis: BasisKind::TensorChebyshev,
            threshold: Threshold::default(),
            kernel_tol: crate::christoffel::DEFAULT_KERNEL_TOL,
            exec: Execution::default(),
        }
    }
}

/// `N(d)·Λ` on a grid.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub grid: EvaluationGrid,
    /// `N(d)·Λ(z)`; zero where the grid point is off the support.
    pub values: Vec<f64>,
    pub lambdas: Vec<LambdaValue>,
    pub degree: usize,
    pub sample_count: usize,
    pub n_of_d: usize,
    pub rank: usize,
    /// Smallest retained eigenvalue below `1e-8 × largest`.
    pub ill_conditioned: bool,
    pub evaluator: ChristoffelEvaluator,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensitySummary {
    pub degree: usize,
    pub n: usize,
    pub n_of_d: usize,
    pub rank: usize,
    pub min_value: f64,
    pub max_value: f64,
    pub ill_conditioned: bool,
}

impl DensityGrid {
    pub fn summary(&self) -> DensitySummary {
        let min_value = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let max_value = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        DensitySummary {
            degree: self.degree,
            n: self.sample_count,
            n_of_d: self.n_of_d,
            rank: self.rank,
            min_value,
            max_value,
            ill_conditioned: self.ill_conditioned,
        }
    }
}

fn check_cloud(cloud: &PointCloud, surface: &SurfaceSpec, d: usize) -> Result<()> {
    let residual = surface.max_residual(cloud)?;
    if residual > MEMBERSHIP_TOL {
        return Err(Error::OffSurface {
            surface: surface.name().to_string(),
            residual,
        });
    }
    let s = basis_size(cloud.dim(), d);
    if cloud.len() < s {
        return Err(Error::invalid(format!(
            "{} points cannot determine a degree-{d} moment matrix of size {s}",
            cloud.len()
        )));
    }
    Ok(())
}

/// Evaluates `N(d)·Λ_{μ_n,d}` of an on-surface sample over `grid`.
pub fn estimate_density(
    cloud: &PointCloud,
    surface: &SurfaceSpec,
    d: usize,
    grid: &EvaluationGrid,
    opts: &DensityOptions,
) -> Result<DensityGrid> {
    let norm = ReferenceNormalization::new(surface, d)?;
    check_cloud(cloud, surface, d)?;
    let basis = GradedBasis::new(cloud.dim(), d, opts.basis, cloud.default_scale_box())?;
    let factor = DesignFactor::new(cloud, &basis, opts.exec)?;
    density_from_factor(&factor, d, norm.n_of_d, grid, opts)
}

fn density_from_factor(
    factor: &DesignFactor,
    d: usize,
    n_of_d: usize,
    grid: &EvaluationGrid,
    opts: &DensityOptions,
) -> Result<DensityGrid> {
    let spectral = factor.spectral(d, Normalization::MeanOverN, opts.threshold)?;
    let ill_conditioned = spectral.retained_condition() < CONDITIONING_WARN;
    if ill_conditioned {
        log::warn!(
            "degree {d}: smallest retained eigenvalue is {:.2e} of the largest",
            spectral.retained_condition()
        );
    }
    let rank = spectral.numerical_rank;
    let evaluator = ChristoffelEvaluator::with_kernel_tol(factor.basis().truncate(d), spectral, opts.kernel_tol)?;
    let lambdas = evaluator.lambda_many(&grid.points, opts.exec)?;
    let values = lambdas.iter().map(|l| n_of_d as f64 * l.value).collect();
    Ok(DensityGrid {
        grid: grid.clone(),
        values,
        lambdas,
        degree: d,
        sample_count: factor.sample_count(),
        n_of_d,
        rank,
        ill_conditioned,
        evaluator,
    })
}

/// Seed-averaged errors of `N(d)·Λ` against a target density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub degree: usize,
    pub sup_error: f64,
    pub mean_error: f64,
}

/// Target density relative to the uniform probability measure, with an
/// upper bound used by the rejection sampler.
pub struct TargetDensity<'a> {
    pub f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub bound: f64,
}

/// For each degree: sample `n` points per seed from `target`, estimate on
/// `grid`, and average the sup and mean absolute errors over seeds.
pub fn convergence_experiment(
    surface: &SurfaceSpec,
    target: &TargetDensity<'_>,
    degrees: &[usize],
    n: usize,
    seeds: &[u64],
    grid: &EvaluationGrid,
    opts: &DensityOptions,
) -> Result<Vec<ConvergenceRow>> {
    if degrees.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("convergence experiment needs degrees and seeds"));
    }
    let d_max = *degrees.iter().max().expect("non-empty");
    let truth: Vec<f64> = grid.points.points().map(|z| (target.f)(z)).collect();
    let per_seed = par::map_indexed(opts.exec, seeds.len(), |k| -> Result<Vec<(f64, f64)>> {
        let cloud = sample_with_density(surface, target.f, target.bound, n, seeds[k])?;
        check_cloud(&cloud, surface, d_max)?;
        let basis = GradedBasis::new(cloud.dim(), d_max, opts.basis, cloud.default_scale_box())?;
        let factor = DesignFactor::new(&cloud, &basis, opts.exec)?;
        degrees
            .iter()
            .map(|&d| {
                let norm = ReferenceNormalization::new(surface, d)?;
                let est = density_from_factor(&factor, d, norm.n_of_d, grid, opts)?;
                Ok(grid_errors(&est.values, &truth))
            })
            .collect()
    });
    let per_seed: Vec<Vec<(f64, f64)>> = per_seed.into_iter().collect::<Result<_>>()?;
    let m = seeds.len() as f64;
    Ok(degrees
        .iter()
        .enumerate()
        .map(|(i, &degree)| ConvergenceRow {
            degree,
            sup_error: per_seed.iter().map(|r| r[i].0).sum::<f64>() / m,
            mean_error: per_seed.iter().map(|r| r[i].1).sum::<f64>() / m,
        })
        .collect())
}

/// `(sup, mean)` absolute difference.
pub fn grid_errors(values: &[f64], truth: &[f64]) -> (f64, f64) {
    let mut sup: f64 = 0.0;
    let mut sum = 0.0;
    for (v, t) in values.iter().zip(truth) {
        let e = (v - t).abs();
        sup = sup.max(e);
        sum += e;
    }
    (sup, sum / values.len().max(1) as f64)
}

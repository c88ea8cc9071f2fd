//! Noise sweep: how the Christoffel function of a noisy copy of an
//! on-surface cloud approaches that of the clean cloud as the noise vanishes.
//!
//! Every level, including the clean reference, is evaluated with the
//! variational convention (value `0` where the grid point falls in the
//! numerical kernel), so grid points off the surface contribute the decay of
//! `Λ_σ` towards `0` there.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::christoffel::{ChristoffelEvaluator, LambdaValue, DEFAULT_KERNEL_TOL};
use crate::error::{Error, Result};
use crate::geometry::{EvaluationGrid, SAMPLE_BLOCK};
use crate::moments::{DesignFactor, Normalization, PointCloud, Threshold};
use crate::par::{self, Execution};
use crate::polybasis::{BasisKind, GradedBasis, ScaleBox};

/// Base cloud with a decreasing list of noise scales.
#[derive(Debug, Clone)]
pub struct NoiseLadder {
    pub base: PointCloud,
    sigmas: Vec<f64>,
    pub seed: u64,
}

impl NoiseLadder {
    /// Scales must be finite, non-negative and strictly decreasing (so only
    /// the last one may be zero).
    pub fn new(base: PointCloud, sigmas: Vec<f64>, seed: u64) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::invalid("noise ladder needs at least one scale"));
        }
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid("noise scales must be finite and non-negative"));
        }
        if sigmas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("noise scales must be strictly decreasing"));
        }
        Ok(Self { base, sigmas, seed })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// Standard normal draws shared by every level (`n × p`, row-major).
    fn unit_noise(&self, exec: Execution) -> Vec<f64> {
        let p = self.base.dim();
        let blocks = par::blocks(self.base.len(), SAMPLE_BLOCK);
        let parts = par::map_indexed(exec, blocks.len(), |b| {
            let (lo, hi) = blocks[b];
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(b as u64);
            (0..(hi - lo) * p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>()
        });
        parts.concat()
    }

    /// `x_i + σ ε_i` with the ladder's shared noise draws.
    pub fn noisy_cloud(&self, sigma: f64, exec: Execution) -> Result<PointCloud> {
        let eps = self.unit_noise(exec);
        self.apply(sigma, &eps)
    }

    fn apply(&self, sigma: f64, eps: &[f64]) -> Result<PointCloud> {
        let data = self
            .base
            .as_slice()
            .iter()
            .zip(eps)
            .map(|(x, e)| x + sigma * e)
            .collect();
        PointCloud::new(self.base.len(), self.base.dim(), data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepOptions {
    pub basis: BasisKind,
    pub threshold: Threshold,
    pub kernel_tol: f64,
    pub exec: Execution,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            basis: BasisKind::TensorChebyshev,
            threshold: Threshold::default(),
            kernel_tol: DEFAULT_KERNEL_TOL,
            exec: Execution::default(),
        }
    }
}

/// Christoffel function of one noise level on the grid.
#[derive(Debug, Clone)]
pub struct NoiseLevel {
    pub sigma: f64,
    pub lambdas: Vec<LambdaValue>,
    pub rank: usize,
    /// Mean `|Λ_σ(z) − Λ_0(z)|` over the grid.
    pub deviation: f64,
}

#[derive(Debug, Clone)]
pub struct NoiseSweep {
    pub degree: usize,
    pub grid: EvaluationGrid,
    pub reference: NoiseLevel,
    pub levels: Vec<NoiseLevel>,
}

impl NoiseSweep {
    pub fn deviations(&self) -> Vec<(f64, f64)> {
        self.levels.iter().map(|l| (l.sigma, l.deviation)).collect()
    }
}

fn grid_lambdas(cloud: &PointCloud, d: usize, scale_box: &ScaleBox, grid: &EvaluationGrid, opts: &SweepOptions) -> Result<(Vec<LambdaValue>, usize)> {
    let basis = GradedBasis::new(cloud.dim(), d, opts.basis, scale_box.clone())?;
    let factor = DesignFactor::new(cloud, &basis, opts.exec)?;
    let sp = factor.spectral(d, Normalization::MeanOverN, opts.threshold)?;
    let rank = sp.numerical_rank;
    let ev = ChristoffelEvaluator::with_kernel_tol(basis, sp, opts.kernel_tol)?;
    Ok((ev.lambda_many(&grid.points, opts.exec)?, rank))
}

/// Runs every level of the ladder plus the clean reference. All levels
/// share the base cloud's scale box so they use the same basis.
pub fn noise_sweep(ladder: &NoiseLadder, d: usize, grid: &EvaluationGrid, opts: &SweepOptions) -> Result<NoiseSweep> {
    if grid.points.dim() != ladder.base.dim() {
        return Err(Error::DimensionMismatch {
            expected: ladder.base.dim(),
            actual: grid.points.dim(),
        });
    }
    let scale_box = ladder.base.default_scale_box();
    let eps = ladder.unit_noise(opts.exec);
    let (reference, ref_rank) = grid_lambdas(&ladder.base, d, &scale_box, grid, opts)?;
    let levels = par::map_indexed(opts.exec, ladder.sigmas.len(), |k| -> Result<NoiseLevel> {
        let sigma = ladder.sigmas[k];
        let cloud = ladder.apply(sigma, &eps)?;
        let (lambdas, rank) = grid_lambdas(&cloud, d, &scale_box, grid, opts)?;
        Ok(NoiseLevel {
            sigma,
            deviation: mean_deviation(&lambdas, &reference),
            lambdas,
            rank,
        })
    });
    Ok(NoiseSweep {
        degree: d,
        grid: grid.clone(),
        reference: NoiseLevel {
            sigma: 0.0,
            lambdas: reference,
            rank: ref_rank,
            deviation: 0.0,
        },
        levels: levels.into_iter().collect::<Result<_>>()?,
    })
}

fn mean_deviation(a: &[LambdaValue], b: &[LambdaValue]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x.value - y.value).abs()).sum();
    sum / a.len().max(1) as f64
}

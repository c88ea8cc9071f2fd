//! Samplers, membership tests and evaluation grids for the algebraic sets
//! used in the experiments.
//!
//! Every sampler splits its output into blocks of [`SAMPLE_BLOCK`] points;
//! block `b` draws from a ChaCha stream keyed by `(seed, b)`, so the output
//! is a pure function of `(spec, n, seed)` regardless of threading.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::PointCloud;
use crate::par::{self, Execution};

pub const SAMPLE_BLOCK: usize = 1024;

/// An algebraic set (or the cube) together with its defining equations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceSpec {
    /// `[-1, 1]^p`, full dimensional.
    Cube { p: usize },
    /// Unit sphere in `R^p`.
    Sphere { p: usize },
    /// Ring torus in `R^3`: `(|x|² + R² − r²)² = 4R²(x² + y²)`.
    Torus { major: f64, minor: f64 },
    /// `x⁶ + y⁶ + z⁶ − 2x²y²z² = 1`.
    TvScreen,
    /// Unit circle in `R^2`.
    Circle,
    /// Product of two unit circles in `R^4`.
    BiTorus,
}

impl SurfaceSpec {
    pub fn standard_torus() -> Self {
        SurfaceSpec::Torus {
            major: 0.75,
            minor: 0.25,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SurfaceSpec::Cube { .. } => "cube",
            SurfaceSpec::Sphere { .. } => "sphere",
            SurfaceSpec::Torus { .. } => "torus",
            SurfaceSpec::TvScreen => "tvscreen",
            SurfaceSpec::Circle => "circle",
            SurfaceSpec::BiTorus => "bitorus",
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            SurfaceSpec::Cube { p } | SurfaceSpec::Sphere { p } => *p,
            SurfaceSpec::Torus { .. } | SurfaceSpec::TvScreen => 3,
            SurfaceSpec::Circle => 2,
            SurfaceSpec::BiTorus => 4,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SurfaceSpec::Cube { p } if *p == 0 => Err(Error::invalid("cube dimension must be positive")),
            SurfaceSpec::Sphere { p } if *p < 2 => Err(Error::invalid("sphere needs p >= 2")),
            SurfaceSpec::Torus { major, minor } if !(*major > *minor && *minor > 0.0) => {
                Err(Error::invalid("torus needs major > minor > 0"))
            }
            _ => Ok(()),
        }
    }

    /// Largest absolute value of the defining equations at `x` (distance
    /// outside the box for the cube).
    pub fn residual(&self, x: &[f64]) -> f64 {
        let sq = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>();
        match self {
            SurfaceSpec::Cube { .. } => x.iter().map(|c| (c.abs() - 1.0).max(0.0)).fold(0.0, f64::max),
            SurfaceSpec::Sphere { .. } | SurfaceSpec::Circle => (sq(x) - 1.0).abs(),
            SurfaceSpec::Torus { major, minor } => {
                let (r2, a2) = (major * major, minor * minor);
                let s = sq(x) + r2 - a2;
                (s * s - 4.0 * r2 * (x[0] * x[0] + x[1] * x[1])).abs()
            }
            SurfaceSpec::TvScreen => {
                let (a, b, c) = (x[0] * x[0], x[1] * x[1], x[2] * x[2]);
                (a * a * a + b * b * b + c * c * c - 2.0 * a * b * c - 1.0).abs()
            }
            SurfaceSpec::BiTorus => (sq(&x[..2]) - 1.0).abs().max((sq(&x[2..]) - 1.0).abs()),
        }
    }

    /// Largest residual over a cloud; errors on dimension mismatch.
    pub fn max_residual(&self, cloud: &PointCloud) -> Result<f64> {
        if cloud.dim() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                actual: cloud.dim(),
            });
        }
        Ok(cloud.points().map(|x| self.residual(x)).fold(0.0, f64::max))
    }

    /// One point from the base distribution of this set.
    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        match *self {
            SurfaceSpec::Cube { p } => out.extend((0..p).map(|_| rng.random_range(-1.0..=1.0))),
            SurfaceSpec::Sphere { p } => {
                let start = out.len();
                loop {
                    out.truncate(start);
                    out.extend((0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
                    let norm = out[start..].iter().map(|c| c * c).sum::<f64>().sqrt();
                    if norm > 1e-12 {
                        out[start..].iter_mut().for_each(|c| *c /= norm);
                        break;
                    }
                }
            }
            SurfaceSpec::Torus { major, minor } => loop {
                let theta = rng.random_range(0.0..TAU);
                let phi = rng.random_range(0.0..TAU);
                // area element is proportional to R + r cos(theta)
                let accept = rng.random_range(0.0..1.0) * (major + minor) < major + minor * theta.cos();
                if accept {
                    let ring = major + minor * theta.cos();
                    out.extend([ring * phi.cos(), ring * phi.sin(), minor * theta.sin()]);
                    break;
                }
            },
            SurfaceSpec::TvScreen => {
                let mut u = Vec::with_capacity(3);
                SurfaceSpec::Sphere { p: 3 }.draw(rng, &mut u);
                let (a, b, c) = (u[0] * u[0], u[1] * u[1], u[2] * u[2]);
                let t = (a * a * a + b * b * b + c * c * c - 2.0 * a * b * c).powf(-1.0 / 6.0);
                out.extend(u.iter().map(|v| t * v));
            }
            SurfaceSpec::Circle => {
                let theta = rng.random_range(0.0..TAU);
                out.extend([theta.cos(), theta.sin()]);
            }
            SurfaceSpec::BiTorus => {
                let phi = rng.random_range(0.0..TAU);
                let psi = rng.random_range(0.0..TAU);
                out.extend([phi.cos(), phi.sin(), psi.cos(), psi.sin()]);
            }
        }
    }
}

fn block_rng(seed: u64, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

/// `n` points from the set's base distribution: uniform on the cube, the
/// rotation-invariant measure on spheres and circles, the area measure on the
/// torus, and the radial projection of the sphere measure on the TV screen.
pub fn sample(spec: &SurfaceSpec, n: usize, seed: u64) -> Result<PointCloud> {
    sample_with(spec, n, seed, Execution::default())
}

pub fn sample_with(spec: &SurfaceSpec, n: usize, seed: u64, exec: Execution) -> Result<PointCloud> {
    sample_weighted(spec, n, seed, exec, None)
}

/// Rejection sampler for a density `f` relative to the base distribution of
/// `spec`; `bound` must dominate `f`.
pub fn sample_with_density<F>(spec: &SurfaceSpec, density: F, bound: f64, n: usize, seed: u64) -> Result<PointCloud>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !(bound.is_finite() && bound > 0.0) {
        return Err(Error::invalid("density bound must be positive and finite"));
    }
    sample_weighted(spec, n, seed, Execution::default(), Some((&density, bound)))
}

type Weight<'a> = Option<(&'a (dyn Fn(&[f64]) -> f64 + Sync), f64)>;

fn sample_weighted(spec: &SurfaceSpec, n: usize, seed: u64, exec: Execution, weight: Weight<'_>) -> Result<PointCloud> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let p = spec.ambient_dim();
    let blocks = par::blocks(n, SAMPLE_BLOCK);
    let parts = par::map_indexed(exec, blocks.len(), |b| {
        let (lo, hi) = blocks[b];
        let mut rng = block_rng(seed, b);
        let mut out = Vec::with_capacity((hi - lo) * p);
        let mut count = 0;
        while count < hi - lo {
            let start = out.len();
            spec.draw(&mut rng, &mut out);
            if let Some((f, bound)) = weight {
                let u: f64 = rng.random_range(0.0..bound);
                if u >= f(&out[start..]) {
                    out.truncate(start);
                    continue;
                }
            }
            count += 1;
        }
        out
    });
    PointCloud::new(n, p, parts.concat())
}

/// Target set for angular data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleEmbedding {
    Circle,
    BiTorus,
}

impl AngleEmbedding {
    pub fn arity(self) -> usize {
        match self {
            AngleEmbedding::Circle => 1,
            AngleEmbedding::BiTorus => 2,
        }
    }

    pub fn surface(self) -> SurfaceSpec {
        match self {
            AngleEmbedding::Circle => SurfaceSpec::Circle,
            AngleEmbedding::BiTorus => SurfaceSpec::BiTorus,
        }
    }
}

/// Maps angle tuples (radians) to `(cos θ, sin θ)` per angle.
pub fn embed_angles(angles: &[Vec<f64>], target: AngleEmbedding) -> Result<PointCloud> {
    let k = target.arity();
    let mut data = Vec::with_capacity(angles.len() * 2 * k);
    for (i, a) in angles.iter().enumerate() {
        if a.len() != k {
            return Err(Error::invalid(format!(
                "angle tuple {i} has arity {}, expected {k}",
                a.len()
            )));
        }
        for &t in a {
            data.extend([t.cos(), t.sin()]);
        }
    }
    PointCloud::new(angles.len(), 2 * k, data)
}

/// Grid points on a set (or in an ambient box) with their parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationGrid {
    /// Names of the parameter columns, e.g. `["theta"]` or `["lon", "lat"]`.
    pub param_names: Vec<String>,
    /// One parameter tuple per point.
    pub params: Vec<Vec<f64>>,
    pub points: PointCloud,
    /// `(rows, cols)`; `cols = 1` for one-parameter grids.
    pub shape: (usize, usize),
}

impl EvaluationGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Applies a linear map to the embedded points, keeping the parameters.
    pub fn transformed(&self, f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        Ok(Self {
            points: self.points.map_points(f)?,
            ..self.clone()
        })
    }
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Parameter grid on a circle, sphere (`p = 3`, equirectangular) or bi-torus.
/// `resolution.1` is ignored for the circle.
pub fn make_grid(spec: &SurfaceSpec, resolution: (usize, usize)) -> Result<EvaluationGrid> {
    let (a, b) = resolution;
    match spec {
        SurfaceSpec::Circle => {
            if a < 2 {
                return Err(Error::invalid("grid resolution must be at least 2"));
            }
            let params: Vec<Vec<f64>> = (0..a).map(|i| vec![TAU * i as f64 / a as f64]).collect();
            let points = embed_angles(&params, AngleEmbedding::Circle)?;
            Ok(EvaluationGrid {
                param_names: names(&["theta"]),
                params,
                points,
                shape: (a, 1),
            })
        }
        SurfaceSpec::BiTorus => {
            if a < 2 || b < 2 {
                return Err(Error::invalid("grid resolution must be at least 2 per parameter"));
            }
            let params: Vec<Vec<f64>> = (0..a)
                .flat_map(|i| (0..b).map(move |j| vec![TAU * i as f64 / a as f64, TAU * j as f64 / b as f64]))
                .collect();
            let points = embed_angles(&params, AngleEmbedding::BiTorus)?;
            Ok(EvaluationGrid {
                param_names: names(&["phi", "psi"]),
                params,
                points,
                shape: (a, b),
            })
        }
        SurfaceSpec::Sphere { p: 3 } => {
            if a < 2 || b < 2 {
                return Err(Error::invalid("grid resolution must be at least 2 per parameter"));
            }
            let mut params = Vec::with_capacity(a * b);
            let mut data = Vec::with_capacity(3 * a * b);
            for j in 0..b {
                // latitude cell centres avoid duplicated poles
                let lat = -PI / 2.0 + PI * (j as f64 + 0.5) / b as f64;
                for i in 0..a {
                    let lon = -PI + TAU * i as f64 / a as f64;
                    params.push(vec![lon, lat]);
                    data.extend([lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]);
                }
            }
            Ok(EvaluationGrid {
                param_names: names(&["lon", "lat"]),
                params,
                points: PointCloud::new(a * b, 3, data)?,
                shape: (b, a),
            })
        }
        other => Err(Error::invalid(format!("no parameter grid for {}", other.name()))),
    }
}

/// Regular grid of `per_axis^p` points filling the box `[lo, hi]^p`.
pub fn make_box_grid(p: usize, lo: f64, hi: f64, per_axis: usize) -> Result<EvaluationGrid> {
    if per_axis < 2 || p == 0 || !(hi > lo) {
        return Err(Error::invalid("box grid needs p >= 1, lo < hi and at least 2 points per axis"));
    }
    let axis: Vec<f64> = (0..per_axis)
        .map(|i| lo + (hi - lo) * i as f64 / (per_axis - 1) as f64)
        .collect();
    let total = per_axis.pow(p as u32);
    let mut data = Vec::with_capacity(total * p);
    for k in 0..total {
        let mut rem = k;
        let mut coords = vec![0.0; p];
        for j in (0..p).rev() {
            coords[j] = axis[rem % per_axis];
            rem /= per_axis;
        }
        data.extend(coords);
    }
    let points = PointCloud::new(total, p, data)?;
    let params = points.points().map(<[f64]>::to_vec).collect();
    Ok(EvaluationGrid {
        param_names: (1..=p).map(|j| format!("u{j}")).collect(),
        params,
        points,
        shape: if p == 2 { (per_axis, per_axis) } else { (total, 1) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_points_are_unit() {
        let c = sample(&SurfaceSpec::Sphere { p: 3 }, 5000, 1).unwrap();
        for x in c.points() {
            let n: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn samplers_satisfy_their_equations() {
        for spec in [
            SurfaceSpec::Sphere { p: 4 },
            SurfaceSpec::standard_torus(),
            SurfaceSpec::TvScreen,
            SurfaceSpec::Circle,
            SurfaceSpec::BiTorus,
            SurfaceSpec::Cube { p: 3 },
        ] {
            let c = sample(&spec, 4000, 9).unwrap();
            assert_eq!(c.dim(), spec.ambient_dim());
            let r = spec.max_residual(&c).unwrap();
            assert!(r <= 1e-10, "{}: residual {r}", spec.name());
        }
    }

    #[test]
    fn off_surface_residual_is_detected() {
        assert!(SurfaceSpec::Circle.residual(&[1.1, 0.0]) > 0.2);
        assert!(SurfaceSpec::TvScreen.residual(&[0.0, 0.0, 0.0]) == 1.0);
        assert!(SurfaceSpec::standard_torus().residual(&[0.0, 0.0, 0.0]) > 0.1);
        assert_eq!(SurfaceSpec::Cube { p: 2 }.residual(&[0.5, -1.0]), 0.0);
    }

    #[test]
    fn sampling_is_seed_deterministic_and_thread_independent() {
        let spec = SurfaceSpec::standard_torus();
        let a = sample_with(&spec, 3000, 42, Execution::Sequential).unwrap();
        let b = sample_with(&spec, 3000, 42, Execution::Parallel).unwrap();
        let c = sample_with(&spec, 3000, 43, Execution::Parallel).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(sample(&SurfaceSpec::Circle, 0, 1).is_err());
        assert!(sample(&SurfaceSpec::Torus { major: 0.2, minor: 0.5 }, 10, 1).is_err());
        assert!(embed_angles(&[vec![0.0, 1.0]], AngleEmbedding::Circle).is_err());
        assert!(make_grid(&SurfaceSpec::Circle, (1, 1)).is_err());
        assert!(make_grid(&SurfaceSpec::TvScreen, (4, 4)).is_err());
    }

    #[test]
    fn embeddings() {
        let c = embed_angles(&[vec![0.0]], AngleEmbedding::Circle).unwrap();
        assert_eq!(c.point(0), &[1.0, 0.0]);
        let b = embed_angles(&[vec![PI / 2.0, PI]], AngleEmbedding::BiTorus).unwrap();
        let expect = [0.0, 1.0, -1.0, 0.0];
        for (x, e) in b.point(0).iter().zip(expect) {
            assert!((x - e).abs() < 1e-15);
        }
        for t in [0.3, 2.0, -1.1] {
            let a = embed_angles(&[vec![t], vec![t + TAU]], AngleEmbedding::Circle).unwrap();
            for (x, y) in a.point(0).iter().zip(a.point(1)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_shapes() {
        let g = make_grid(&SurfaceSpec::Circle, (4, 1)).unwrap();
        let angles: Vec<f64> = g.params.iter().map(|v| v[0]).collect();
        assert_eq!(angles, vec![0.0, PI / 2.0, PI, 3.0 * PI / 2.0]);

        let s = make_grid(&SurfaceSpec::Sphere { p: 3 }, (36, 18)).unwrap();
        assert_eq!(s.len(), 648);
        assert!(SurfaceSpec::Sphere { p: 3 }.max_residual(&s.points).unwrap() < 1e-12);

        let t = make_grid(&SurfaceSpec::BiTorus, (64, 64)).unwrap();
        assert_eq!(t.len(), 4096);
        assert!(SurfaceSpec::BiTorus.max_residual(&t.points).unwrap() < 1e-12);

        let bx = make_box_grid(2, -1.5, 1.5, 5).unwrap();
        assert_eq!(bx.len(), 25);
        assert_eq!(bx.points.point(24), &[1.5, 1.5]);
    }

    #[test]
    fn torus_sampler_matches_area_measure() {
        // under the area measure E[cos θ] = r / (2R)
        let (major, minor) = (0.75, 0.25);
        let c = sample(&SurfaceSpec::Torus { major, minor }, 1_000_000, 17).unwrap();
        let cos: Vec<f64> = c
            .points()
            .map(|x| {
                let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
                x[2].atan2(rho - major).cos()
            })
            .collect();
        let n = cos.len() as f64;
        let mean = cos.iter().sum::<f64>() / n;
        let var = cos.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let expected = minor / (2.0 * major);
        assert!((mean - expected).abs() < 3.0 * se, "mean {mean} vs {expected} (se {se})");

        // rejection-free oracle: inverse CDF of θ ∝ R + r cos θ
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let m = 200_000;
        let oracle: f64 = (0..m)
            .map(|_| {
                let u: f64 = rng.random_range(0.0..1.0) * TAU * major;
                let (mut lo, mut hi) = (0.0, TAU);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if major * mid + minor * mid.sin() < u { lo = mid } else { hi = mid }
                }
                (0.5 * (lo + hi)).cos()
            })
            .sum::<f64>()
            / m as f64;
        let se_oracle = (var / m as f64).sqrt();
        assert!((mean - oracle).abs() < 3.0 * (se * se + se_oracle * se_oracle).sqrt());
    }

    #[test]
    fn weighted_sampler_tilts_the_circle() {
        let c = sample_with_density(&SurfaceSpec::Circle, |x| 1.0 + 0.5 * x[0], 1.5, 100_000, 3).unwrap();
        // E[cos θ] under (1 + ½ cos θ) dθ/2π is 1/4
        let mean = c.points().map(|x| x[0]).sum::<f64>() / c.len() as f64;
        assert!((mean - 0.25).abs() < 0.01, "{mean}");
    }
}

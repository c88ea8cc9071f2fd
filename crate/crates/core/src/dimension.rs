//! Rank-versus-degree curves and intrinsic dimension.
//!
//! On an algebraic set `V` the rank of the degree-`d` moment matrix equals the
//! Hilbert function of `V`, which for large `d` is a polynomial in `d` whose
//! degree is `dim V`. [`estimate_dimension`] fits nested polynomial models
//! `k = 0..p` to the observed ranks and keeps the smallest one that fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{DesignFactor, Normalization, PointCloud, Threshold};
use crate::par::{self, Execution};
use crate::polybasis::{basis_size, binomial, BasisKind, GradedBasis};

/// Largest basis a rank curve will factor.
pub const MAX_BASIS: usize = 5000;

/// Default relative rms gate for accepting a Hilbert-polynomial fit.
pub const DEFAULT_REL_FIT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankObservation {
    pub degree: usize,
    pub rank: usize,
    pub s_of_d: usize,
    pub n: usize,
    pub threshold_used: f64,
    /// `n < s(d)`: the rank is capped by the sample size.
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCurve {
    pub observations: Vec<RankObservation>,
    pub threshold: Threshold,
    pub basis_kind: BasisKind,
}

impl RankCurve {
    /// Builds a curve from `(degree, rank)` pairs, e.g. oracle values.
    pub fn from_ranks(p: usize, n: usize, ranks: &[(usize, usize)]) -> Result<Self> {
        let observations = ranks
            .iter()
            .map(|&(degree, rank)| {
                let s = basis_size(p, degree);
                RankObservation {
                    degree,
                    rank,
                    s_of_d: s,
                    n,
                    threshold_used: 0.0,
                    saturated: n < s,
                }
            })
            .collect();
        let curve = Self {
            observations,
            threshold: Threshold::default(),
            basis_kind: BasisKind::TensorChebyshev,
        };
        curve.validate()?;
        Ok(curve)
    }

    fn validate(&self) -> Result<()> {
        for w in self.observations.windows(2) {
            if w[1].degree <= w[0].degree {
                return Err(Error::invalid("rank curve degrees must be strictly increasing"));
            }
        }
        Ok(())
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.observations.iter().map(|o| o.degree).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.observations.iter().map(|o| o.rank).collect()
    }

    /// Observations usable for fitting (not capped by the sample size).
    pub fn usable(&self) -> Vec<&RankObservation> {
        self.observations.iter().filter(|o| !o.saturated).collect()
    }
}

/// Numerical rank of the moment matrix at every degree in `degrees`.
///
/// The design matrix is factored once at the highest degree; since the basis
/// is graded, each lower degree uses the leading block of the triangular
/// factor.
pub fn rank_curve(
    cloud: &PointCloud,
    degrees: &[usize],
    kind: BasisKind,
    threshold: Threshold,
    exec: Execution,
) -> Result<RankCurve> {
    let mut degrees = degrees.to_vec();
    degrees.sort_unstable();
    degrees.dedup();
    let d_max = *degrees.last().ok_or_else(|| Error::invalid("no degrees requested"))?;
    let s_max = basis_size(cloud.dim(), d_max);
    if s_max > MAX_BASIS {
        return Err(Error::BasisTooLarge {
            size: s_max,
            limit: MAX_BASIS,
        });
    }
    if cloud.len() < s_max {
        log::warn!(
            "sample size {} below basis size {s_max}; ranks at high degree are capped by n",
            cloud.len()
        );
    }
    let basis = GradedBasis::new(cloud.dim(), d_max, kind, cloud.default_scale_box())?;
    let factor = DesignFactor::new(cloud, &basis, exec)?;
    let spectra = par::map_indexed(exec, degrees.len(), |k| {
        factor.spectral(degrees[k], Normalization::MeanOverN, threshold)
    });
    let mut observations = Vec::with_capacity(degrees.len());
    for (&degree, sp) in degrees.iter().zip(spectra) {
        let sp = sp?;
        let s = basis_size(cloud.dim(), degree);
        observations.push(RankObservation {
            degree,
            rank: sp.numerical_rank,
            s_of_d: s,
            n: cloud.len(),
            threshold_used: sp.threshold_used,
            saturated: cloud.len() < s,
        });
    }
    Ok(RankCurve {
        observations,
        threshold,
        basis_kind: kind,
    })
}

/// Least-squares fit of ranks by a polynomial of degree `k` in `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HilbertFit {
    pub k: usize,
    /// Coefficients of `1, d, ..., d^k`.
    pub coefficients: Vec<f64>,
    pub rms_residual: f64,
}

/// Ordinary least squares of `r_d` against `(1, d, ..., d^k)` over the
/// usable observations.
pub fn fit_hilbert(curve: &RankCurve, k: usize) -> Result<HilbertFit> {
    let obs = curve.usable();
    let pts: Vec<(f64, f64)> = obs.iter().map(|o| (o.degree as f64, o.rank as f64)).collect();
    fit_polynomial(&pts, k)
}

fn fit_polynomial(pts: &[(f64, f64)], k: usize) -> Result<HilbertFit> {
    if pts.len() < k + 2 {
        return Err(Error::invalid(format!(
            "degree-{k} fit needs at least {} observations, got {}",
            k + 2,
            pts.len()
        )));
    }
    // centred and scaled abscissa keeps the Vandermonde well conditioned
    let m = pts.len() as f64;
    let centre = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let half = pts.iter().map(|p| (p.0 - centre).abs()).fold(0.0, f64::max).max(1.0);
    let a = DMatrix::from_fn(pts.len(), k + 1, |i, j| ((pts[i].0 - centre) / half).powi(j as i32));
    let y = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let qr = a.clone().qr();
    let qty = qr.q().tr_mul(&y);
    let scaled = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::invalid("singular Vandermonde system"))?;
    let resid = &y - &a * &scaled;
    let rms = (resid.norm_squared() / m).sqrt();
    Ok(HilbertFit {
        k,
        coefficients: unscale(&scaled, centre, half),
        rms_residual: rms,
    })
}

/// Converts coefficients in `u = (d − c)/h` to coefficients in `d`.
fn unscale(b: &DVector<f64>, c: f64, h: f64) -> Vec<f64> {
    let k = b.len();
    let mut out = vec![0.0; k];
    for (j, &bj) in b.iter().enumerate() {
        // bj (d − c)^j / h^j
        let w = bj / h.powi(j as i32);
        for m in 0..=j {
            out[m] += w * binomial(j, m) as f64 * (-c).powi((j - m) as i32);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    /// One fit per candidate `k = 0..=p` that had enough observations.
    pub fits: Vec<HilbertFit>,
    pub selected_dimension: usize,
    /// False when no candidate passed the gate (the ambient dimension is
    /// reported) or too few unsaturated observations were available.
    pub reliable: bool,
    pub fit_degrees_used: Vec<usize>,
    pub rel_fit_tol: f64,
}

impl DimensionEstimate {
    pub fn residual_by_k(&self) -> Vec<(usize, f64)> {
        self.fits.iter().map(|f| (f.k, f.rms_residual)).collect()
    }
}

/// Smallest `k` whose fit has rms residual `≤ rel_fit_tol × mean rank`.
pub fn estimate_dimension(curve: &RankCurve, p: usize, rel_fit_tol: f64) -> Result<DimensionEstimate> {
    curve.validate()?;
    let usable = curve.usable();
    let pts: Vec<(f64, f64)> = usable.iter().map(|o| (o.degree as f64, o.rank as f64)).collect();
    let fit_degrees_used: Vec<usize> = usable.iter().map(|o| o.degree).collect();
    let mut fits = Vec::new();
    for k in 0..=p {
        if pts.len() < k + 2 {
            break;
        }
        fits.push(fit_polynomial(&pts, k)?);
    }
    let mean_rank = if pts.is_empty() {
        0.0
    } else {
        pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64
    };
    let gate = rel_fit_tol * mean_rank;
    let passing = fits.iter().find(|f| f.rms_residual <= gate).map(|f| f.k);
    let enough = pts.len() >= 4;
    Ok(DimensionEstimate {
        selected_dimension: passing.filter(|_| enough).unwrap_or(p),
        reliable: enough && passing.is_some(),
        fits,
        fit_degrees_used,
        rel_fit_tol,
    })
}

/// Sets with a closed-form Hilbert function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HilbertSet {
    /// Full-dimensional set in `R^p`.
    Cube { p: usize },
    /// Unit sphere in `R^p`.
    Sphere { p: usize },
    /// Irreducible hypersurface of the given degree in `R^3`.
    Hypersurface { degree: usize },
    Circle,
    BiTorus,
}

/// Exact Hilbert function values used as rank oracles.
pub fn hilbert_oracle(set: HilbertSet, d: usize) -> usize {
    match set {
        HilbertSet::Cube { p } => binomial(d + p, p),
        HilbertSet::Sphere { p } => sphere_hilbert(p, d),
        HilbertSet::Hypersurface { degree } => {
            let full = binomial(d + 3, 3);
            if d >= degree {
                full - binomial(d - degree + 3, 3)
            } else {
                full
            }
        }
        HilbertSet::Circle => 2 * d + 1,
        HilbertSet::BiTorus => 2 * d * d + 2 * d + 1,
    }
}

/// `C(p+d−1, p−1) + C(p+d−2, p−1)`; for `d = 0` only the constant.
pub fn sphere_hilbert(p: usize, d: usize) -> usize {
    assert!(p >= 2, "sphere needs p >= 2");
    if d == 0 {
        return 1;
    }
    binomial(p + d - 1, p - 1) + binomial(p + d - 2, p - 1)
}

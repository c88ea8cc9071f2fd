//! Needle polynomials: `Q(y) = R(‖y‖)` with
//! `R(t) = T_d(1 + δ² − t²) / T_d(1 + δ²)`.
//!
//! `Q` has degree `2d`, `Q(0) = 1`, `|Q| ≤ 1` on the unit ball and
//! `|Q| ≤ 2^(1 − δd)` outside the ball of radius `δ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::polybasis::chebyshev_t;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeedlePolynomial {
    degree_parameter: usize,
    delta: f64,
    /// `1 / T_d(1 + δ²)`: the single Chebyshev coefficient of `R` in the
    /// shifted variable `1 + δ² − t²`.
    scale: f64,
}

impl NeedlePolynomial {
    pub fn new(d: usize, delta: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("needle degree parameter must be at least 1"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("needle width {delta} outside (0, 1)")));
        }
        let peak = chebyshev_t(d, 1.0 + delta * delta);
        Ok(Self {
            degree_parameter: d,
            delta,
            scale: 1.0 / peak,
        })
    }

    pub fn degree_parameter(&self) -> usize {
        self.degree_parameter
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Total degree of `Q` in `y`.
    pub fn degree(&self) -> usize {
        2 * self.degree_parameter
    }

    /// `2^(1 − δd)`.
    pub fn tail_bound(&self) -> f64 {
        2f64.powf(1.0 - self.delta * self.degree_parameter as f64)
    }

    /// Radial profile `R(t)`.
    pub fn radial(&self, t: f64) -> f64 {
        let shifted = 1.0 + self.delta * self.delta - t * t;
        // shifted == 1 + δ² exactly at t = 0, so R(0) is 1 up to rounding
        chebyshev_t(self.degree_parameter, shifted) * self.scale
    }

    /// `Q(y)`.
    pub fn eval(&self, y: &[f64]) -> f64 {
        let norm = y.iter().map(|c| c * c).sum::<f64>().sqrt();
        self.radial(norm)
    }
}

/// `needle(d, δ)`.
pub fn needle(d: usize, delta: f64) -> Result<NeedlePolynomial> {
    NeedlePolynomial::new(d, delta)
}

/// `Q(y)`.
pub fn needle_eval(q: &NeedlePolynomial, y: &[f64]) -> f64 {
    q.eval(y)
}

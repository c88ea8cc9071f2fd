//! Christoffel functions of empirical measures.
//!
//! Given a point cloud, this crate builds the empirical moment matrix of a
//! graded polynomial basis, decomposes it, and evaluates the
//! Christoffel-Darboux kernel `κ(x, y) = v(x)ᵀ M† v(y)` and Christoffel
//! function `Λ(x) = 1/κ(x, x)`. Two applications sit on top:
//!
//! * [`dimension`]: the rank of the moment matrix as a function of the degree
//!   is the Hilbert function of the Zariski closure of the support, whose
//!   growth rate gives the intrinsic dimension;
//! * [`density`]: on a circle, sphere or bi-torus, `N(d)·Λ` estimates the
//!   density relative to the uniform measure.
//!
//! Data-parallel loops go through [`par`]; build without the default
//! `parallel` feature for a purely sequential library with identical output.
//!
//! ```
//! use christoffel::prelude::*;
//!
//! let cloud = sample(&SurfaceSpec::Sphere { p: 3 }, 2000, 7).unwrap();
//! let curve = rank_curve(&cloud, &[2, 3, 4, 5], BasisKind::TensorChebyshev,
//!                        Threshold::default(), Execution::Parallel).unwrap();
//! assert_eq!(curve.ranks(), vec![9, 16, 25, 36]);
//! ```

pub mod christoffel;
pub mod density;
pub mod dimension;
pub mod error;
pub mod geometry;
pub mod io;
pub mod moments;
pub mod needle;
pub mod par;
pub mod perturbation;
pub mod polybasis;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::christoffel::{
        lambda_variational_oracle, perturbed_lambda, supnorm_bound_check, ChristoffelEvaluator, LambdaValue,
        DEFAULT_KERNEL_TOL,
    };
    pub use crate::density::{
        convergence_experiment, estimate_density, sphere_n, ConvergenceRow, DensityGrid, DensityOptions,
        ReferenceNormalization, TargetDensity,
    };
    pub use crate::dimension::{
        estimate_dimension, fit_hilbert, hilbert_oracle, rank_curve, DimensionEstimate, HilbertSet, RankCurve,
        DEFAULT_REL_FIT_TOL,
    };
    pub use crate::error::{Error, Result};
    pub use crate::geometry::{
        embed_angles, make_box_grid, make_grid, sample, sample_with_density, AngleEmbedding, EvaluationGrid,
        SurfaceSpec,
    };
    pub use crate::moments::{
        design_matrix, moment_matrix, spectral, DesignFactor, MomentMatrix, Normalization, PointCloud, SpectralData,
        SpectralRoute, Threshold, ThresholdMode,
    };
    pub use crate::needle::{needle, needle_eval, NeedlePolynomial};
    pub use crate::par::Execution;
    pub use crate::perturbation::{noise_sweep, NoiseLadder, NoiseSweep, SweepOptions};
    pub use crate::polybasis::{chebyshev_t, BasisKind, GradedBasis, MultiIndex, ScaleBox};
}

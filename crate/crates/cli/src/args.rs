use std::path::PathBuf;

use christoffel::geometry::{AngleEmbedding, SurfaceSpec};
use christoffel::moments::Threshold;
use christoffel::polybasis::BasisKind;
use christoffel::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "christoffel", version, about = "Empirical Christoffel functions: rank curves, densities, noise sweeps")]
pub struct Cli {
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw points on a surface and write them as CSV.
    Sample(SampleArgs),
    /// Numerical rank of the moment matrix per degree, with a dimension fit.
    RankCurve(RankCurveArgs),
    /// Normalized Christoffel function of an on-surface sample over a grid.
    Density(DensityArgs),
    /// Christoffel function of noisy copies of a cloud on an ambient grid.
    Perturb(PerturbArgs),
    /// Christoffel function and kernel diagonal at given points.
    ChristoffelEval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceName {
    Cube,
    Sphere,
    Torus,
    Tvscreen,
    Circle,
    Bitorus,
}

impl SurfaceName {
    pub fn spec(self, p: Option<usize>) -> Result<SurfaceSpec> {
        let fixed = |dim: usize, spec: SurfaceSpec| match p {
            Some(q) if q != dim => Err(Error::InvalidArgument(format!(
                "surface {} lives in dimension {dim}, not {q}",
                spec.name()
            ))),
            _ => Ok(spec),
        };
        match self {
            SurfaceName::Cube => Ok(SurfaceSpec::Cube { p: p.unwrap_or(3) }),
            SurfaceName::Sphere => Ok(SurfaceSpec::Sphere { p: p.unwrap_or(3) }),
            SurfaceName::Torus => fixed(3, SurfaceSpec::standard_torus()),
            SurfaceName::Tvscreen => fixed(3, SurfaceSpec::TvScreen),
            SurfaceName::Circle => fixed(2, SurfaceSpec::Circle),
            SurfaceName::Bitorus => fixed(4, SurfaceSpec::BiTorus),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisArg {
    Chebyshev,
    Monomial,
}

impl From<BasisArg> for BasisKind {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Chebyshev => BasisKind::TensorChebyshev,
            BasisArg::Monomial => BasisKind::Monomial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedArg {
    Circle,
    Bitorus,
}

impl From<EmbedArg> for AngleEmbedding {
    fn from(e: EmbedArg) -> Self {
        match e {
            EmbedArg::Circle => AngleEmbedding::Circle,
            EmbedArg::Bitorus => AngleEmbedding::BiTorus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Json,
    Csv,
}

/// Basis and rank threshold shared by the analysis commands.
#[derive(Debug, Clone, Args)]
pub struct SpectralArgs {
    #[arg(long, value_enum, default_value_t = BasisArg::Chebyshev)]
    pub basis: BasisArg,
    /// Rank cut-off on singular values of the scaled design matrix.
    #[arg(long, default_value_t = 1e-10)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Relative)]
    pub threshold_mode: ModeArg,
}

impl SpectralArgs {
    pub fn threshold(&self) -> Result<Threshold> {
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(Error::InvalidArgument("threshold must be finite and non-negative".into()));
        }
        Ok(match self.threshold_mode {
            ModeArg::Relative => Threshold::relative(self.threshold),
            ModeArg::Absolute => Threshold::absolute(self.threshold),
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub surface: SurfaceName,
    /// Ambient dimension for the cube and sphere.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RankCurveArgs {
    pub input: PathBuf,
    /// Degree range `a..b` (inclusive) or a comma-separated list.
    #[arg(long, default_value = "1..6")]
    pub degrees: String,
    #[command(flatten)]
    pub spectral: SpectralArgs,
    /// Relative rms residual below which a Hilbert fit counts as exact.
    #[arg(long, default_value_t = christoffel::dimension::DEFAULT_REL_FIT_TOL)]
    pub rel_fit_tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where the input points come from: a CSV of coordinates or of angles.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    pub input: PathBuf,
    /// Read columns as angles and embed them with `(cos, sin)` per angle.
    #[arg(long, value_enum)]
    pub embed: Option<EmbedArg>,
    /// Angles are in degrees rather than radians.
    #[arg(long, requires = "embed")]
    pub angles_in_degrees: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Support of the sample; implied by `--embed`.
    #[arg(long, value_enum)]
    pub surface: Option<SurfaceName>,
    #[arg(long, default_value_t = 4)]
    pub degree: usize,
    /// Grid resolution `A` or `AxB`; per-surface default when omitted.
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    pub spectral: SpectralArgs,
    /// Long-format grid CSV; not written when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary; standard output when omitted.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Also write the moment matrix in the binary cache format.
    #[arg(long)]
    pub save_moments: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PerturbArgs {
    pub input: PathBuf,
    /// Comma-separated, strictly decreasing noise scales.
    #[arg(long, allow_hyphen_values = true)]
    pub sigmas: String,
    #[arg(long, default_value_t = 6)]
    pub degree: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = -1.5, allow_hyphen_values = true)]
    pub grid_lo: f64,
    #[arg(long, default_value_t = 1.5, allow_hyphen_values = true)]
    pub grid_hi: f64,
    /// Grid points per axis of the ambient box.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    #[command(flatten)]
    pub spectral: SpectralArgs,
    /// Directory for `reference.csv`, `level_XX.csv` and `summary.json`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Point cloud CSV (ignored with `--moments`).
    #[arg(required_unless_present = "moments")]
    pub input: Option<PathBuf>,
    /// Moment matrix cache written by `--save-moments`.
    #[arg(long, conflicts_with = "input")]
    pub moments: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub degree: usize,
    /// Query point `c1,c2,...`; repeat for several points.
    #[arg(long = "x", required = true, allow_hyphen_values = true)]
    pub x: Vec<String>,
    #[command(flatten)]
    pub spectral: SpectralArgs,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub save_moments: Option<PathBuf>,
}

/// Parses `a..b` (inclusive) or `a,b,c`.
pub fn parse_degrees(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("cannot parse degree list {s:?}"));
    let s = s.trim();
    let degrees: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if degrees.is_empty() || degrees.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("degrees must be strictly increasing".into()));
    }
    Ok(degrees)
}

/// Parses a comma-separated list of floats; an empty list is an error.
pub fn parse_floats(s: &str, what: &str) -> Result<Vec<f64>> {
    let values = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("cannot parse {what} entry {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::InvalidArgument(format!("empty {what} list")));
    }
    Ok(values)
}

/// Parses `A` or `AxB`.
pub fn parse_resolution(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidArgument(format!("cannot parse grid resolution {s:?}"));
    match s.split_once(['x', 'X']) {
        Some((a, b)) => Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)),
        None => {
            let a = s.trim().parse().map_err(|_| bad())?;
            Ok((a, a))
        }
    }
}

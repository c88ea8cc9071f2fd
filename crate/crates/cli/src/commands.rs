use std::fs;
use std::path::{Path, PathBuf};

use christoffel::christoffel::ChristoffelEvaluator;
use christoffel::density::{estimate_density, DensityOptions, DensitySummary};
use christoffel::dimension::{estimate_dimension, rank_curve as compute_rank_curve, DimensionEstimate, RankCurve};
use christoffel::geometry::{embed_angles, make_box_grid, make_grid, sample_with, AngleEmbedding, SurfaceSpec};
use christoffel::io::{
    read_csv_file, read_moment_cache_file, read_point_cloud, write_moment_cache_file, write_point_cloud,
};
use christoffel::moments::{MomentMatrix, Normalization, PointCloud, Threshold};
use christoffel::par::Execution;
use christoffel::perturbation::{noise_sweep, NoiseLadder, NoiseLevel, SweepOptions};
use christoffel::{Error, Result};
use serde::Serialize;

use crate::args::{
    parse_degrees, parse_floats, parse_resolution, BasisArg, DensityArgs, EmbedArg, EvalArgs, FormatArg, InputArgs,
    ModeArg, PerturbArgs, RankCurveArgs, SampleArgs, SpectralArgs, SurfaceName,
};
use crate::output::{coordinate_names, sink, write_json, CsvOut, FORMAT_VERSION};

/// Everything needed to reproduce a run, echoed into every JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moments: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embed: Option<EmbedArg>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub angles_in_degrees: bool,
    pub degrees: Vec<usize>,
    pub basis: BasisArg,
    pub threshold: f64,
    pub threshold_mode: ModeArg,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_fit_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub format: FormatArg,
}

impl RunConfig {
    fn new(subcommand: &'static str, spectral: &SpectralArgs, degrees: Vec<usize>) -> Self {
        Self {
            subcommand,
            input: None,
            moments: None,
            surface: None,
            embed: None,
            angles_in_degrees: false,
            degrees,
            basis: spectral.basis,
            threshold: spectral.threshold,
            threshold_mode: spectral.threshold_mode,
            rel_fit_tol: None,
            grid: None,
            sigmas: None,
            seed: None,
            out: None,
            format: FormatArg::Json,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridConfig {
    Surface { resolution: (usize, usize) },
    AmbientBox { lo: f64, hi: f64, per_axis: usize },
}

pub fn sample(a: SampleArgs, exec: Execution) -> Result<()> {
    let spec = a.surface.spec(a.p)?;
    let cloud = sample_with(&spec, a.n, a.seed, exec)?;
    write_point_cloud(&cloud, sink(a.out.as_deref())?)
}

#[derive(Serialize)]
struct RankCurveReport<'a> {
    format_version: &'static str,
    config: &'a RunConfig,
    n: usize,
    p: usize,
    curve: &'a RankCurve,
    estimate: &'a DimensionEstimate,
    selected_dimension: usize,
    reliable: bool,
}

pub fn rank_curve(a: RankCurveArgs, exec: Execution) -> Result<()> {
    let degrees = parse_degrees(&a.degrees)?;
    let threshold = a.spectral.threshold()?;
    let cloud = read_point_cloud(&a.input)?;
    let curve = compute_rank_curve(&cloud, &degrees, a.spectral.basis.into(), threshold, exec)?;
    let estimate = estimate_dimension(&curve, cloud.dim(), a.rel_fit_tol)?;
    let mut config = RunConfig::new("rank-curve", &a.spectral, degrees);
    config.input = Some(a.input);
    config.rel_fit_tol = Some(a.rel_fit_tol);
    config.out = a.out.clone();
    let report = RankCurveReport {
        format_version: FORMAT_VERSION,
        config: &config,
        n: cloud.len(),
        p: cloud.dim(),
        curve: &curve,
        estimate: &estimate,
        selected_dimension: estimate.selected_dimension,
        reliable: estimate.reliable,
    };
    write_json(&report, a.out.as_deref())
}

/// Reads the input CSV, embedding angle columns when asked.
fn load_input(input: &InputArgs) -> Result<PointCloud> {
    let Some(embed) = input.embed else {
        return read_point_cloud(&input.input);
    };
    let table = read_csv_file(&input.input)?;
    if table.rows.is_empty() {
        return Err(Error::Csv {
            line: 0,
            message: "no data rows".into(),
        });
    }
    let angles: Vec<Vec<f64>> = if input.angles_in_degrees {
        table.rows.iter().map(|r| r.iter().map(|t| t.to_radians()).collect()).collect()
    } else {
        table.rows
    };
    embed_angles(&angles, embed.into())
}

fn default_resolution(spec: &SurfaceSpec) -> (usize, usize) {
    match spec {
        SurfaceSpec::Circle => (512, 1),
        SurfaceSpec::BiTorus => (64, 64),
        _ => (72, 36),
    }
}

#[derive(Serialize)]
struct DensityReport<'a> {
    format_version: &'static str,
    config: &'a RunConfig,
    summary: DensitySummary,
    grid_points: usize,
    on_support_points: usize,
}

pub fn density(a: DensityArgs, exec: Execution) -> Result<()> {
    let surface_name = match (a.input.embed, a.surface) {
        (Some(e), s) => {
            let implied = match e {
                EmbedArg::Circle => SurfaceName::Circle,
                EmbedArg::Bitorus => SurfaceName::Bitorus,
            };
            if s.is_some_and(|s| s != implied) {
                return Err(Error::InvalidArgument(format!(
                    "--embed {} contradicts --surface",
                    AngleEmbedding::from(e).surface().name()
                )));
            }
            implied
        }
        (None, Some(s)) => s,
        (None, None) => return Err(Error::InvalidArgument("--surface is required without --embed".into())),
    };
    let threshold = a.spectral.threshold()?;
    let cloud = load_input(&a.input)?;
    let spec = surface_name.spec(Some(cloud.dim()))?;
    let resolution = match &a.grid {
        Some(g) => parse_resolution(g)?,
        None => default_resolution(&spec),
    };
    let grid = make_grid(&spec, resolution)?;
    let opts = DensityOptions {
        basis: a.spectral.basis.into(),
        threshold,
        exec,
        ..DensityOptions::default()
    };
    let est = estimate_density(&cloud, &spec, a.degree, &grid, &opts)?;

    if let Some(path) = &a.save_moments {
        let m = MomentMatrix::from_cloud(&cloud, est.evaluator.basis(), Normalization::MeanOverN, exec)?;
        write_moment_cache_file(&m, path)?;
    }

    if let Some(path) = &a.out {
        let mut header = grid.param_names.clone();
        header.extend(coordinate_names(cloud.dim()));
        header.extend(["density", "lambda", "kernel_residual"].map(String::from));
        let mut csv = CsvOut::create(Some(path), &header)?;
        let mut row = Vec::with_capacity(header.len());
        for (i, x) in grid.points.points().enumerate() {
            row.clear();
            row.extend_from_slice(&grid.params[i]);
            row.extend_from_slice(x);
            let l = est.lambdas[i];
            row.extend([est.values[i], l.value, l.kernel_residual]);
            csv.row(&row)?;
        }
        csv.finish()?;
    }

    let mut config = RunConfig::new("density", &a.spectral, vec![a.degree]);
    config.input = Some(a.input.input.clone());
    config.surface = Some(surface_name);
    config.embed = a.input.embed;
    config.angles_in_degrees = a.input.angles_in_degrees;
    config.grid = Some(GridConfig::Surface { resolution });
    config.out = a.out.clone();
    config.format = FormatArg::Csv;
    let report = DensityReport {
        format_version: FORMAT_VERSION,
        config: &config,
        summary: est.summary(),
        grid_points: grid.len(),
        on_support_points: est.lambdas.iter().filter(|l| l.on_support(est.evaluator.kernel_tol())).count(),
    };
    write_json(&report, a.summary.as_deref())
}

#[derive(Serialize)]
struct LevelReport {
    sigma: f64,
    rank: usize,
    deviation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<String>,
}

#[derive(Serialize)]
struct PerturbReport<'a> {
    format_version: &'static str,
    config: &'a RunConfig,
    degree: usize,
    n: usize,
    grid_points: usize,
    reference_rank: usize,
    levels: Vec<LevelReport>,
}

fn write_level(path: &Path, grid_points: &PointCloud, level: &NoiseLevel) -> Result<()> {
    let mut header = coordinate_names(grid_points.dim());
    header.extend(["lambda", "pinv_lambda", "kernel_residual"].map(String::from));
    let mut csv = CsvOut::create(Some(path), &header)?;
    let mut row = Vec::with_capacity(header.len());
    for (x, l) in grid_points.points().zip(&level.lambdas) {
        row.clear();
        row.extend_from_slice(x);
        row.extend([l.value, l.pinv_value, l.kernel_residual]);
        csv.row(&row)?;
    }
    csv.finish()
}

pub fn perturb(a: PerturbArgs, exec: Execution) -> Result<()> {
    let sigmas = parse_floats(&a.sigmas, "sigma")?;
    let threshold = a.spectral.threshold()?;
    if !(a.grid_lo.is_finite() && a.grid_hi.is_finite() && a.grid_lo < a.grid_hi) {
        return Err(Error::InvalidArgument("grid bounds must satisfy lo < hi".into()));
    }
    let base = read_point_cloud(&a.input)?;
    let n = base.len();
    let ladder = NoiseLadder::new(base, sigmas.clone(), a.seed)?;
    let grid = make_box_grid(ladder.base.dim(), a.grid_lo, a.grid_hi, a.grid)?;
    let opts = SweepOptions {
        basis: a.spectral.basis.into(),
        threshold,
        exec,
        ..SweepOptions::default()
    };
    let sweep = noise_sweep(&ladder, a.degree, &grid, &opts)?;

    let mut levels = Vec::with_capacity(sweep.levels.len());
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir)?;
        write_level(&dir.join("reference.csv"), &grid.points, &sweep.reference)?;
    }
    for (k, level) in sweep.levels.iter().enumerate() {
        let file = match &a.out_dir {
            Some(dir) => {
                let name = format!("level_{k:02}.csv");
                write_level(&dir.join(&name), &grid.points, level)?;
                Some(name)
            }
            None => None,
        };
        levels.push(LevelReport {
            sigma: level.sigma,
            rank: level.rank,
            deviation: level.deviation,
            file,
        });
    }

    let mut config = RunConfig::new("perturb", &a.spectral, vec![a.degree]);
    config.input = Some(a.input.clone());
    config.grid = Some(GridConfig::AmbientBox {
        lo: a.grid_lo,
        hi: a.grid_hi,
        per_axis: a.grid,
    });
    config.sigmas = Some(sigmas);
    config.seed = Some(a.seed);
    config.out = a.out_dir.clone();
    let report = PerturbReport {
        format_version: FORMAT_VERSION,
        config: &config,
        degree: a.degree,
        n,
        grid_points: grid.len(),
        reference_rank: sweep.reference.rank,
        levels,
    };
    write_json(&report, a.out_dir.as_ref().map(|d| d.join("summary.json")).as_deref())
}

#[derive(Serialize)]
struct PointReport {
    x: Vec<f64>,
    lambda: f64,
    pinv_lambda: f64,
    kappa: f64,
    kernel_residual: f64,
    on_support: bool,
}

#[derive(Serialize)]
struct EvalReport<'a> {
    format_version: &'static str,
    config: &'a RunConfig,
    degree: usize,
    n: usize,
    rank: usize,
    points: Vec<PointReport>,
}

fn evaluator_for(a: &EvalArgs, threshold: Threshold, exec: Execution) -> Result<(MomentMatrix, ChristoffelEvaluator)> {
    let m = match (&a.moments, &a.input) {
        (Some(path), _) => {
            let m = read_moment_cache_file(path)?;
            if m.degree() < a.degree {
                return Err(Error::InvalidArgument(format!(
                    "cached moments have degree {}, asked for {}",
                    m.degree(),
                    a.degree
                )));
            }
            let basis = m.basis().truncate(a.degree);
            let s = basis.len();
            let entries = m.entries().view((0, 0), (s, s)).into_owned();
            MomentMatrix::from_entries(entries, basis, m.sample_count(), m.normalization())?
        }
        (None, Some(input)) => {
            let cloud = read_point_cloud(input)?;
            let basis = christoffel::polybasis::GradedBasis::new(
                cloud.dim(),
                a.degree,
                a.spectral.basis.into(),
                cloud.default_scale_box(),
            )?;
            MomentMatrix::from_cloud(&cloud, &basis, Normalization::MeanOverN, exec)?
        }
        (None, None) => return Err(Error::InvalidArgument("an input CSV or --moments is required".into())),
    };
    let ev = ChristoffelEvaluator::from_moments(&m, threshold)?;
    Ok((m, ev))
}

pub fn christoffel_eval(a: EvalArgs, exec: Execution) -> Result<()> {
    let threshold = a.spectral.threshold()?;
    let (m, ev) = evaluator_for(&a, threshold, exec)?;
    if let Some(path) = &a.save_moments {
        write_moment_cache_file(&m, path)?;
    }
    let p = m.basis().ambient_dim();
    let mut points = Vec::with_capacity(a.x.len());
    for spec in &a.x {
        let x = parse_floats(spec, "coordinate")?;
        if x.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("query point {spec:?} is not finite")));
        }
        let l = ev.lambda(&x)?;
        let kappa = ev.cd_kernel(&x, &x)?;
        points.push(PointReport {
            on_support: l.on_support(ev.kernel_tol()),
            lambda: l.value,
            pinv_lambda: l.pinv_value,
            kappa,
            kernel_residual: l.kernel_residual,
            x,
        });
    }

    match a.format {
        FormatArg::Csv => {
            let mut header = coordinate_names(p);
            header.extend(["lambda", "pinv_lambda", "kappa", "kernel_residual"].map(String::from));
            let mut csv = CsvOut::create(a.out.as_deref(), &header)?;
            for r in &points {
                let mut row = r.x.clone();
                row.extend([r.lambda, r.pinv_lambda, r.kappa, r.kernel_residual]);
                csv.row(&row)?;
            }
            csv.finish()
        }
        FormatArg::Json => {
            let mut config = RunConfig::new("christoffel-eval", &a.spectral, vec![a.degree]);
            config.input = a.input.clone();
            config.moments = a.moments.clone();
            config.out = a.out.clone();
            let report = EvalReport {
                format_version: FORMAT_VERSION,
                config: &config,
                degree: a.degree,
                n: m.sample_count(),
                rank: ev.rank(),
                points,
            };
            write_json(&report, a.out.as_deref())
        }
    }
}

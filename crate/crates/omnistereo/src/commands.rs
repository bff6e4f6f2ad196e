//! Subcommand implementations shared by the binary and the tests.

use std::fs;
use std::path::{Path, PathBuf};

use omnistereo_core::{
    calibrate_extrinsics, evaluate_cell, preset, runtime_accept, simulate_scene, summarize, synthesize_matches,
    triangulate_pseudo, BenchConfig, BenchSummary, CalibrationError, ChessboardSpec, DepthReport, FisheyeIntrinsics,
    MismatchZone, NoiseGrid, NoiseModel, SimulationConfig, VisionMode,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::formats::{self, FormatError, POINTS_HEADER};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_OPTIMIZATION: i32 = 3;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Input(String),
    #[error("calibration failed: {0}")]
    Optimization(CalibrationError),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Optimization(_) => EXIT_OPTIMIZATION,
            _ => EXIT_INPUT,
        }
    }

    fn input(msg: impl ToString) -> Self {
        Self::Input(msg.to_string())
    }
}

impl From<CalibrationError> for CommandError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::DivergedOptimization { .. } | CalibrationError::DegenerateGeometry => {
                Self::Optimization(e)
            }
            other => Self::Input(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CommandError>;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    Ok(formats::write_file(path, contents.as_ref())?)
}

/// Intrinsics from `path`, or the synthetic default when absent.
pub fn intrinsics_or_default(path: Option<&Path>) -> Result<FisheyeIntrinsics> {
    match path {
        Some(p) => Ok(formats::load_intrinsics(p)?),
        None => Ok(FisheyeIntrinsics::default_synthetic()),
    }
}

pub struct CalibrateArgs {
    pub left: Option<PathBuf>,
    pub right: Option<PathBuf>,
    pub corners: PathBuf,
    pub rows: usize,
    pub cols: usize,
    pub square_mm: f64,
    pub out: PathBuf,
}

pub fn calibrate(args: &CalibrateArgs) -> Result<String> {
    let spec = ChessboardSpec::new(args.rows, args.cols, args.square_mm)?;
    let intr_left = intrinsics_or_default(args.left.as_deref())?;
    let intr_right = intrinsics_or_default(args.right.as_deref())?;
    let views = formats::load_corners(&args.corners, &spec)?;
    let cal = calibrate_extrinsics(&views, &intr_left, &intr_right, &spec)?;
    let json = formats::report_to_json(&cal);
    write(&args.out, &json)?;
    Ok(json)
}

pub struct TriangulateArgs {
    pub left: Option<PathBuf>,
    pub right: Option<PathBuf>,
    pub rig: PathBuf,
    pub matches: PathBuf,
    pub tau: f64,
    pub out: PathBuf,
}

/// One output row per match; failed pairs get NaN coordinates and
/// `accepted = false`.
pub fn triangulate(args: &TriangulateArgs) -> Result<usize> {
    if !(args.tau > 0.0) {
        return Err(CommandError::input("tau must be positive"));
    }
    let intr_left = intrinsics_or_default(args.left.as_deref())?;
    let intr_right = intrinsics_or_default(args.right.as_deref())?;
    let rig = formats::load_rig(&args.rig)?;
    let set = formats::load_matches(&args.matches, &intr_left, &intr_right)?;

    let rows: Vec<String> = set
        .pairs
        .par_iter()
        .map(|pair| {
            let res = pair.rays(&intr_left, &intr_right, &rig).ok().and_then(|(l, r)| triangulate_pseudo(&l, &r).ok());
            let (p, skew, ok) = match res {
                Some(res) => (res.point, res.skew_distance, runtime_accept(&res, args.tau)),
                None => (omnistereo_core::Vec3::repeat(f64::NAN), f64::NAN, false),
            };
            format!(
                "{},{},{},{},{},{},{},{},{}\n",
                pair.left.u, pair.left.v, pair.right.u, pair.right.v, p.x, p.y, p.z, skew, ok
            )
        })
        .collect();
    let mut out = String::from(POINTS_HEADER) + "\n";
    rows.iter().for_each(|r| out += r);
    write(&args.out, out)?;
    Ok(rows.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZonesOutput {
    pub name: String,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "O")]
    pub o: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub total_fov: f64,
}

impl From<&VisionMode> for ZonesOutput {
    fn from(mode: &VisionMode) -> Self {
        Self {
            name: mode.name.clone(),
            h: mode.fov,
            o: mode.overlap,
            s: mode.zones.stereo,
            m: mode.zones.monocular,
            b: mode.zones.blind,
            total_fov: mode.total_fov(),
        }
    }
}

pub fn zones(preset_name: Option<&str>, fov: f64, overlap: Option<f64>) -> Result<String> {
    let mode = match (preset_name, overlap) {
        (Some(name), None) => preset(name).map_err(CommandError::input)?,
        (None, Some(o)) => VisionMode::new("custom", fov, o).map_err(CommandError::input)?,
        (Some(_), Some(_)) => return Err(CommandError::input("give either a preset or an overlap, not both")),
        (None, None) => return Err(CommandError::input("give a preset or an overlap angle")),
    };
    Ok(serde_json::to_string_pretty(&ZonesOutput::from(&mode)).expect("plain numbers serialize") + "\n")
}

/// Evaluates the grid row by row in parallel; the result is identical to the
/// sequential sweep.
pub fn run_grid(cfg: &BenchConfig) -> Result<NoiseGrid> {
    cfg.validate().map_err(CommandError::input)?;
    let (xs, ys) = (cfg.x_axis(), cfg.y_axis());
    let cells = ys.par_iter().flat_map_iter(|&y| xs.iter().map(move |&x| evaluate_cell(cfg, x, y))).collect();
    Ok(NoiseGrid { xs, ys, cells })
}

#[derive(Debug, Clone, Serialize)]
struct MethodJson {
    passed: usize,
    pass_fraction: f64,
    max_abs_err_passing_mm: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct ZoneJson {
    zone: &'static str,
    cells: usize,
    pseudo: MethodJson,
    midpoint: MethodJson,
    runtime_accept_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SummaryJson {
    cells: usize,
    zones: Vec<ZoneJson>,
    pseudo_monotone_every_slice: bool,
    non_monotone_slices: Vec<f64>,
    degenerate_cells: usize,
    pseudo_antisymmetry_slight: Option<f64>,
}

pub fn summary_json(grid: &NoiseGrid, summary: &BenchSummary) -> String {
    let method = |m: &omnistereo_core::simbench::MethodStats| MethodJson {
        passed: m.passed,
        pass_fraction: m.pass_fraction,
        max_abs_err_passing_mm: m.max_abs_err_passing,
    };
    let json = SummaryJson {
        cells: grid.cells.len(),
        zones: MismatchZone::ALL
            .iter()
            .filter_map(|z| summary.zone(*z))
            .map(|z| ZoneJson {
                zone: z.zone.as_str(),
                cells: z.cells,
                pseudo: method(&z.pseudo),
                midpoint: method(&z.midpoint),
                runtime_accept_fraction: z.runtime_accept_fraction,
            })
            .collect(),
        pseudo_monotone_every_slice: summary.pseudo_monotone,
        non_monotone_slices: summary.pseudo_slices.iter().filter(|s| !s.monotone).map(|s| s.y).collect(),
        degenerate_cells: summary.degenerate_cells,
        pseudo_antisymmetry_slight: summary.pseudo_antisymmetry_slight,
    };
    serde_json::to_string_pretty(&json).expect("plain numbers serialize") + "\n"
}

pub struct BenchArgs {
    pub config: BenchConfig,
    pub out: PathBuf,
    pub summary: Option<PathBuf>,
    pub heatmap_dir: Option<PathBuf>,
}

pub fn bench(args: &BenchArgs) -> Result<(NoiseGrid, BenchSummary)> {
    let grid = run_grid(&args.config)?;
    let mut csv = Vec::with_capacity(grid.cells.len() * 120);
    formats::write_bench_csv(&grid, &mut csv).expect("writing to memory");
    write(&args.out, csv)?;
    let summary = summarize(&grid);
    if let Some(path) = &args.summary {
        write(path, summary_json(&grid, &summary))?;
    }
    if let Some(dir) = &args.heatmap_dir {
        fs::create_dir_all(dir).map_err(|source| FormatError::Io { path: dir.clone(), source })?;
        let e_max = args.config.e_max;
        write(&dir.join("pseudo.pgm"), formats::heatmap_pgm(&grid, e_max, |c| c.err_pseudo))?;
        write(&dir.join("midpoint.pgm"), formats::heatmap_pgm(&grid, e_max, |c| c.err_midpoint))?;
    }
    Ok((grid, summary))
}

pub struct SimulateArgs {
    pub left: Option<PathBuf>,
    pub right: Option<PathBuf>,
    pub rig: PathBuf,
    pub scene: PathBuf,
    pub noise: NoiseModel,
    pub seed: u64,
    pub tau: f64,
    pub out: PathBuf,
    pub report: Option<PathBuf>,
    pub matches_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
struct ReportJson {
    seed: u64,
    points: usize,
    skipped: usize,
    failed: usize,
    beyond_display_range: usize,
    runtime_accepted: usize,
    error_mm: ErrorJson,
}

#[derive(Debug, Clone, Serialize)]
struct ErrorJson {
    max: f64,
    mean: f64,
    rms: f64,
    median: f64,
}

pub fn simulate(args: &SimulateArgs) -> Result<DepthReport> {
    if !(args.tau > 0.0) {
        return Err(CommandError::input("tau must be positive"));
    }
    let intr_left = intrinsics_or_default(args.left.as_deref())?;
    let intr_right = intrinsics_or_default(args.right.as_deref())?;
    let rig = formats::load_rig(&args.rig)?;
    let scene = formats::load_scene(&args.scene)?;
    let config = SimulationConfig { tau: args.tau, ..SimulationConfig::default() };

    if let Some(path) = &args.matches_out {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let synth = synthesize_matches(&scene, &rig, &intr_left, &intr_right, args.noise, &mut rng)
            .map_err(CommandError::input)?;
        write(path, formats::matches_to_csv(&synth.matches))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let report = simulate_scene(&scene, &rig, &intr_left, &intr_right, args.noise, &config, &mut rng)
        .map_err(CommandError::input)?;

    let mut csv =
        String::from("index,X_true,Y_true,Z_true,X,Y,Z,error_mm,range_mm,skew_mm,accepted,beyond_display_range\n");
    for p in &report.points {
        csv += &format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            p.scene_index,
            p.truth.x,
            p.truth.y,
            p.truth.z,
            p.estimate.x,
            p.estimate.y,
            p.estimate.z,
            p.error_mm,
            p.range_mm,
            p.skew_mm,
            p.runtime_accepted,
            p.beyond_display_range
        );
    }
    write(&args.out, csv)?;
    if let Some(path) = &args.report {
        let s = &report.error_stats;
        let json = ReportJson {
            seed: args.seed,
            points: report.points.len(),
            skipped: report.skipped,
            failed: report.failed,
            beyond_display_range: report.beyond_display_range,
            runtime_accepted: report.points.iter().filter(|p| p.runtime_accepted).count(),
            error_mm: ErrorJson { max: s.max, mean: s.mean, rms: s.rms, median: s.median },
        };
        write(path, serde_json::to_string_pretty(&json).expect("plain numbers serialize") + "\n")?;
    }
    Ok(report)
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use omnistereo::commands::{self, BenchArgs, CalibrateArgs, SimulateArgs, TriangulateArgs};
use omnistereo::{thread_count, EXIT_INPUT};
use omnistereo_core::{BenchConfig, NoiseModel, Vec3, DEFAULT_FOV_DEG};

#[derive(Parser)]
#[command(name = "omnistereo", version, about = "Nonrectified omnidirectional stereo toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Cameras {
    /// Left camera intrinsics JSON (synthetic equidistant default if absent)
    #[arg(long)]
    left_intrinsics: Option<PathBuf>,
    /// Right camera intrinsics JSON (synthetic equidistant default if absent)
    #[arg(long)]
    right_intrinsics: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Stereo extrinsics from chessboard corners
    Calibrate {
        #[command(flatten)]
        cameras: Cameras,
        /// Corner CSV: view,camera,i,j,u,v
        #[arg(long)]
        corners: PathBuf,
        /// Interior corner rows
        #[arg(long)]
        rows: usize,
        /// Interior corner columns
        #[arg(long)]
        cols: usize,
        /// Square size, mm
        #[arg(long)]
        square: f64,
        /// Report JSON (also usable as a rig file)
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Point cloud from a match CSV
    Triangulate {
        #[command(flatten)]
        cameras: Cameras,
        /// Rig JSON: right camera pose in the left frame
        #[arg(long)]
        rig: PathBuf,
        /// Match CSV: uL,vL,uR,vR[,confidence]
        #[arg(long)]
        matches: PathBuf,
        /// Runtime acceptance ratio skew/range
        #[arg(long, default_value_t = 0.01)]
        tau: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Stereo / monocular / blind zone angles
    Zones {
        /// herbivorous, gecko, carnivorous, spider, human or stick_bug
        #[arg(long)]
        preset: Option<String>,
        /// Horizontal field of view of one camera, degrees
        #[arg(long = "H", default_value_t = DEFAULT_FOV_DEG)]
        fov: f64,
        /// Overlapped field angle, degrees
        #[arg(long = "O")]
        overlap: Option<f64>,
    },
    /// Direction-noise sweep over both triangulation methods
    Bench {
        #[arg(long, default_value_t = -0.02, allow_negative_numbers = true)]
        x_min: f64,
        #[arg(long, default_value_t = 0.02, allow_negative_numbers = true)]
        x_max: f64,
        #[arg(long, default_value_t = -0.02, allow_negative_numbers = true)]
        y_min: f64,
        #[arg(long, default_value_t = 0.02, allow_negative_numbers = true)]
        y_max: f64,
        #[arg(long, default_value_t = 0.0005)]
        step: f64,
        /// Filter bound on |range error|, mm
        #[arg(long, default_value_t = 500.0)]
        e_max: f64,
        #[arg(long, default_value_t = 0.01)]
        tau: f64,
        /// Target point x,y,z in mm
        #[arg(long, value_delimiter = ',', num_args = 3, allow_negative_numbers = true, default_values_t = [-3000.0, 2000.0, 5000.0])]
        target: Vec<f64>,
        /// Cell CSV
        #[arg(long, short)]
        out: PathBuf,
        /// Summary JSON
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Directory for pseudo.pgm and midpoint.pgm
        #[arg(long)]
        heatmaps: Option<PathBuf>,
    },
    /// Synthetic scene through matching and triangulation
    Simulate {
        #[command(flatten)]
        cameras: Cameras,
        #[arg(long)]
        rig: PathBuf,
        /// Scene CSV: x,y,z in mm, left camera frame
        #[arg(long)]
        scene: PathBuf,
        /// Gaussian pixel noise, px
        #[arg(long, conflicts_with_all = ["dir_x", "dir_y"])]
        pixel_sigma: Option<f64>,
        /// Direction noise added to the right ray x component
        #[arg(long, allow_negative_numbers = true)]
        dir_x: Option<f64>,
        /// Direction noise added to the right ray y component
        #[arg(long, allow_negative_numbers = true)]
        dir_y: Option<f64>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.01)]
        tau: f64,
        /// Per-point CSV
        #[arg(long, short)]
        out: PathBuf,
        /// Summary JSON
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also write the synthesized match CSV
        #[arg(long)]
        matches_out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> commands::Result<()> {
    match cli.command {
        Command::Calibrate { cameras, corners, rows, cols, square, out } => {
            let args = CalibrateArgs {
                left: cameras.left_intrinsics,
                right: cameras.right_intrinsics,
                corners,
                rows,
                cols,
                square_mm: square,
                out,
            };
            print!("{}", commands::calibrate(&args)?);
        }
        Command::Triangulate { cameras, rig, matches, tau, out } => {
            let args = TriangulateArgs {
                left: cameras.left_intrinsics,
                right: cameras.right_intrinsics,
                rig,
                matches,
                tau,
                out,
            };
            let n = commands::triangulate(&args)?;
            eprintln!("triangulated {n} pairs");
        }
        Command::Zones { preset, fov, overlap } => {
            print!("{}", commands::zones(preset.as_deref(), fov, overlap)?);
        }
        Command::Bench { x_min, x_max, y_min, y_max, step, e_max, tau, target, out, summary, heatmaps } => {
            let config = BenchConfig {
                x_min,
                x_max,
                y_min,
                y_max,
                step,
                e_max,
                tau,
                target: Vec3::new(target[0], target[1], target[2]),
                ..BenchConfig::default()
            };
            let (grid, s) = commands::bench(&BenchArgs { config, out, summary, heatmap_dir: heatmaps })?;
            print!("{}", commands::summary_json(&grid, &s));
        }
        Command::Simulate { cameras, rig, scene, pixel_sigma, dir_x, dir_y, seed, tau, out, report, matches_out } => {
            let noise = match (pixel_sigma, dir_x, dir_y) {
                (Some(sigma), _, _) => NoiseModel::Pixel { sigma },
                (None, None, None) => NoiseModel::None,
                (None, x, y) => NoiseModel::Direction { x: x.unwrap_or(0.0), y: y.unwrap_or(0.0) },
            };
            let args = SimulateArgs {
                left: cameras.left_intrinsics,
                right: cameras.right_intrinsics,
                rig,
                scene,
                noise,
                seed,
                tau,
                out,
                report,
                matches_out,
            };
            let r = commands::simulate(&args)?;
            eprintln!(
                "{} points, {} skipped, {} failed, max error {:.6} mm",
                r.points.len(),
                r.skipped,
                r.failed,
                r.error_stats.max
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match thread_count(std::env::var("OMNISTEREO_THREADS").ok().as_deref()) {
        Ok(n) => n,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_INPUT as u8);
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Synthetic error study and end-to-end scene simulation.
//!
//! The noise sweep fixes two camera centres and a target, perturbs the unit
//! direction of the right ray by every `(x, y)` on a regular grid, and
//! records the signed range error of both triangulation methods. Cells are
//! independent, so callers may evaluate them in any order with
//! [`evaluate_cell`]; [`run_noise_grid`] is the sequential reference.

use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::camera_model::FisheyeIntrinsics;
use crate::matching::{perturb_direction, synthesize_matches, MatchError, NoiseModel};
use crate::triangulation::{
    classify_mismatch, runtime_accept, triangulate_midpoint, triangulate_pseudo, MismatchZone, Ray,
    TriangulationResult, DEFAULT_TAU,
};
use crate::{RigidTransform, Vec3};

/// Slack for ties when checking monotonicity of an error slice, mm.
pub const MONOTONE_TOL: f64 = 1e-9;
/// Estimates farther than this from the left camera are flagged, mm.
pub const DISPLAY_RANGE_MM: f64 = 5000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("grid step must be positive and finite")]
    InvalidStep,
    #[error("grid bounds are not ordered")]
    UnorderedBounds,
    #[error("error bound must be positive")]
    InvalidErrorBound,
    #[error("runtime acceptance ratio must be positive")]
    InvalidTau,
    #[error("target coincides with a camera origin")]
    DegenerateTarget,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub origin_left: Vec3,
    pub origin_right: Vec3,
    pub target: Vec3,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub step: f64,
    /// Cells with `|error| > e_max` fail the filter, mm.
    pub e_max: f64,
    /// Ratio used for the ground-truth-free runtime acceptance column.
    pub tau: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            origin_left: Vec3::new(-75.0, 0.0, 0.0),
            origin_right: Vec3::new(75.0, 0.0, 0.0),
            target: Vec3::new(-3000.0, 2000.0, 5000.0),
            x_min: -0.02,
            x_max: 0.02,
            y_min: -0.02,
            y_max: 0.02,
            step: 0.0005,
            e_max: 500.0,
            tau: DEFAULT_TAU,
        }
    }
}

/// Grid coordinates are snapped to 1e-12 so that decimal steps land exactly
/// on the decimal zone bounds.
fn snap(v: f64) -> f64 {
    libm::round(v * 1e12) / 1e12
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = libm::round((hi - lo) / step) as usize + 1;
    (0..n).map(|i| snap(lo + i as f64 * step)).filter(|v| *v <= hi + step * 1e-9).collect()
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(BenchError::InvalidStep);
        }
        let bounds = [self.x_min, self.x_max, self.y_min, self.y_max];
        if bounds.iter().any(|b| !b.is_finite()) || self.x_min > self.x_max || self.y_min > self.y_max {
            return Err(BenchError::UnorderedBounds);
        }
        if !(self.e_max > 0.0) {
            return Err(BenchError::InvalidErrorBound);
        }
        if !(self.tau > 0.0) {
            return Err(BenchError::InvalidTau);
        }
        if self.target == self.origin_left || self.target == self.origin_right {
            return Err(BenchError::DegenerateTarget);
        }
        Ok(())
    }

    pub fn x_axis(&self) -> Vec<f64> {
        axis(self.x_min, self.x_max, self.step)
    }

    pub fn y_axis(&self) -> Vec<f64> {
        axis(self.y_min, self.y_max, self.step)
    }

    fn true_range(&self) -> f64 {
        (self.target - self.origin_left).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchCell {
    pub x: f64,
    pub y: f64,
    pub zone: MismatchZone,
    /// Signed range error from the left camera, mm. NaN on degenerate cells.
    pub err_pseudo: f64,
    pub err_midpoint: f64,
    /// Euclidean distance to the target, mm.
    pub eucl_pseudo: f64,
    pub eucl_midpoint: f64,
    pub pass_pseudo: bool,
    pub pass_midpoint: bool,
    /// Pseudo result passes [`runtime_accept`] at `cfg.tau`.
    pub runtime_accepted: bool,
    pub degenerate: bool,
}

/// Evaluates one noise offset.
pub fn evaluate_cell(cfg: &BenchConfig, x: f64, y: f64) -> BenchCell {
    let zone = classify_mismatch(x, y);
    let mut cell = BenchCell {
        x,
        y,
        zone,
        err_pseudo: f64::NAN,
        err_midpoint: f64::NAN,
        eucl_pseudo: f64::NAN,
        eucl_midpoint: f64::NAN,
        pass_pseudo: false,
        pass_midpoint: false,
        runtime_accepted: false,
        degenerate: true,
    };
    let (Ok(left), Ok(exact_right)) =
        (Ray::through(cfg.origin_left, cfg.target), Ray::through(cfg.origin_right, cfg.target))
    else {
        return cell;
    };
    let Ok(right) = Ray::new(cfg.origin_right, perturb_direction(exact_right.dir(), x, y)) else {
        return cell;
    };
    let (Ok(pseudo), Ok(mid)) = (triangulate_pseudo(&left, &right), triangulate_midpoint(&left, &right)) else {
        return cell;
    };
    let range = cfg.true_range();
    let signed = |r: &TriangulationResult| r.range() - range;
    cell.err_pseudo = signed(&pseudo);
    cell.err_midpoint = signed(&mid);
    cell.eucl_pseudo = (pseudo.point - cfg.target).norm();
    cell.eucl_midpoint = (mid.point - cfg.target).norm();
    cell.pass_pseudo = cell.err_pseudo.abs() <= cfg.e_max;
    cell.pass_midpoint = cell.err_midpoint.abs() <= cfg.e_max;
    cell.runtime_accepted = runtime_accept(&pseudo, cfg.tau);
    cell.degenerate = pseudo.degenerate_plane;
    cell
}

/// Cells ordered by `y` (outer) then `x` (inner).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub cells: Vec<BenchCell>,
}

impl NoiseGrid {
    pub fn width(&self) -> usize {
        self.xs.len()
    }

    pub fn height(&self) -> usize {
        self.ys.len()
    }

    pub fn row(&self, iy: usize) -> &[BenchCell] {
        &self.cells[iy * self.xs.len()..(iy + 1) * self.xs.len()]
    }

    pub fn get(&self, ix: usize, iy: usize) -> &BenchCell {
        &self.cells[iy * self.xs.len() + ix]
    }
}

pub fn run_noise_grid(cfg: &BenchConfig) -> Result<NoiseGrid, BenchError> {
    cfg.validate()?;
    let (xs, ys) = (cfg.x_axis(), cfg.y_axis());
    let cells = ys.iter().flat_map(|&y| xs.iter().map(move |&x| evaluate_cell(cfg, x, y))).collect();
    Ok(NoiseGrid { xs, ys, cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MethodStats {
    pub passed: usize,
    pub pass_fraction: f64,
    /// Largest `|error|` among passing cells, mm.
    pub max_abs_err_passing: Option<f64>,
    pub mean_abs_err_passing: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneStats {
    pub zone: MismatchZone,
    pub cells: usize,
    pub pseudo: MethodStats,
    pub midpoint: MethodStats,
    /// Fraction of cells the runtime test accepts.
    pub runtime_accept_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceMonotonicity {
    pub y: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub zones: Vec<ZoneStats>,
    pub pseudo_slices: Vec<SliceMonotonicity>,
    pub pseudo_monotone: bool,
    pub degenerate_cells: usize,
    /// Largest `|e(x,y) + e(-x,-y)| / |e(x,y) - e(-x,-y)|` of the pseudo
    /// error over mirrored pairs inside the slightly mismatched zone; small
    /// values mean the error is odd to first order in the noise.
    pub pseudo_antisymmetry_slight: Option<f64>,
}

impl BenchSummary {
    pub fn zone(&self, zone: MismatchZone) -> Option<&ZoneStats> {
        self.zones.iter().find(|z| z.zone == zone)
    }
}

fn method_stats(cells: impl Iterator<Item = (bool, f64)> + Clone, total: usize) -> MethodStats {
    let passing = cells.filter(|(pass, _)| *pass).map(|(_, e)| e.abs());
    let passed = passing.clone().count();
    let max = passing.clone().fold(None, |m: Option<f64>, e| Some(m.map_or(e, |m| m.max(e))));
    let mean = (passed > 0).then(|| passing.sum::<f64>() / passed as f64);
    MethodStats {
        passed,
        pass_fraction: if total == 0 { 0.0 } else { passed as f64 / total as f64 },
        max_abs_err_passing: max,
        mean_abs_err_passing: mean,
    }
}

/// Non-strict monotonicity of the finite values of a slice.
pub fn is_monotone(values: impl Iterator<Item = f64> + Clone, tol: f64) -> bool {
    let finite = values.filter(|v| v.is_finite());
    let mut prev = None;
    let (mut up, mut down) = (true, true);
    for v in finite {
        if let Some(p) = prev {
            if v < p - tol {
                up = false;
            }
            if v > p + tol {
                down = false;
            }
        }
        prev = Some(v);
    }
    up || down
}

pub fn summarize(grid: &NoiseGrid) -> BenchSummary {
    let zones = MismatchZone::ALL
        .iter()
        .map(|&zone| {
            let members: Vec<&BenchCell> = grid.cells.iter().filter(|c| c.zone == zone).collect();
            let n = members.len();
            let accepted = members.iter().filter(|c| c.runtime_accepted).count();
            ZoneStats {
                zone,
                cells: n,
                pseudo: method_stats(members.iter().map(|c| (c.pass_pseudo, c.err_pseudo)), n),
                midpoint: method_stats(members.iter().map(|c| (c.pass_midpoint, c.err_midpoint)), n),
                runtime_accept_fraction: if n == 0 { 0.0 } else { accepted as f64 / n as f64 },
            }
        })
        .collect();

    let pseudo_slices: Vec<SliceMonotonicity> = (0..grid.height())
        .map(|iy| SliceMonotonicity {
            y: grid.ys[iy],
            monotone: is_monotone(grid.row(iy).iter().map(|c| c.err_pseudo), MONOTONE_TOL),
        })
        .collect();
    let pseudo_monotone = pseudo_slices.iter().all(|s| s.monotone);

    let mut antisym: Option<f64> = None;
    for cell in grid.cells.iter().filter(|c| c.zone == MismatchZone::SlightlyMismatched) {
        if cell.x == 0.0 && cell.y == 0.0 {
            continue;
        }
        let mirror = grid.cells.iter().find(|c| c.x == -cell.x && c.y == -cell.y);
        if let Some(m) = mirror {
            let odd = (cell.err_pseudo - m.err_pseudo).abs();
            let even = (cell.err_pseudo + m.err_pseudo).abs();
            if odd > 0.0 && odd.is_finite() && even.is_finite() {
                let ratio = even / odd;
                antisym = Some(antisym.map_or(ratio, |a| a.max(ratio)));
            }
        }
    }

    BenchSummary {
        zones,
        pseudo_slices,
        pseudo_monotone,
        degenerate_cells: grid.cells.iter().filter(|c| c.degenerate).count(),
        pseudo_antisymmetry_slight: antisym,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub tau: f64,
    pub display_range_mm: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { tau: DEFAULT_TAU, display_range_mm: DISPLAY_RANGE_MM }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthPoint {
    pub scene_index: usize,
    pub truth: Vec3,
    pub estimate: Vec3,
    /// Euclidean error, mm.
    pub error_mm: f64,
    /// Signed range error from the left camera, mm.
    pub range_error_mm: f64,
    pub range_mm: f64,
    pub skew_mm: f64,
    pub runtime_accepted: bool,
    /// Estimated range exceeds the display range.
    pub beyond_display_range: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorStats {
    pub count: usize,
    pub max: f64,
    pub mean: f64,
    pub rms: f64,
    pub median: f64,
}

impl ErrorStats {
    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
        Self {
            count: n,
            max: sorted[n - 1],
            mean: sorted.iter().sum::<f64>() / n as f64,
            rms: libm::sqrt(sorted.iter().map(|v| v * v).sum::<f64>() / n as f64),
            median,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthReport {
    pub points: Vec<DepthPoint>,
    pub skipped: usize,
    /// Pairs whose triangulation failed.
    pub failed: usize,
    pub error_stats: ErrorStats,
    pub beyond_display_range: usize,
}

/// Synthesises matches for `scene` (left camera frame), triangulates each
/// pair with the pseudo intersection and compares against ground truth.
pub fn simulate_scene<R: Rng + ?Sized>(
    scene: &[Vec3],
    right_pose: &RigidTransform,
    intr_left: &FisheyeIntrinsics,
    intr_right: &FisheyeIntrinsics,
    noise: NoiseModel,
    config: &SimulationConfig,
    rng: &mut R,
) -> Result<DepthReport, MatchError> {
    let synth = synthesize_matches(scene, right_pose, intr_left, intr_right, noise, rng)?;
    let mut points = Vec::with_capacity(synth.matches.len());
    let mut failed = 0;
    for (pair, &index) in synth.matches.pairs.iter().zip(&synth.scene_indices) {
        let (left, right) = pair.rays(intr_left, intr_right, right_pose)?;
        let Ok(res) = triangulate_pseudo(&left, &right) else {
            failed += 1;
            continue;
        };
        let truth = scene[index];
        let range = res.range();
        points.push(DepthPoint {
            scene_index: index,
            truth,
            estimate: res.point,
            error_mm: (res.point - truth).norm(),
            range_error_mm: range - truth.norm(),
            range_mm: range,
            skew_mm: res.skew_distance,
            runtime_accepted: runtime_accept(&res, config.tau),
            beyond_display_range: range > config.display_range_mm,
        });
    }
    let errors: Vec<f64> = points.iter().map(|p| p.error_mm).collect();
    Ok(DepthReport {
        beyond_display_range: points.iter().filter(|p| p.beyond_display_range).count(),
        error_stats: ErrorStats::from_values(&errors),
        points,
        skipped: synth.skipped,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_is_81_by_81_with_exact_bounds() {
        let cfg = BenchConfig::default();
        let xs = cfg.x_axis();
        assert_eq!(xs.len(), 81);
        assert_eq!(xs[0], -0.02);
        assert_eq!(xs[80], 0.02);
        assert_eq!(xs[30], -0.005);
        assert_eq!(xs[50], 0.005);
        assert_eq!(xs[70], 0.015);
        assert_eq!(xs[40], 0.0);
    }

    #[test]
    fn zero_noise_cell() {
        let c = evaluate_cell(&BenchConfig::default(), 0.0, 0.0);
        assert!(c.err_pseudo.abs() < 1e-6 && c.err_midpoint.abs() < 1e-6);
        assert!(c.pass_pseudo && c.pass_midpoint && c.runtime_accepted && !c.degenerate);
    }

    #[test]
    fn single_cell_summary() {
        let cfg = BenchConfig { x_min: 0.0, x_max: 0.0, y_min: 0.0, y_max: 0.0, ..Default::default() };
        let grid = run_noise_grid(&cfg).unwrap();
        assert_eq!(grid.cells.len(), 1);
        let s = summarize(&grid);
        let slight = s.zone(MismatchZone::SlightlyMismatched).unwrap();
        assert_eq!(slight.pseudo.pass_fraction, 1.0);
        assert_eq!(slight.midpoint.pass_fraction, 1.0);
        assert!(s.pseudo_monotone);
    }

    #[test]
    fn invalid_configs() {
        let base = BenchConfig::default();
        assert_eq!(run_noise_grid(&BenchConfig { step: 0.0, ..base }), Err(BenchError::InvalidStep));
        assert_eq!(run_noise_grid(&BenchConfig { x_min: 1.0, ..base }), Err(BenchError::UnorderedBounds));
        assert_eq!(run_noise_grid(&BenchConfig { e_max: -1.0, ..base }), Err(BenchError::InvalidErrorBound));
        assert_eq!(
            run_noise_grid(&BenchConfig { target: base.origin_left, ..base }),
            Err(BenchError::DegenerateTarget)
        );
    }

    #[test]
    fn monotone_helper() {
        assert!(is_monotone([1.0, 2.0, 2.0, 3.0].into_iter(), 0.0));
        assert!(is_monotone([3.0, 2.0, f64::NAN, 1.0].into_iter(), 0.0));
        assert!(!is_monotone([1.0, 3.0, 2.0].into_iter(), 0.0));
        assert!(is_monotone([1.0, 1.0 - 1e-12, 2.0].into_iter(), 1e-9));
    }

    #[test]
    fn error_stats() {
        let s = ErrorStats::from_values(&[3.0, 1.0, 2.0, 4.0]);
        assert_eq!((s.count, s.max, s.median, s.mean), (4, 4.0, 2.5, 2.5));
        assert_eq!(ErrorStats::from_values(&[]).count, 0);
    }
}

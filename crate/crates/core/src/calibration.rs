//! Stereo extrinsic calibration from chessboard ray bundles.
//!
//! Each detected corner is turned into an optical path with the camera
//! model. The board pose in a camera is the rigid motion that best aligns
//! the known grid with that ray bundle, in the sense of summed squared angles
//! between observed rays and rays to the posed corners. With the board seen
//! by both cameras, each view gives two corner clouds of the same physical
//! points; all views are pooled and registered with an SVD fit.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Matrix6, Rotation3, SymmetricEigen, Vector6};
use thiserror::Error;

use crate::camera_model::{unproject, CameraError, FisheyeIntrinsics, PixelPoint};
use crate::{angle_between, RigidTransform, Vec3};

const MAX_ITERATIONS: usize = 200;
const CONVERGED_DECREASE: f64 = 1e-12;
const DIVERGED_OBJECTIVE: f64 = 1e-2;
const INITIAL_DAMPING: f64 = 1e-3;
const MAX_DAMPING: f64 = 1e12;
/// Axis-aligned starts refined before the mirror candidate.
const START_COUNT: usize = 3;
const DEGENERATE_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("invalid chessboard: {0}")]
    InvalidBoard(&'static str),
    #[error("view {view}: expected {expected} corners, got {got}")]
    CornerCount { view: u32, expected: usize, got: usize },
    #[error("view {view}: corner {index} does not unproject: {source}")]
    Unproject { view: u32, index: usize, source: CameraError },
    #[error("view {view}: optimisation ended at objective {objective:e} rad²")]
    DivergedOptimization { view: u32, objective: f64 },
    #[error("view {view}: corner rays are degenerate")]
    DegenerateBoard { view: u32 },
    #[error("point sets are degenerate (fewer than 3 points or collinear)")]
    DegenerateGeometry,
    #[error("point sets differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("at least one paired view is required")]
    InsufficientViews,
    #[error("view {view}: expected {expected:?} camera observations")]
    CameraMismatch { view: u32, expected: CameraId },
}

/// Interior-corner grid of a planar chessboard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChessboardSpec {
    rows: usize,
    cols: usize,
    square_size: f64,
}

impl ChessboardSpec {
    pub fn new(rows: usize, cols: usize, square_size: f64) -> Result<Self, CalibrationError> {
        if rows < 2 || cols < 2 {
            return Err(CalibrationError::InvalidBoard("need at least 2x2 corners"));
        }
        if !(square_size.is_finite() && square_size > 0.0) {
            return Err(CalibrationError::InvalidBoard("square size must be positive"));
        }
        Ok(Self { rows, cols, square_size })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn square_size(&self) -> f64 {
        self.square_size
    }

    pub fn corner_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Corner `(i, j)` (row, column) in the board frame.
    pub fn corner(&self, i: usize, j: usize) -> Vec3 {
        Vec3::new(j as f64 * self.square_size, i as f64 * self.square_size, 0.0)
    }

    /// All corners, row-major.
    pub fn corners(&self) -> Vec<Vec3> {
        (0..self.rows).flat_map(|i| (0..self.cols).map(move |j| self.corner(i, j))).collect()
    }

    pub fn centre(&self) -> Vec3 {
        Vec3::new((self.cols - 1) as f64 * self.square_size * 0.5, (self.rows - 1) as f64 * self.square_size * 0.5, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CameraId {
    Left,
    Right,
}

/// Corner pixels of one camera in one view, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerObservations {
    pub camera: CameraId,
    pub view: u32,
    pub pixels: Vec<PixelPoint>,
}

/// The same board seen by both cameras.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoView {
    pub left: CornerObservations,
    pub right: CornerObservations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoardPose {
    /// Board frame to camera frame.
    pub pose: RigidTransform,
    /// Root-mean-square angle between observed and predicted rays, radians.
    pub rms_residual: f64,
    pub iterations: usize,
}

/// Angle between `observed` and the direction to `p`, signed in a tangent
/// basis of `observed` so that the 2-vector norm is the angle itself.
struct AngularResidual {
    observed: Vec3,
    e1: Vec3,
    e2: Vec3,
}

impl AngularResidual {
    fn new(observed: Vec3) -> Self {
        let helper = if observed.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let e1 = observed.cross(&helper).normalize();
        let e2 = observed.cross(&e1);
        Self { observed, e1, e2 }
    }

    fn eval(&self, p: &Vec3) -> [f64; 2] {
        let w = self.observed.cross(p);
        let s = w.norm();
        let c = self.observed.dot(p);
        let scale = if s > 0.0 { libm::atan2(s, c) / s } else { 1.0 / c };
        // w is perpendicular to observed, so its tangent coordinates carry the angle
        [scale * w.dot(&self.e1), scale * w.dot(&self.e2)]
    }
}

struct PoseProblem<'a> {
    model: &'a [Vec3],
    residuals: Vec<AngularResidual>,
}

impl PoseProblem<'_> {
    fn objective(&self, pose: &RigidTransform) -> f64 {
        self.model
            .iter()
            .zip(&self.residuals)
            .map(|(x, r)| {
                let [a, b] = r.eval(&pose.transform_point(x));
                a * a + b * b
            })
            .sum()
    }

    fn residual_vector(&self, pose: &RigidTransform, out: &mut Vec<f64>) {
        out.clear();
        for (x, r) in self.model.iter().zip(&self.residuals) {
            out.extend_from_slice(&r.eval(&pose.transform_point(x)));
        }
    }

    /// Left-multiplied rotation increment and additive translation.
    fn apply(pose: &RigidTransform, delta: &Vector6<f64>) -> RigidTransform {
        let rot = Rotation3::new(Vec3::new(delta[0], delta[1], delta[2]));
        let r = rot.matrix() * pose.rotation();
        let t = pose.translation() + Vec3::new(delta[3], delta[4], delta[5]);
        RigidTransform::from_rotation(Rotation3::from_matrix_unchecked(r), t)
    }

    /// Normal equations from a central-difference Jacobian.
    fn normal_equations(&self, pose: &RigidTransform) -> (Matrix6<f64>, Vector6<f64>) {
        let n = self.residuals.len() * 2;
        let mut r0 = Vec::with_capacity(n);
        self.residual_vector(pose, &mut r0);
        let t_scale = pose.translation().norm().max(1.0);
        let mut jac: Vec<[f64; 6]> = alloc::vec![[0.0; 6]; n];
        let (mut plus, mut minus) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for k in 0..6 {
            let h = if k < 3 { 1e-6 } else { 1e-6 * t_scale };
            let mut d = Vector6::zeros();
            d[k] = h;
            self.residual_vector(&Self::apply(pose, &d), &mut plus);
            d[k] = -h;
            self.residual_vector(&Self::apply(pose, &d), &mut minus);
            for (row, (p, m)) in jac.iter_mut().zip(plus.iter().zip(&minus)) {
                row[k] = (p - m) / (2.0 * h);
            }
        }
        let mut jtj = Matrix6::zeros();
        let mut jtr = Vector6::zeros();
        for (row, r) in jac.iter().zip(&r0) {
            for a in 0..6 {
                jtr[a] += row[a] * r;
                for b in a..6 {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..6 {
            for b in 0..a {
                jtj[(a, b)] = jtj[(b, a)];
            }
        }
        (jtj, jtr)
    }
}

/// The 24 proper rotations that map coordinate axes onto coordinate axes.
fn axis_aligned_rotations() -> Vec<Matrix3<f64>> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for perm in PERMS {
        for signs in 0..8u8 {
            let mut m = Matrix3::zeros();
            for (row, &col) in perm.iter().enumerate() {
                m[(row, col)] = if signs & (1 << row) != 0 { -1.0 } else { 1.0 };
            }
            if m.determinant() > 0.0 {
                out.push(m);
            }
        }
    }
    out
}

fn observed_rays(
    intr: &FisheyeIntrinsics,
    obs: &CornerObservations,
    spec: &ChessboardSpec,
) -> Result<Vec<Vec3>, CalibrationError> {
    if obs.pixels.len() != spec.corner_count() {
        return Err(CalibrationError::CornerCount {
            view: obs.view,
            expected: spec.corner_count(),
            got: obs.pixels.len(),
        });
    }
    obs.pixels
        .iter()
        .enumerate()
        .map(|(index, p)| {
            unproject(intr, p).map_err(|source| CalibrationError::Unproject { view: obs.view, index, source })
        })
        .collect()
}

/// Starting poses: board centred on the mean ray at a depth implied by the
/// apparent angular corner spacing, in each of the 24 axis-aligned
/// orientations, sorted by objective.
fn initial_poses(problem: &PoseProblem<'_>, rays: &[Vec3], spec: &ChessboardSpec) -> Vec<(f64, RigidTransform)> {
    let (rows, cols) = (spec.rows(), spec.cols());
    let mut spacing = 0.0;
    let mut count = 0usize;
    for i in 0..rows {
        for j in 0..cols {
            let here = &rays[i * cols + j];
            if j + 1 < cols {
                spacing += angle_between(here, &rays[i * cols + j + 1]);
                count += 1;
            }
            if i + 1 < rows {
                spacing += angle_between(here, &rays[(i + 1) * cols + j]);
                count += 1;
            }
        }
    }
    let spacing = spacing / count as f64;
    let depth = spec.square_size() / libm::tan(spacing);
    let centre_dir = rays.iter().sum::<Vec3>().normalize();
    let centre = spec.centre();

    let mut poses: Vec<(f64, RigidTransform)> = axis_aligned_rotations()
        .into_iter()
        .map(|r| {
            let t = centre_dir * depth - r * centre;
            RigidTransform::from_rotation(Rotation3::from_matrix_unchecked(r), t)
        })
        .map(|pose| (problem.objective(&pose), pose))
        .collect();
    poses.sort_by(|a, b| a.0.total_cmp(&b.0));
    poses
}

/// The planar pose ambiguity: same board centre, normal reflected about the
/// line of sight.
fn mirrored_pose(pose: &RigidTransform, spec: &ChessboardSpec) -> Option<RigidTransform> {
    let centre = pose.transform_point(&spec.centre());
    let sight = centre.try_normalize(0.0)?;
    let normal = pose.rotation().column(2).into_owned();
    let mirrored = sight * (2.0 * normal.dot(&sight)) - normal;
    let q = Rotation3::rotation_between(&normal, &mirrored)?;
    let r = q.matrix() * pose.rotation();
    Some(RigidTransform::from_rotation(Rotation3::from_matrix_unchecked(r), centre - r * spec.centre()))
}

/// Damped Gauss-Newton refinement. Returns the pose, its objective and the
/// iteration count.
fn refine(problem: &PoseProblem<'_>, start: RigidTransform) -> (RigidTransform, f64, usize) {
    let mut pose = start;
    let mut objective = problem.objective(&pose);
    let mut damping = INITIAL_DAMPING;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = problem.normal_equations(&pose);
        let mut improved = None;
        while damping <= MAX_DAMPING {
            let mut lhs = jtj;
            for k in 0..6 {
                lhs[(k, k)] += damping * jtj[(k, k)].max(1e-12);
            }
            let step = lhs.cholesky().map(|c| c.solve(&(-jtr)));
            if let Some(step) = step {
                let cand = PoseProblem::apply(&pose, &step);
                let cand_obj = problem.objective(&cand);
                if cand_obj < objective {
                    damping = (damping / 10.0).max(1e-15);
                    improved = Some((cand, cand_obj));
                    break;
                }
            }
            damping *= 10.0;
        }
        let Some((cand, cand_obj)) = improved else { break };
        let decrease = objective - cand_obj;
        pose = cand;
        objective = cand_obj;
        if decrease < CONVERGED_DECREASE && decrease < CONVERGED_DECREASE * objective {
            break;
        }
    }
    let pose = pose.renormalized();
    (pose, problem.objective(&pose), iterations)
}

/// Board pose from one camera's corner observations.
pub fn board_pose_from_rays(
    intr: &FisheyeIntrinsics,
    obs: &CornerObservations,
    spec: &ChessboardSpec,
) -> Result<BoardPose, CalibrationError> {
    let rays = observed_rays(intr, obs, spec)?;

    let scatter: Matrix3<f64> = rays.iter().map(|u| u * u.transpose()).sum();
    let eig = SymmetricEigen::new(scatter).eigenvalues;
    if eig.min() <= DEGENERATE_RATIO * eig.max() {
        return Err(CalibrationError::DegenerateBoard { view: obs.view });
    }

    let model = spec.corners();
    let problem = PoseProblem { model: &model, residuals: rays.iter().map(|u| AngularResidual::new(*u)).collect() };

    let mut best: Option<(RigidTransform, f64, usize)> = None;
    let mut keep = |cand: (RigidTransform, f64, usize)| {
        if best.as_ref().is_none_or(|b| cand.1 < b.1) {
            best = Some(cand);
        }
    };
    let starts = initial_poses(&problem, &rays, spec);
    let mut refined: Vec<_> = starts.iter().take(START_COUNT).map(|(_, p)| refine(&problem, *p)).collect();
    refined.sort_by(|a, b| a.1.total_cmp(&b.1));
    if let Some(flip) = mirrored_pose(&refined[0].0, spec) {
        keep(refine(&problem, flip));
    }
    refined.into_iter().for_each(&mut keep);
    let (pose, objective, iterations) = best.expect("at least one start");

    let in_front = model.iter().zip(&rays).all(|(x, u)| u.dot(&pose.transform_point(x)) > 0.0);
    if !(objective <= DIVERGED_OBJECTIVE) || !in_front {
        return Err(CalibrationError::DivergedOptimization { view: obs.view, objective });
    }
    Ok(BoardPose { pose, rms_residual: libm::sqrt(objective / rays.len() as f64), iterations })
}

/// Least-squares rigid motion `(R, t)` minimising `Σ |R·aᵢ + t − bᵢ|²`,
/// always a proper rotation.
pub fn fit_rigid_transform(points_a: &[Vec3], points_b: &[Vec3]) -> Result<RigidTransform, CalibrationError> {
    if points_a.len() != points_b.len() {
        return Err(CalibrationError::LengthMismatch(points_a.len(), points_b.len()));
    }
    let n = points_a.len();
    if n < 3 {
        return Err(CalibrationError::DegenerateGeometry);
    }
    let ca = points_a.iter().sum::<Vec3>() / n as f64;
    let cb = points_b.iter().sum::<Vec3>() / n as f64;

    let spread: Matrix3<f64> = points_a.iter().map(|a| (a - ca) * (a - ca).transpose()).sum();
    let sv = spread.svd(false, false).singular_values;
    let (largest, middle) = {
        let mut s = [sv[0], sv[1], sv[2]];
        s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
        (s[0], s[1])
    };
    if !(largest > 0.0) || middle <= DEGENERATE_RATIO * largest {
        return Err(CalibrationError::DegenerateGeometry);
    }

    let h: Matrix3<f64> = points_a.iter().zip(points_b).map(|(a, b)| (a - ca) * (b - cb).transpose()).sum();
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let v = v_t.transpose();
    // flip the direction of the smallest singular value
    let smallest = (0..3)
        .min_by(|&i, &j| {
            svd.singular_values[i].partial_cmp(&svd.singular_values[j]).unwrap_or(core::cmp::Ordering::Equal)
        })
        .unwrap_or(2);
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(smallest, smallest)] = -1.0;
    }
    let r = v * d * u.transpose();
    let r = *Rotation3::from_matrix_eps(&r, 1e-15, 100, Rotation3::from_matrix_unchecked(r)).matrix();
    let t = cb - r * ca;
    RigidTransform::new(r, t).map_err(|_| CalibrationError::DegenerateGeometry)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewReport {
    pub view: u32,
    pub left_rms_rad: f64,
    pub right_rms_rad: f64,
    /// RMS corner distance after alignment, mm.
    pub rms_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtrinsicCalibration {
    /// Right camera frame to left camera frame: the right camera's pose in
    /// the left frame (its translation is the right camera centre).
    pub right_pose: RigidTransform,
    pub rms_mm: f64,
    pub views: Vec<ViewReport>,
}

/// Pools the corner clouds of every view and registers right-frame corners
/// onto left-frame corners.
pub fn calibrate_extrinsics(
    views: &[StereoView],
    intr_left: &FisheyeIntrinsics,
    intr_right: &FisheyeIntrinsics,
    spec: &ChessboardSpec,
) -> Result<ExtrinsicCalibration, CalibrationError> {
    if views.is_empty() {
        return Err(CalibrationError::InsufficientViews);
    }
    let model = spec.corners();
    let mut in_left = Vec::with_capacity(model.len() * views.len());
    let mut in_right = Vec::with_capacity(model.len() * views.len());
    let mut poses = Vec::with_capacity(views.len());
    for view in views {
        if view.left.camera != CameraId::Left {
            return Err(CalibrationError::CameraMismatch { view: view.left.view, expected: CameraId::Left });
        }
        if view.right.camera != CameraId::Right {
            return Err(CalibrationError::CameraMismatch { view: view.right.view, expected: CameraId::Right });
        }
        let left = board_pose_from_rays(intr_left, &view.left, spec)?;
        let right = board_pose_from_rays(intr_right, &view.right, spec)?;
        in_left.extend(model.iter().map(|x| left.pose.transform_point(x)));
        in_right.extend(model.iter().map(|x| right.pose.transform_point(x)));
        poses.push((view.left.view, left.rms_residual, right.rms_residual));
    }

    let right_pose = fit_rigid_transform(&in_right, &in_left)?;
    let sq: Vec<f64> =
        in_right.iter().zip(&in_left).map(|(r, l)| (right_pose.transform_point(r) - l).norm_squared()).collect();
    let rms_mm = libm::sqrt(sq.iter().sum::<f64>() / sq.len() as f64);
    let views = poses
        .iter()
        .zip(sq.chunks(model.len()))
        .map(|(&(view, l, r), chunk)| ViewReport {
            view,
            left_rms_rad: l,
            right_rms_rad: r,
            rms_mm: libm::sqrt(chunk.iter().sum::<f64>() / chunk.len() as f64),
        })
        .collect();
    Ok(ExtrinsicCalibration { right_pose, rms_mm, views })
}

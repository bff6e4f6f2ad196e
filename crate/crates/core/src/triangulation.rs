//! Two-ray triangulation for nonrectified stereo.
//!
//! Two methods are provided. [`triangulate_midpoint`] returns the midpoint of
//! the common perpendicular of the two (generally skew) rays.
//! [`triangulate_pseudo`] uses that midpoint only to fix a plane through both
//! camera centres, projects each ray direction into the plane and intersects
//! the two projected lines, which always meet because they are coplanar.

use thiserror::Error;

use crate::{angle_between, Vec3};

/// `|dirL × dirR|` at or below this value is treated as parallel.
pub const PARALLEL_EPS: f64 = 1e-12;
/// Default ratio for [`runtime_accept`].
pub const DEFAULT_TAU: f64 = 0.01;

const UNIT_TOL: f64 = 1e-9;
/// Sine of the angle between baseline and origin-to-midpoint below which
/// the intersection plane is considered undefined.
const PLANE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TriangulationError {
    #[error("rays are parallel")]
    ParallelRays,
    #[error("projected rays are parallel inside the intersection plane")]
    ParallelProjectedLines,
    #[error("ray is normal to the intersection plane")]
    RayNormalToPlane,
    #[error("ray direction is not a unit vector")]
    NonUnitDirection,
    #[error("non-finite ray component")]
    NonFinite,
}

/// Half-line `origin + s·dir` with `|dir| = 1`, origin in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Vec3,
    dir: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, dir: Vec3) -> Result<Self, TriangulationError> {
        if origin.iter().chain(dir.iter()).any(|v| !v.is_finite()) {
            return Err(TriangulationError::NonFinite);
        }
        if (dir.norm() - 1.0).abs() > UNIT_TOL {
            return Err(TriangulationError::NonUnitDirection);
        }
        Ok(Self { origin, dir })
    }

    /// Normalises `dir` before building the ray.
    pub fn from_unnormalized(origin: Vec3, dir: Vec3) -> Result<Self, TriangulationError> {
        let n = dir.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(TriangulationError::NonUnitDirection);
        }
        Self::new(origin, dir / n)
    }

    /// Ray from `origin` aimed exactly at `target`.
    pub fn through(origin: Vec3, target: Vec3) -> Result<Self, TriangulationError> {
        Self::from_unnormalized(origin, target - origin)
    }

    pub fn origin(&self) -> &Vec3 {
        &self.origin
    }

    pub fn dir(&self) -> &Vec3 {
        &self.dir
    }

    pub fn at(&self, s: f64) -> Vec3 {
        self.origin + self.dir * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoints {
    pub on_left: Vec3,
    pub on_right: Vec3,
    pub midpoint: Vec3,
    pub distance: f64,
    /// Ray parameters of `on_left` / `on_right`; negative means behind the origin.
    pub s_left: f64,
    pub s_right: f64,
}

impl ClosestPoints {
    pub fn behind_origin(&self) -> bool {
        self.s_left < 0.0 || self.s_right < 0.0
    }
}

/// Closest points of the two infinite lines carrying `left` and `right`.
pub fn closest_points(left: &Ray, right: &Ray) -> Result<ClosestPoints, TriangulationError> {
    let cross = left.dir.cross(&right.dir);
    let denom = cross.norm_squared();
    if denom <= PARALLEL_EPS * PARALLEL_EPS {
        return Err(TriangulationError::ParallelRays);
    }
    let w = left.origin - right.origin;
    let b = left.dir.dot(&right.dir);
    let d = left.dir.dot(&w);
    let e = right.dir.dot(&w);
    let s_left = (b * e - d) / denom;
    let s_right = (e - b * d) / denom;
    let on_left = left.at(s_left);
    let on_right = right.at(s_right);
    Ok(ClosestPoints {
        on_left,
        on_right,
        midpoint: (on_left + on_right) * 0.5,
        distance: (on_left - on_right).norm(),
        s_left,
        s_right,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Midpoint,
    PseudoIntersection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangulationResult {
    pub point: Vec3,
    pub method: Method,
    /// Length of the common perpendicular of the input rays, mm.
    pub skew_distance: f64,
    /// Largest angle between an input direction and its in-plane projection.
    pub plane_deviation: f64,
    pub accepted: bool,
    /// Origin of the left ray; ranges for filtering are measured from it.
    pub reference_origin: Vec3,
    /// A closest point lies behind its ray origin.
    pub behind_origin: bool,
    /// The pseudo construction fell back to the midpoint because the
    /// intersection plane was undefined.
    pub degenerate_plane: bool,
}

impl TriangulationResult {
    /// Distance from the left ray origin to the estimate.
    pub fn range(&self) -> f64 {
        (self.point - self.reference_origin).norm()
    }
}

/// Fixed evaluation order for a ray pair, so both methods return bitwise
/// identical points when the rays are swapped.
fn canonical<'a>(a: &'a Ray, b: &'a Ray) -> (&'a Ray, &'a Ray) {
    let key = |r: &Ray| [r.origin.x, r.origin.y, r.origin.z, r.dir.x, r.dir.y, r.dir.z];
    let (ka, kb) = (key(a), key(b));
    let a_first = ka.iter().zip(&kb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).is_none_or(|o| o.is_lt());
    if a_first {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn triangulate_midpoint(left: &Ray, right: &Ray) -> Result<TriangulationResult, TriangulationError> {
    let (a, b) = canonical(left, right);
    let cp = closest_points(a, b)?;
    Ok(midpoint_result(left, &cp, false))
}

fn midpoint_result(reference: &Ray, cp: &ClosestPoints, degenerate_plane: bool) -> TriangulationResult {
    TriangulationResult {
        point: cp.midpoint,
        method: Method::Midpoint,
        skew_distance: cp.distance,
        plane_deviation: 0.0,
        accepted: true,
        reference_origin: reference.origin,
        behind_origin: cp.behind_origin(),
        degenerate_plane,
    }
}

/// Pseudo intersection of two rays.
///
/// The plane `Π` passes through both origins and the skew midpoint `S`. Each
/// direction is projected orthogonally onto `Π` (the origins are already in
/// it) and the two projected lines are intersected. When the origins and `S`
/// are collinear `Π` is undefined and the midpoint result is returned with
/// `degenerate_plane` set.
pub fn triangulate_pseudo(left: &Ray, right: &Ray) -> Result<TriangulationResult, TriangulationError> {
    let reference = left.origin;
    let (left, right) = canonical(left, right);
    let cp = closest_points(left, right)?;
    let baseline = right.origin - left.origin;
    let to_mid = cp.midpoint - left.origin;
    let normal = baseline.cross(&to_mid);
    let scale = baseline.norm() * to_mid.norm();
    if !(scale > 0.0) || normal.norm() <= PLANE_EPS * scale {
        let mut res = midpoint_result(left, &cp, true);
        res.reference_origin = reference;
        return Ok(res);
    }
    let normal = normal.normalize();

    let project = |d: &Vec3| -> Result<Vec3, TriangulationError> {
        let in_plane = d - normal * d.dot(&normal);
        let n = in_plane.norm();
        if n <= PARALLEL_EPS {
            return Err(TriangulationError::RayNormalToPlane);
        }
        Ok(in_plane / n)
    };
    let dir_l = project(&left.dir)?;
    let dir_r = project(&right.dir)?;
    let plane_left = Ray { origin: left.origin, dir: dir_l };
    let plane_right = Ray { origin: right.origin, dir: dir_r };
    let meet = closest_points(&plane_left, &plane_right).map_err(|_| TriangulationError::ParallelProjectedLines)?;

    let deviation = angle_between(&left.dir, &dir_l).max(angle_between(&right.dir, &dir_r));
    Ok(TriangulationResult {
        point: meet.midpoint,
        method: Method::PseudoIntersection,
        skew_distance: cp.distance,
        plane_deviation: deviation,
        accepted: true,
        reference_origin: reference,
        behind_origin: cp.behind_origin() || meet.behind_origin(),
        degenerate_plane: false,
    })
}

/// Ground-truth-free acceptance test: `skew_distance / range ≤ tau`.
pub fn runtime_accept(result: &TriangulationResult, tau: f64) -> bool {
    if result.skew_distance == 0.0 {
        return true;
    }
    let range = result.range();
    range > 0.0 && result.skew_distance / range <= tau
}

/// Direction-space matching noise classes on the right-ray direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MismatchZone {
    SlightlyMismatched,
    VerticalTolerance,
    SeverelyMismatched,
}

impl MismatchZone {
    pub const ALL: [MismatchZone; 3] = [Self::SlightlyMismatched, Self::VerticalTolerance, Self::SeverelyMismatched];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SlightlyMismatched => "slight",
            Self::VerticalTolerance => "vertical",
            Self::SeverelyMismatched => "severe",
        }
    }
}

pub const SLIGHT_BOUND: f64 = 0.005;
pub const VERTICAL_BOUND: f64 = 0.015;

/// Zone of a noise offset `(x, y)`; closed bounds, so boundary points fall
/// in the less severe zone.
pub fn classify_mismatch(noise_x: f64, noise_y: f64) -> MismatchZone {
    let (ax, ay) = (noise_x.abs(), noise_y.abs());
    if ax <= SLIGHT_BOUND && ay <= SLIGHT_BOUND {
        MismatchZone::SlightlyMismatched
    } else if ax <= SLIGHT_BOUND && ay <= VERTICAL_BOUND {
        MismatchZone::VerticalTolerance
    } else {
        MismatchZone::SeverelyMismatched
    }
}

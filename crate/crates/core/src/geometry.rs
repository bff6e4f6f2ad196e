//! Shared rigid-body helpers.

use nalgebra::{Matrix3, Rotation3};
use thiserror::Error;

use crate::Vec3;

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum TransformError {
    #[error("rotation is not orthonormal (max |RᵀR - I| = {0:e})")]
    NotOrthonormal(f64),
    #[error("rotation determinant is {0}, expected +1")]
    NotProper(f64),
    #[error("non-finite transform entry")]
    NonFinite,
}

/// Proper rigid motion `p ↦ R·p + t`, translation in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl RigidTransform {
    /// Validates `RᵀR = I` and `det R = +1` within 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self, TransformError> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(TransformError::NonFinite);
        }
        let drift = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if drift > ORTHONORMAL_TOL {
            return Err(TransformError::NotOrthonormal(drift));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(TransformError::NotProper(det));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vec3::zeros() }
    }

    pub fn from_rotation(rotation: Rotation3<f64>, translation: Vec3) -> Self {
        Self { rotation: *rotation.matrix(), translation }
    }

    /// Rotation by the axis-angle vector `axis_angle` (radians), then translation.
    pub fn from_axis_angle(axis_angle: Vec3, translation: Vec3) -> Self {
        Self::from_rotation(Rotation3::new(axis_angle), translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Geodesic angle between the two rotations, radians.
    pub fn rotation_angle_to(&self, other: &Self) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        let c = ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        // small angles from the skew part
        let skew = Vec3::new(rel[(2, 1)] - rel[(1, 2)], rel[(0, 2)] - rel[(2, 0)], rel[(1, 0)] - rel[(0, 1)]);
        let s = 0.5 * skew.norm();
        libm::atan2(s, c)
    }

    /// Re-orthonormalises the rotation part (used after long chains of updates).
    pub(crate) fn renormalized(&self) -> Self {
        let r = Rotation3::from_matrix_eps(&self.rotation, 1e-15, 100, Rotation3::from_matrix_unchecked(self.rotation));
        Self { rotation: *r.matrix(), translation: self.translation }
    }
}

/// Unsigned angle between two non-zero vectors, accurate for tiny angles.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    libm::atan2(a.cross(b).norm(), a.dot(b))
}

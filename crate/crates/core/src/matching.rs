//! Homologous match containers and a synthetic ground-truth matcher.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::camera_model::{project, unproject, CameraError, FisheyeIntrinsics, PixelPoint};
use crate::triangulation::{Ray, TriangulationError};
use crate::{RigidTransform, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error("scene has no points")]
    EmptyScene,
    #[error("confidence {0} outside [0, 1]")]
    ConfidenceRange(f64),
    #[error("invalid noise parameter: {0}")]
    InvalidNoise(&'static str),
    #[error("{side} pixel does not unproject: {source}")]
    Unproject { side: &'static str, source: CameraError },
    #[error("ray construction failed: {0}")]
    Ray(#[from] TriangulationError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub left: PixelPoint,
    pub right: PixelPoint,
    confidence: f64,
}

impl MatchPair {
    pub fn new(left: PixelPoint, right: PixelPoint, confidence: f64) -> Result<Self, MatchError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(MatchError::ConfidenceRange(confidence));
        }
        Ok(Self { left, right, confidence })
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    /// Both optical paths expressed in the left camera frame.
    ///
    /// `right_pose` maps right-camera coordinates into the left frame, so the
    /// right ray starts at its translation.
    pub fn rays(
        &self,
        intr_left: &FisheyeIntrinsics,
        intr_right: &FisheyeIntrinsics,
        right_pose: &RigidTransform,
    ) -> Result<(Ray, Ray), MatchError> {
        let dl = unproject(intr_left, &self.left).map_err(|source| MatchError::Unproject { side: "left", source })?;
        let dr =
            unproject(intr_right, &self.right).map_err(|source| MatchError::Unproject { side: "right", source })?;
        let left = Ray::new(Vec3::zeros(), dl)?;
        let right = Ray::from_unnormalized(*right_pose.translation(), right_pose.transform_vector(&dr))?;
        Ok((left, right))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchSource {
    External,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchSet {
    pub pairs: Vec<MatchPair>,
    pub source: MatchSource,
    pub scene_id: String,
}

impl MatchSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Noise injected by [`synthesize_matches`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    None,
    /// Independent Gaussian offsets (σ in px) on every pixel coordinate of both images.
    Pixel {
        sigma: f64,
    },
    /// Offset `(x, y)` added to the first two components of the unit right-ray
    /// direction, which is then renormalised and reprojected.
    Direction {
        x: f64,
        y: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub matches: MatchSet,
    /// Scene index of each emitted pair.
    pub scene_indices: Vec<usize>,
    /// Points not visible in both cameras (or pushed out of the image by noise).
    pub skipped: usize,
}

/// Adds direction-space matching noise to a unit direction.
pub fn perturb_direction(dir: &Vec3, x: f64, y: f64) -> Vec3 {
    Vec3::new(dir.x + x, dir.y + y, dir.z).normalize()
}

/// Projects every scene point (left camera frame, mm) into both cameras.
///
/// `right_pose` is the right camera's pose in the left frame.
pub fn synthesize_matches<R: Rng + ?Sized>(
    scene: &[Vec3],
    right_pose: &RigidTransform,
    intr_left: &FisheyeIntrinsics,
    intr_right: &FisheyeIntrinsics,
    noise: NoiseModel,
    rng: &mut R,
) -> Result<Synthesized, MatchError> {
    if scene.is_empty() {
        return Err(MatchError::EmptyScene);
    }
    let gaussian = match noise {
        NoiseModel::Pixel { sigma } => {
            Some(Normal::new(0.0, sigma).map_err(|_| MatchError::InvalidNoise("pixel sigma"))?)
        }
        NoiseModel::Direction { x, y } if !(x.is_finite() && y.is_finite()) => {
            return Err(MatchError::InvalidNoise("direction offset"));
        }
        _ => None,
    };
    let to_right = right_pose.inverse();

    let mut pairs = Vec::with_capacity(scene.len());
    let mut scene_indices = Vec::with_capacity(scene.len());
    let mut skipped = 0;
    for (index, p) in scene.iter().enumerate() {
        let p_right = to_right.transform_point(p);
        let (Some(dl), Some(dr)) = (p.try_normalize(0.0), p_right.try_normalize(0.0)) else {
            skipped += 1;
            continue;
        };
        let (Ok(mut left), Ok(mut right)) = (project(intr_left, &dl), project(intr_right, &dr)) else {
            skipped += 1;
            continue;
        };
        match noise {
            NoiseModel::None => {}
            NoiseModel::Pixel { .. } => {
                // four draws per point, even when the point is dropped below
                let g = gaussian.as_ref().expect("pixel noise distribution");
                left.u += g.sample(rng);
                left.v += g.sample(rng);
                right.u += g.sample(rng);
                right.v += g.sample(rng);
                if !intr_left.contains(&left) || !intr_right.contains(&right) {
                    skipped += 1;
                    continue;
                }
            }
            NoiseModel::Direction { x, y } => {
                let d =
                    unproject(intr_right, &right).map_err(|source| MatchError::Unproject { side: "right", source })?;
                match project(intr_right, &perturb_direction(&d, x, y)) {
                    Ok(px) => right = px,
                    Err(_) => {
                        skipped += 1;
                        continue;
                    }
                }
            }
        }
        pairs.push(MatchPair::new(left, right, 1.0)?);
        scene_indices.push(index);
    }

    Ok(Synthesized {
        matches: MatchSet { pairs, source: MatchSource::Synthetic, scene_id: String::from("synthetic") },
        scene_indices,
        skipped,
    })
}

//! Geometry core for nonrectified omnidirectional stereo.
//!
//! The crate is `no_std` (it needs `alloc`) and holds the numerical parts of
//! the pipeline:
//!
//! - [`camera_model`]: Kannala-Brandt fisheye projection and optical-path
//!   retrieval (pixel to incident ray).
//! - [`triangulation`]: midpoint and pseudo-intersection triangulation of two
//!   skew rays, mismatch-zone classification and a runtime acceptance test.
//! - [`calibration`]: board pose from a ray bundle, SVD rigid registration and
//!   pooled stereo extrinsic calibration.
//! - [`matching`]: homologous match containers and a synthetic matcher with
//!   controlled noise.
//! - [`fov_zones`]: stereo / monocular / blind zone angles and vision-mode
//!   presets.
//! - [`simbench`]: the direction-noise sweep, its summary statistics and the
//!   end-to-end scene simulation.
//!
//! File formats, the CLI and parallel execution live in the `omnistereo`
//! companion crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod calibration;
pub mod camera_model;
pub mod fov_zones;
pub mod matching;
pub mod simbench;
pub mod triangulation;

mod geometry;

pub use calibration::{
    board_pose_from_rays, calibrate_extrinsics, fit_rigid_transform, BoardPose, CalibrationError, CameraId,
    ChessboardSpec, CornerObservations, ExtrinsicCalibration, StereoView, ViewReport,
};
pub use camera_model::{project, solve_theta, unproject, CameraError, FisheyeIntrinsics, PixelPoint};
pub use fov_zones::{compute_zones, preset, VisionMode, ZoneError, Zones, DEFAULT_FOV_DEG, PRESET_NAMES};
pub use geometry::{angle_between, RigidTransform, TransformError};
pub use matching::{synthesize_matches, MatchError, MatchPair, MatchSet, MatchSource, NoiseModel, Synthesized};
pub use simbench::{
    evaluate_cell, run_noise_grid, simulate_scene, summarize, BenchCell, BenchConfig, BenchError, BenchSummary,
    DepthPoint, DepthReport, NoiseGrid, SimulationConfig,
};
pub use triangulation::{
    classify_mismatch, closest_points, runtime_accept, triangulate_midpoint, triangulate_pseudo, ClosestPoints, Method,
    MismatchZone, Ray, TriangulationError, TriangulationResult,
};

/// 3-vector in millimetres (points) or unit length (directions).
pub type Vec3 = nalgebra::Vector3<f64>;

#![allow(dead_code)]

use nalgebra::Rotation3;
use omnistereo_core::{
    project, CameraId, ChessboardSpec, CornerObservations, FisheyeIntrinsics, PixelPoint, RigidTransform, StereoView,
    Vec3,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub fn rot(axis: Vec3, deg: f64) -> Rotation3<f64> {
    Rotation3::new(axis * deg.to_radians())
}

pub fn board() -> ChessboardSpec {
    ChessboardSpec::new(6, 8, 40.0).unwrap()
}

/// Right camera pose in the left frame: 150 mm baseline, 30° yaw.
pub fn rig() -> RigidTransform {
    RigidTransform::from_rotation(rot(Vec3::y(), 30.0), Vec3::new(150.0, 0.0, 0.0))
}

fn centred(spec: &ChessboardSpec, r: Rotation3<f64>, centre: Vec3) -> RigidTransform {
    RigidTransform::from_rotation(r, centre - r * spec.centre())
}

/// Board poses in the left camera frame.
pub fn board_poses(spec: &ChessboardSpec) -> Vec<RigidTransform> {
    vec![
        centred(spec, rot(Vec3::y(), 15.0), Vec3::new(0.0, 0.0, 1800.0)),
        centred(spec, rot(Vec3::x(), 20.0) * rot(Vec3::y(), 10.0), Vec3::new(400.0, -300.0, 1500.0)),
        centred(spec, rot(Vec3::y(), -10.0) * rot(Vec3::x(), -15.0), Vec3::new(-300.0, 250.0, 2000.0)),
    ]
}

pub fn observe(
    intr: &FisheyeIntrinsics,
    spec: &ChessboardSpec,
    board_to_camera: &RigidTransform,
    camera: CameraId,
    view: u32,
) -> CornerObservations {
    let pixels = spec
        .corners()
        .iter()
        .map(|x| project(intr, &board_to_camera.transform_point(x).normalize()).unwrap())
        .collect();
    CornerObservations { camera, view, pixels }
}

/// Both cameras' corners for each board pose, optionally with Gaussian
/// pixel noise.
pub fn stereo_views<R: Rng>(
    intr: &FisheyeIntrinsics,
    spec: &ChessboardSpec,
    poses: &[RigidTransform],
    sigma: f64,
    rng: &mut R,
) -> Vec<StereoView> {
    let to_right = rig().inverse();
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut jitter = |mut obs: CornerObservations| {
        if sigma > 0.0 {
            for p in &mut obs.pixels {
                *p = PixelPoint::new(p.u + noise.sample(rng), p.v + noise.sample(rng));
            }
        }
        obs
    };
    poses
        .iter()
        .enumerate()
        .map(|(k, pose)| {
            let left = observe(intr, spec, pose, CameraId::Left, k as u32);
            let right = observe(intr, spec, &to_right.compose(pose), CameraId::Right, k as u32);
            StereoView { left: jitter(left), right: jitter(right) }
        })
        .collect()
}

/// Random points visible to both cameras of [`rig`], ranges in
/// `[r_min, r_max]` mm.
pub fn stereo_scene<R: Rng>(n: usize, r_min: f64, r_max: f64, rng: &mut R) -> Vec<Vec3> {
    let forward = rot(Vec3::y(), 15.0) * Vec3::z();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let d = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if d.norm_squared() > 1.0 {
            continue;
        }
        let Some(d) = d.try_normalize(1e-9) else { continue };
        if d.dot(&forward) < 60f64.to_radians().cos() {
            continue;
        }
        out.push(d * rng.random_range(r_min..r_max));
    }
    out
}

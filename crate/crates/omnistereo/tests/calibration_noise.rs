mod common;

use omnistereo_core::{
    board_pose_from_rays, calibrate_extrinsics, CameraId, FisheyeIntrinsics, PixelPoint, RigidTransform, Vec3,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::Value;

const TRIALS: usize = 100;
const SLACK: [f64; 3] = [1.25, 1.25, 1.5];

fn reference() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/calib_noise_bounds.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_within(name: &str, mut v: Vec<f64>, bounds: &Value) {
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    let ours = [q(0.5), q(0.9), v[v.len() - 1]];
    for (k, key) in ["median", "p90", "max"].iter().enumerate() {
        let bound = bounds[key].as_f64().unwrap() * SLACK[k];
        assert!(ours[k] <= bound, "{name} {key}: {} > {bound}", ours[k]);
    }
}

#[test]
fn single_board_pose_noise() {
    let intr = FisheyeIntrinsics::default_synthetic();
    let spec = common::board();
    let truth = RigidTransform::from_rotation(common::rot(Vec3::y(), 25.0), Vec3::new(400.0, -200.0, 2000.0));
    let clean = common::observe(&intr, &spec, &truth, CameraId::Left, 0);
    let noise = Normal::new(0.0, 0.2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut t, mut r) = (Vec::new(), Vec::new());
    for _ in 0..TRIALS {
        let mut obs = clean.clone();
        for p in &mut obs.pixels {
            *p = PixelPoint::new(p.u + noise.sample(&mut rng), p.v + noise.sample(&mut rng));
        }
        let est = board_pose_from_rays(&intr, &obs, &spec).unwrap();
        t.push((est.pose.translation() - truth.translation()).norm());
        r.push(est.pose.rotation_angle_to(&truth));
    }
    let reference = reference();
    assert_within("board translation", t, &reference["board_pose"]["translation_mm"]);
    assert_within("board rotation", r, &reference["board_pose"]["rotation_rad"]);
}

#[test]
fn single_view_rig_noise() {
    let intr = FisheyeIntrinsics::default_synthetic();
    let spec = common::board();
    let poses = &common::board_poses(&spec)[..1];
    let truth = common::rig();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut t, mut r) = (Vec::new(), Vec::new());
    for _ in 0..TRIALS {
        let views = common::stereo_views(&intr, &spec, poses, 0.2, &mut rng);
        let cal = calibrate_extrinsics(&views, &intr, &intr, &spec).unwrap();
        t.push((cal.right_pose.translation() - truth.translation()).norm());
        r.push(cal.right_pose.rotation_angle_to(&truth));
    }
    let reference = reference();
    assert_within("rig translation", t, &reference["rig_single_view"]["translation_mm"]);
    assert_within("rig rotation", r, &reference["rig_single_view"]["rotation_rad"]);
}

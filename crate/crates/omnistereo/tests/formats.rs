mod common;

use omnistereo::formats::{
    corners_to_csv, heatmap_pgm, matches_to_csv, read_corners, read_matches, read_scene, scene_to_csv, write_bench_csv,
    FormatError, BENCH_HEADER,
};
use omnistereo_core::{BenchConfig, FisheyeIntrinsics, MatchPair, MatchSet, MatchSource, PixelPoint, Vec3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn intr() -> FisheyeIntrinsics {
    FisheyeIntrinsics::default_synthetic()
}

fn load(text: &str) -> Result<MatchSet, FormatError> {
    read_matches(text.as_bytes(), &intr(), &intr(), "t")
}

#[test]
fn empty_match_file() {
    let err = load("").unwrap_err();
    assert!(matches!(err, FormatError::Parse { line: 1, ref msg } if msg == "empty file"), "{err}");
    assert!(matches!(load("uL,vL,uR,vR\n"), Err(FormatError::Parse { .. })));
}

#[test]
fn three_rows_without_confidence() {
    let set = load("uL,vL,uR,vR\n600,600,610,600\n700.5,640,690.25,641\n640,640,640,640\n").unwrap();
    assert_eq!(set.len(), 3);
    assert_eq!(set.source, MatchSource::External);
    assert!(set.pairs.iter().all(|p| p.confidence() == 1.0));
    assert_eq!(set.pairs[1].right, PixelPoint::new(690.25, 641.0));
}

#[test]
fn confidence_out_of_range_names_the_line() {
    let err = load("uL,vL,uR,vR,confidence\n600,600,610,600,0.5\n600,600,610,600,1.5\n").unwrap_err();
    match err {
        FormatError::Parse { line, msg } => {
            assert_eq!(line, 3);
            assert!(msg.contains("confidence"), "{msg}");
        }
        other => panic!("{other}"),
    }
}

#[test]
fn malformed_rows() {
    assert!(matches!(load("uL,vL,uR,vR\n600,600,610\n"), Err(FormatError::Parse { line: 2, .. })));
    assert!(matches!(load("uL,vL,uR,vR\n600,abc,610,600\n"), Err(FormatError::Parse { line: 2, .. })));
    assert!(matches!(load("uL,vL,uR,vR\n600,NaN,610,600\n"), Err(FormatError::Parse { line: 2, .. })));
    assert!(matches!(load("a,b,c,d\n1,2,3,4\n"), Err(FormatError::Parse { line: 1, .. })));
}

#[test]
fn pixel_outside_image_circle() {
    // default image circle radius is 300 px · 97.975° ≈ 513 px around (640, 640)
    let err = load("uL,vL,uR,vR\n600,600,610,600\n640,640,1200,640\n").unwrap_err();
    assert!(matches!(err, FormatError::OutOfBoundsPixel { line: 3, side: "right", .. }), "{err}");
}

proptest! {
    #[test]
    fn match_csv_round_trip(rows in prop::collection::vec(
        (-360.0f64..360.0, -360.0f64..360.0, -360.0f64..360.0, -360.0f64..360.0, 0.0f64..=1.0), 1..40)
    ) {
        let pairs = rows
            .iter()
            .map(|&(a, b, c, d, conf)| {
                MatchPair::new(PixelPoint::new(640.0 + a, 640.0 + b), PixelPoint::new(640.0 + c, 640.0 + d), conf).unwrap()
            })
            .collect();
        let set = MatchSet { pairs, source: MatchSource::External, scene_id: "t".into() };
        prop_assert_eq!(load(&matches_to_csv(&set)).unwrap(), set);
    }
}

#[test]
fn scene_round_trip() {
    let pts = vec![Vec3::new(-3000.0, 2000.0, 5000.0), Vec3::new(0.1, -0.2, 1e-7)];
    assert_eq!(read_scene(scene_to_csv(&pts).as_bytes()).unwrap(), pts);
}

#[test]
fn corners_round_trip_and_grouping() {
    let spec = common::board();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let views = common::stereo_views(&intr(), &spec, &common::board_poses(&spec), 0.0, &mut rng);
    let csv = corners_to_csv(&views, &spec);
    assert_eq!(csv.lines().next(), Some("view,camera,i,j,u,v"));
    assert_eq!(read_corners(csv.as_bytes(), &spec).unwrap(), views);

    // rows in any order
    let mut lines: Vec<&str> = csv.lines().skip(1).collect();
    lines.reverse();
    let shuffled = format!("view,camera,i,j,u,v\n{}\n", lines.join("\n"));
    assert_eq!(read_corners(shuffled.as_bytes(), &spec).unwrap(), views);
}

#[test]
fn corners_from_one_camera_only() {
    let spec = common::board();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let views = common::stereo_views(&intr(), &spec, &common::board_poses(&spec), 0.0, &mut rng);
    let left_only: String =
        corners_to_csv(&views, &spec).lines().filter(|l| !l.contains(",R,")).map(|l| format!("{l}\n")).collect();
    let err = read_corners(left_only.as_bytes(), &spec).unwrap_err();
    assert!(err.to_string().contains("no right-camera corners"), "{err}");
}

#[test]
fn corners_incomplete_or_duplicate() {
    let spec = common::board();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let views = common::stereo_views(&intr(), &spec, &common::board_poses(&spec)[..1], 0.0, &mut rng);
    let csv = corners_to_csv(&views, &spec);
    let missing: String = csv.lines().filter(|l| !l.starts_with("0,L,5,7,")).map(|l| format!("{l}\n")).collect();
    assert!(read_corners(missing.as_bytes(), &spec).unwrap_err().to_string().contains("1 corners missing"));
    let dup = format!("{csv}0,L,0,0,1,1\n");
    assert!(matches!(read_corners(dup.as_bytes(), &spec), Err(FormatError::Parse { .. })));
    let outside = format!("{csv}1,L,6,0,1,1\n");
    assert!(matches!(read_corners(outside.as_bytes(), &spec), Err(FormatError::Parse { .. })));
}

#[test]
fn bench_csv_and_heatmap_shapes() {
    let cfg =
        BenchConfig { x_min: -0.01, x_max: 0.01, y_min: -0.005, y_max: 0.005, step: 0.005, ..BenchConfig::default() };
    let grid = omnistereo::commands::run_grid(&cfg).unwrap();
    let mut out = Vec::new();
    write_bench_csv(&grid, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], BENCH_HEADER);
    assert_eq!(lines.len(), 1 + 5 * 3);
    assert!(lines[1].starts_with("-0.01,-0.005,severe,"));

    let pgm = heatmap_pgm(&grid, cfg.e_max, |c| c.err_pseudo);
    let mut it = pgm.lines();
    assert_eq!(it.next(), Some("P2"));
    assert_eq!(it.next(), Some("5 3"));
    assert_eq!(it.next(), Some("255"));
    let rows: Vec<Vec<u32>> = it.map(|l| l.split(' ').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.len() == 5 && r.iter().all(|&v| v <= 255)));
    // the centre cell has zero error
    assert_eq!(rows[1][2], 0);
}

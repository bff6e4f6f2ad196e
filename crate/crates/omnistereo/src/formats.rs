//! On-disk formats: intrinsics and rig JSON, corner / match / scene CSV,
//! bench CSV, graymap heatmaps and the calibration report.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use omnistereo_core::{
    CameraId, ChessboardSpec, CornerObservations, ExtrinsicCalibration, FisheyeIntrinsics, MatchPair, MatchSet,
    MatchSource, NoiseGrid, PixelPoint, RigidTransform, StereoView, Vec3,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MATCH_HEADER: [&str; 5] = ["uL", "vL", "uR", "vR", "confidence"];
pub const CORNER_HEADER: [&str; 6] = ["view", "camera", "i", "j", "u", "v"];
pub const SCENE_HEADER: [&str; 3] = ["x", "y", "z"];
pub const BENCH_HEADER: &str =
    "x,y,zone,err_pseudo_mm,err_midpoint_mm,eucl_pseudo_mm,eucl_midpoint_mm,pass_pseudo,pass_midpoint,degenerate";
pub const POINTS_HEADER: &str = "uL,vL,uR,vR,X,Y,Z,skew_mm,accepted";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("line {line}: {side} pixel ({u}, {v}) lies outside the image circle")]
    OutOfBoundsPixel { line: u64, side: &'static str, u: f64, v: f64 },
    #[error("invalid {what}: {msg}")]
    Invalid { what: &'static str, msg: String },
}

impl FormatError {
    fn parse(line: u64, msg: impl Into<String>) -> Self {
        Self::Parse { line, msg: msg.into() }
    }

    fn invalid(what: &'static str, msg: impl ToString) -> Self {
        Self::Invalid { what, msg: msg.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, FormatError>;

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.into(), source })
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|source| FormatError::Io { path: path.into(), source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntrinsicsFile {
    k: [f64; 5],
    cx: f64,
    cy: f64,
    mu: f64,
    mv: f64,
    theta_max_deg: f64,
}

pub fn parse_intrinsics(text: &str) -> Result<FisheyeIntrinsics> {
    let f: IntrinsicsFile = serde_json::from_str(text).map_err(|e| FormatError::invalid("intrinsics", e))?;
    FisheyeIntrinsics::new(f.k, f.cx, f.cy, f.mu, f.mv, f.theta_max_deg.to_radians())
        .map_err(|e| FormatError::invalid("intrinsics", e))
}

pub fn intrinsics_to_json(intr: &FisheyeIntrinsics) -> String {
    let pp = intr.principal_point();
    let (mu, mv) = intr.pixel_scales();
    let f = IntrinsicsFile { k: intr.k(), cx: pp.u, cy: pp.v, mu, mv, theta_max_deg: intr.theta_max().to_degrees() };
    serde_json::to_string_pretty(&f).expect("plain numbers serialize") + "\n"
}

pub fn load_intrinsics(path: &Path) -> Result<FisheyeIntrinsics> {
    parse_intrinsics(&read_file(path)?)
}

/// Right camera pose in the left camera frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RigFile {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl RigFile {
    fn from_pose(pose: &RigidTransform) -> Self {
        let r = pose.rotation();
        let t = pose.translation();
        Self { rotation: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]), translation: [t.x, t.y, t.z] }
    }
}

/// Reads `{"rotation": 3×3 row-major, "translation": [mm; 3]}`. Other keys
/// are ignored, so a calibration report doubles as a rig file.
pub fn parse_rig(text: &str) -> Result<RigidTransform> {
    let f: RigFile = serde_json::from_str(text).map_err(|e| FormatError::invalid("rig", e))?;
    let r = Matrix3::from_fn(|i, j| f.rotation[i][j]);
    RigidTransform::new(r, Vec3::from(f.translation)).map_err(|e| FormatError::invalid("rig", e))
}

pub fn rig_to_json(pose: &RigidTransform) -> String {
    serde_json::to_string_pretty(&RigFile::from_pose(pose)).expect("plain numbers serialize") + "\n"
}

pub fn load_rig(path: &Path) -> Result<RigidTransform> {
    parse_rig(&read_file(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewEntry {
    pub view: u32,
    pub left_rms_rad: f64,
    pub right_rms_rad: f64,
    pub rms_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    pub rms_mm: f64,
    pub views: Vec<ViewEntry>,
}

impl From<&ExtrinsicCalibration> for CalibrationReport {
    fn from(cal: &ExtrinsicCalibration) -> Self {
        let rig = RigFile::from_pose(&cal.right_pose);
        Self {
            rotation: rig.rotation,
            translation: rig.translation,
            rms_mm: cal.rms_mm,
            views: cal
                .views
                .iter()
                .map(|v| ViewEntry {
                    view: v.view,
                    left_rms_rad: v.left_rms_rad,
                    right_rms_rad: v.right_rms_rad,
                    rms_mm: v.rms_mm,
                })
                .collect(),
        }
    }
}

pub fn report_to_json(cal: &ExtrinsicCalibration) -> String {
    serde_json::to_string_pretty(&CalibrationReport::from(cal)).expect("plain numbers serialize") + "\n"
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str], optional_tail: usize) -> Result<usize> {
    let header = rdr.headers().map_err(|e| FormatError::parse(1, e.to_string()))?.clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(FormatError::parse(1, "empty file"));
    }
    let n = header.len();
    let ok =
        n <= expected.len() && n >= expected.len() - optional_tail && header.iter().zip(expected).all(|(a, b)| a == *b);
    if !ok {
        return Err(FormatError::parse(1, format!("expected header {}", expected.join(","))));
    }
    Ok(n)
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    let raw = record.get(idx).unwrap_or("");
    raw.parse().map_err(|_| FormatError::parse(line_of(record), format!("bad {name} value {raw:?}")))
}

fn finite(record: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
    let v: f64 = field(record, idx, name)?;
    if !v.is_finite() {
        return Err(FormatError::parse(line_of(record), format!("{name} must be finite")));
    }
    Ok(v)
}

/// Parses `uL,vL,uR,vR[,confidence]`; confidence defaults to 1. Every pixel
/// must lie inside its camera's image circle.
pub fn read_matches<R: Read>(
    reader: R,
    intr_left: &FisheyeIntrinsics,
    intr_right: &FisheyeIntrinsics,
    scene_id: &str,
) -> Result<MatchSet> {
    let mut rdr = csv_reader(reader);
    let width = check_header(&mut rdr, &MATCH_HEADER, 1)?;
    let mut pairs = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| FormatError::parse(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = line_of(&record);
        if record.len() != width {
            return Err(FormatError::parse(line, format!("expected {width} fields, got {}", record.len())));
        }
        let left = PixelPoint::new(finite(&record, 0, "uL")?, finite(&record, 1, "vL")?);
        let right = PixelPoint::new(finite(&record, 2, "uR")?, finite(&record, 3, "vR")?);
        let confidence = if width == 5 { finite(&record, 4, "confidence")? } else { 1.0 };
        for (side, p, intr) in [("left", left, intr_left), ("right", right, intr_right)] {
            if !intr.contains(&p) {
                return Err(FormatError::OutOfBoundsPixel { line, side, u: p.u, v: p.v });
            }
        }
        let pair = MatchPair::new(left, right, confidence)
            .map_err(|_| FormatError::parse(line, format!("confidence {confidence} outside [0, 1]")))?;
        pairs.push(pair);
    }
    if pairs.is_empty() {
        return Err(FormatError::parse(2, "no match rows"));
    }
    Ok(MatchSet { pairs, source: MatchSource::External, scene_id: scene_id.into() })
}

pub fn load_matches(path: &Path, intr_left: &FisheyeIntrinsics, intr_right: &FisheyeIntrinsics) -> Result<MatchSet> {
    let text = read_file(path)?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    read_matches(text.as_bytes(), intr_left, intr_right, &id)
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn matches_to_csv(set: &MatchSet) -> String {
    let mut out = MATCH_HEADER.join(",") + "\n";
    for p in &set.pairs {
        out += &format!("{},{},{},{},{}\n", p.left.u, p.left.v, p.right.u, p.right.v, p.confidence());
    }
    out
}

pub fn read_scene<R: Read>(reader: R) -> Result<Vec<Vec3>> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, &SCENE_HEADER, 0)?;
    let mut points = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| FormatError::parse(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        if record.len() != 3 {
            return Err(FormatError::parse(line_of(&record), format!("expected 3 fields, got {}", record.len())));
        }
        points.push(Vec3::new(finite(&record, 0, "x")?, finite(&record, 1, "y")?, finite(&record, 2, "z")?));
    }
    if points.is_empty() {
        return Err(FormatError::parse(2, "no scene rows"));
    }
    Ok(points)
}

pub fn load_scene(path: &Path) -> Result<Vec<Vec3>> {
    read_scene(read_file(path)?.as_bytes())
}

pub fn scene_to_csv(points: &[Vec3]) -> String {
    let mut out = SCENE_HEADER.join(",") + "\n";
    for p in points {
        out += &format!("{},{},{}\n", p.x, p.y, p.z);
    }
    out
}

/// Parses `view,camera,i,j,u,v` and groups rows into complete stereo views,
/// sorted by view id. `camera` is `L` or `R`.
pub fn read_corners<R: Read>(reader: R, spec: &ChessboardSpec) -> Result<Vec<StereoView>> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, &CORNER_HEADER, 0)?;
    let mut grids: BTreeMap<(u32, CameraId), Vec<Option<PixelPoint>>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| FormatError::parse(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = line_of(&record);
        if record.len() != 6 {
            return Err(FormatError::parse(line, format!("expected 6 fields, got {}", record.len())));
        }
        let view: u32 = field(&record, 0, "view")?;
        let camera = match record.get(1) {
            Some("L") => CameraId::Left,
            Some("R") => CameraId::Right,
            other => {
                return Err(FormatError::parse(line, format!("camera must be L or R, got {:?}", other.unwrap_or(""))))
            }
        };
        let i: usize = field(&record, 2, "i")?;
        let j: usize = field(&record, 3, "j")?;
        if i >= spec.rows() || j >= spec.cols() {
            return Err(FormatError::parse(
                line,
                format!("corner ({i}, {j}) outside the {}×{} grid", spec.rows(), spec.cols()),
            ));
        }
        let p = PixelPoint::new(finite(&record, 4, "u")?, finite(&record, 5, "v")?);
        let slot =
            &mut grids.entry((view, camera)).or_insert_with(|| vec![None; spec.corner_count()])[i * spec.cols() + j];
        if slot.replace(p).is_some() {
            return Err(FormatError::parse(line, format!("duplicate corner ({i}, {j}) in view {view}")));
        }
    }
    if grids.is_empty() {
        return Err(FormatError::parse(2, "no corner rows"));
    }

    let mut complete: BTreeMap<(u32, CameraId), CornerObservations> = BTreeMap::new();
    for ((view, camera), grid) in grids {
        let missing = grid.iter().filter(|p| p.is_none()).count();
        if missing > 0 {
            return Err(FormatError::invalid(
                "corners",
                format!("view {view} camera {camera:?}: {missing} corners missing"),
            ));
        }
        let pixels = grid.into_iter().flatten().collect();
        complete.insert((view, camera), CornerObservations { camera, view, pixels });
    }
    let views: Vec<u32> =
        complete.keys().map(|(v, _)| *v).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    views
        .into_iter()
        .map(|view| {
            let left = complete.remove(&(view, CameraId::Left));
            let right = complete.remove(&(view, CameraId::Right));
            match (left, right) {
                (Some(left), Some(right)) => Ok(StereoView { left, right }),
                (None, _) => Err(FormatError::invalid("corners", format!("view {view} has no left-camera corners"))),
                (_, None) => Err(FormatError::invalid("corners", format!("view {view} has no right-camera corners"))),
            }
        })
        .collect()
}

pub fn load_corners(path: &Path, spec: &ChessboardSpec) -> Result<Vec<StereoView>> {
    read_corners(read_file(path)?.as_bytes(), spec)
}

pub fn corners_to_csv(views: &[StereoView], spec: &ChessboardSpec) -> String {
    let mut out = CORNER_HEADER.join(",") + "\n";
    for view in views {
        for (obs, tag) in [(&view.left, "L"), (&view.right, "R")] {
            for (k, p) in obs.pixels.iter().enumerate() {
                out += &format!("{},{tag},{},{},{},{}\n", obs.view, k / spec.cols(), k % spec.cols(), p.u, p.v);
            }
        }
    }
    out
}

pub fn write_bench_csv<W: Write>(grid: &NoiseGrid, mut w: W) -> io::Result<()> {
    writeln!(w, "{BENCH_HEADER}")?;
    for c in &grid.cells {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            c.x,
            c.y,
            c.zone.as_str(),
            c.err_pseudo,
            c.err_midpoint,
            c.eucl_pseudo,
            c.eucl_midpoint,
            c.pass_pseudo,
            c.pass_midpoint,
            c.degenerate
        )?;
    }
    Ok(())
}

/// Plain (P2) graymap of `|error|` clamped to `[0, e_max]`, mapped to
/// 0–255. Top image row is the largest `y`; degenerate cells are white.
pub fn heatmap_pgm(grid: &NoiseGrid, e_max: f64, error: impl Fn(&omnistereo_core::BenchCell) -> f64) -> String {
    let (w, h) = (grid.width(), grid.height());
    let mut out = format!("P2\n{w} {h}\n255\n");
    for iy in (0..h).rev() {
        let row: Vec<String> = grid
            .row(iy)
            .iter()
            .map(|c| {
                let e = error(c).abs();
                let level = if e.is_nan() { 255.0 } else { (e.min(e_max) / e_max * 255.0).round() };
                (level as u8).to_string()
            })
            .collect();
        out += &row.join(" ");
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intrinsics_round_trip() {
        let intr = FisheyeIntrinsics::new([280.0, 15.0, -3.0, 0.5, -0.02], 650.0, 630.0, 1.0, 1.02, 1.6).unwrap();
        let back = parse_intrinsics(&intrinsics_to_json(&intr)).unwrap();
        assert_eq!(back.k(), intr.k());
        assert!((back.theta_max() - intr.theta_max()).abs() < 1e-15);
    }

    #[test]
    fn intrinsics_reject_bad_values() {
        let bad = r#"{"k":[300,0,0,0,0],"cx":640,"cy":640,"mu":-1,"mv":1,"theta_max_deg":97}"#;
        assert!(matches!(parse_intrinsics(bad), Err(FormatError::Invalid { .. })));
        assert!(parse_intrinsics(r#"{"k":[300]}"#).is_err());
    }

    #[test]
    fn rig_rejects_non_rotation() {
        let text = r#"{"rotation":[[1,0,0],[0,1,0],[0,0,2]],"translation":[150,0,0]}"#;
        assert!(parse_rig(text).is_err());
        let ok = r#"{"rotation":[[1,0,0],[0,1,0],[0,0,1]],"translation":[150,0,0],"rms_mm":0}"#;
        assert_eq!(parse_rig(ok).unwrap().translation().x, 150.0);
    }

    #[test]
    fn rig_round_trip_is_exact() {
        let pose = RigidTransform::from_axis_angle(Vec3::new(0.01, 0.52, -0.003), Vec3::new(150.0, 1.5, -2.25));
        assert_eq!(parse_rig(&rig_to_json(&pose)).unwrap(), pose);
    }

    #[test]
    fn scene_needs_three_columns() {
        assert!(read_scene("x,y,z\n1,2,3\n".as_bytes()).is_ok());
        let err = read_scene("x,y,z\n1,2,3\n4,5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 3, .. }), "{err}");
        assert!(read_scene("x,y\n1,2\n".as_bytes()).is_err());
    }
}

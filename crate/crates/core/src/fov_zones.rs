//! Horizontal field-of-view zones of a two-camera rig.
//!
//! Two co-aligned cameras with horizontal field `H` whose fields overlap by
//! `O` split the horizon into a stereo zone `S = O`, a monocular zone
//! `M = 2H - 2O` and a blind zone `B = 360 - S - M`. All angles are degrees.

use alloc::string::String;
use thiserror::Error;

/// Nominal horizontal field of the lens, rounded the way mode arithmetic uses it.
pub const DEFAULT_FOV_DEG: f64 = 196.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ZoneError {
    #[error("overlap {overlap}° must lie in [0, {fov}°]")]
    InvalidOverlap { fov: f64, overlap: f64 },
    #[error("combined coverage 2H - O = {0}° exceeds 360°")]
    CoverageExceeds360(f64),
    #[error("field of view {0}° must lie in (0, 360]")]
    InvalidFov(f64),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zones {
    pub stereo: f64,
    pub monocular: f64,
    pub blind: f64,
}

impl Zones {
    /// Total visible field, `S + M`.
    pub fn total_fov(&self) -> f64 {
        self.stereo + self.monocular
    }
}

pub fn compute_zones(fov: f64, overlap: f64) -> Result<Zones, ZoneError> {
    if !(fov.is_finite() && fov > 0.0 && fov <= 360.0) {
        return Err(ZoneError::InvalidFov(fov));
    }
    if !(overlap.is_finite() && overlap >= 0.0 && overlap <= fov) {
        return Err(ZoneError::InvalidOverlap { fov, overlap });
    }
    let coverage = 2.0 * fov - overlap;
    if coverage > 360.0 {
        return Err(ZoneError::CoverageExceeds360(coverage));
    }
    let stereo = overlap;
    let monocular = 2.0 * fov - 2.0 * overlap;
    Ok(Zones { stereo, monocular, blind: 360.0 - stereo - monocular })
}

/// A named camera arrangement and its zones.
#[derive(Debug, Clone, PartialEq)]
pub struct VisionMode {
    pub name: String,
    pub fov: f64,
    pub overlap: f64,
    pub zones: Zones,
}

impl VisionMode {
    pub fn new(name: impl Into<String>, fov: f64, overlap: f64) -> Result<Self, ZoneError> {
        let zones = compute_zones(fov, overlap)?;
        Ok(Self { name: name.into(), fov, overlap, zones })
    }

    pub fn total_fov(&self) -> f64 {
        self.zones.total_fov()
    }
}

/// Preset names accepted by [`preset`]; aliases share an overlap.
pub const PRESET_NAMES: [&str; 6] = ["herbivorous", "gecko", "carnivorous", "spider", "human", "stick_bug"];

fn preset_overlap(name: &str) -> Option<f64> {
    match name {
        // wide panoramic field, narrow binocular overlap
        "herbivorous" | "gecko" => Some(76.0),
        "carnivorous" | "spider" => Some(136.0),
        "human" => Some(196.0),
        "stick_bug" => Some(150.0),
        _ => None,
    }
}

pub fn preset(name: &str) -> Result<VisionMode, ZoneError> {
    let overlap = preset_overlap(name).ok_or_else(|| ZoneError::UnknownPreset(name.into()))?;
    VisionMode::new(name, DEFAULT_FOV_DEG, overlap)
}

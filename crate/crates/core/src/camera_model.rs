//! Kannala-Brandt omnidirectional camera model.
//!
//! The radial mapping is the odd polynomial
//!
//! ```text
//! r(θ) = k1·θ + k2·θ³ + k3·θ⁵ + k4·θ⁷ + k5·θ⁹
//! ```
//!
//! with `r` in pixels (the focal length is folded into `k1`) and `θ` the
//! polar angle between the principal axis (+z) and the incident ray. A pixel
//! sits at `(cx + mu·r·cos φ, cy + mv·r·sin φ)` where `φ` is the azimuth of
//! the ray around the principal axis.
//!
//! Retrieval of the optical path inverts `r(θ)` with a safeguarded Newton
//! iteration; the construction-time monotonicity check guarantees the
//! inverse is unique on `[0, theta_max]`.

use thiserror::Error;

use crate::Vec3;

/// Number of derivative samples used to certify monotonicity.
const MONOTONE_SAMPLES: usize = 4096;
const UNIT_TOL: f64 = 1e-9;
const THETA_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum CameraError {
    #[error("polar angle {theta} rad exceeds theta_max {theta_max} rad")]
    PolarAngleOutOfRange { theta: f64, theta_max: f64 },
    #[error("direction norm {0} is not 1")]
    NonUnitDirection(f64),
    #[error("radius {r} px outside [0, {r_max}] px")]
    RadiusOutOfRange { r: f64, r_max: f64 },
    #[error("radial polynomial is not strictly increasing near θ = {0} rad")]
    NonMonotonic(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidParameter(&'static str),
}

/// Image coordinates in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// Kannala-Brandt intrinsics. Construct through [`FisheyeIntrinsics::new`],
/// which enforces the monotone-radius invariant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisheyeIntrinsics {
    k: [f64; 5],
    cx: f64,
    cy: f64,
    mu: f64,
    mv: f64,
    theta_max: f64,
    r_max: f64,
}

impl FisheyeIntrinsics {
    pub fn new(k: [f64; 5], cx: f64, cy: f64, mu: f64, mv: f64, theta_max: f64) -> Result<Self, CameraError> {
        if k.iter().chain([cx, cy, mu, mv, theta_max].iter()).any(|v| !v.is_finite()) {
            return Err(CameraError::InvalidParameter("non-finite value"));
        }
        if !(theta_max > 0.0 && theta_max <= core::f64::consts::PI) {
            return Err(CameraError::InvalidParameter("theta_max must lie in (0, π]"));
        }
        if !(mu > 0.0 && mv > 0.0) {
            return Err(CameraError::InvalidParameter("pixel scales must be positive"));
        }
        for i in 0..=MONOTONE_SAMPLES {
            let theta = theta_max * i as f64 / MONOTONE_SAMPLES as f64;
            if radius_derivative(&k, theta) <= 0.0 {
                return Err(CameraError::NonMonotonic(theta));
            }
        }
        Ok(Self { k, cx, cy, mu, mv, theta_max, r_max: radius(&k, theta_max) })
    }

    /// Equidistant model `r = k1·θ` with unit pixel scales.
    pub fn equidistant(k1: f64, cx: f64, cy: f64, theta_max: f64) -> Result<Self, CameraError> {
        Self::new([k1, 0.0, 0.0, 0.0, 0.0], cx, cy, 1.0, 1.0, theta_max)
    }

    /// Synthetic default: `k1 = 300 px/rad`, principal point (640, 640),
    /// `theta_max` = half of a 195.95° horizontal field.
    pub fn default_synthetic() -> Self {
        Self::equidistant(300.0, 640.0, 640.0, (195.95_f64 / 2.0).to_radians()).expect("default intrinsics are valid")
    }

    pub fn k(&self) -> [f64; 5] {
        self.k
    }

    pub fn principal_point(&self) -> PixelPoint {
        PixelPoint::new(self.cx, self.cy)
    }

    pub fn pixel_scales(&self) -> (f64, f64) {
        (self.mu, self.mv)
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    /// `r(theta_max)`, the radius of the valid image circle in pixels.
    pub fn max_radius(&self) -> f64 {
        self.r_max
    }

    /// Evaluates the radial polynomial.
    pub fn radius(&self, theta: f64) -> f64 {
        radius(&self.k, theta)
    }

    /// Scaled radial distance of `p` from the principal point.
    pub fn pixel_radius(&self, p: &PixelPoint) -> f64 {
        libm::hypot((p.u - self.cx) / self.mu, (p.v - self.cy) / self.mv)
    }

    /// `true` when `p` lies inside the valid image circle.
    pub fn contains(&self, p: &PixelPoint) -> bool {
        p.is_finite() && self.pixel_radius(p) <= self.r_max * (1.0 + 1e-12)
    }
}

fn radius(k: &[f64; 5], theta: f64) -> f64 {
    let t2 = theta * theta;
    theta * (k[0] + t2 * (k[1] + t2 * (k[2] + t2 * (k[3] + t2 * k[4]))))
}

fn radius_derivative(k: &[f64; 5], theta: f64) -> f64 {
    let t2 = theta * theta;
    k[0] + t2 * (3.0 * k[1] + t2 * (5.0 * k[2] + t2 * (7.0 * k[3] + t2 * 9.0 * k[4])))
}

/// Projects a unit direction in the camera frame to a pixel.
pub fn project(intr: &FisheyeIntrinsics, dir: &Vec3) -> Result<PixelPoint, CameraError> {
    let n = dir.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
        return Err(CameraError::NonUnitDirection(n));
    }
    let rho = libm::hypot(dir.x, dir.y);
    let theta = libm::atan2(rho, dir.z);
    if theta > intr.theta_max {
        return Err(CameraError::PolarAngleOutOfRange { theta, theta_max: intr.theta_max });
    }
    let r = intr.radius(theta);
    if rho == 0.0 {
        return Ok(intr.principal_point());
    }
    let (cos_phi, sin_phi) = (dir.x / rho, dir.y / rho);
    Ok(PixelPoint::new(intr.cx + intr.mu * r * cos_phi, intr.cy + intr.mv * r * sin_phi))
}

/// Inverts the radial polynomial: the unique `θ ∈ [0, theta_max]` with `r(θ) = r`.
///
/// Newton from `θ0 = r / k1`, falling back to bisection whenever a step would
/// leave the current bracket.
pub fn solve_theta(intr: &FisheyeIntrinsics, r: f64) -> Result<f64, CameraError> {
    let r_max = intr.r_max;
    let slack = 1e-10 * r_max.max(1.0);
    if !r.is_finite() || r < 0.0 || r > r_max + slack {
        return Err(CameraError::RadiusOutOfRange { r, r_max });
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    if r >= r_max {
        return Ok(intr.theta_max);
    }

    let tol_r = 1e-10 * r.max(1.0);
    let (mut lo, mut hi) = (0.0, intr.theta_max);
    let mut theta = (r / intr.k[0]).clamp(lo, hi);
    for _ in 0..MAX_ITERATIONS {
        let f = intr.radius(theta) - r;
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let df = radius_derivative(&intr.k, theta);
        let mut next = theta - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - theta).abs();
        theta = next;
        if step < THETA_TOL && (intr.radius(theta) - r).abs() < tol_r {
            break;
        }
        if hi - lo < f64::EPSILON * intr.theta_max {
            break;
        }
    }
    Ok(theta)
}

/// Retrieves the unit incident direction (camera frame) for pixel `p`.
pub fn unproject(intr: &FisheyeIntrinsics, p: &PixelPoint) -> Result<Vec3, CameraError> {
    if !p.is_finite() {
        return Err(CameraError::RadiusOutOfRange { r: f64::NAN, r_max: intr.r_max });
    }
    let du = (p.u - intr.cx) / intr.mu;
    let dv = (p.v - intr.cy) / intr.mv;
    let r = libm::hypot(du, dv);
    let theta = solve_theta(intr, r)?;
    let phi = libm::atan2(dv, du);
    let s = libm::sin(theta);
    Ok(Vec3::new(s * libm::cos(phi), s * libm::sin(phi), libm::cos(theta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle_between;
    use proptest::prelude::*;

    fn equidistant_origin() -> FisheyeIntrinsics {
        FisheyeIntrinsics::equidistant(300.0, 0.0, 0.0, (97.975_f64).to_radians()).unwrap()
    }

    fn five_term() -> FisheyeIntrinsics {
        FisheyeIntrinsics::new([280.0, 15.0, -3.0, 0.5, -0.02], 640.0, 640.0, 1.0, 1.0, (97.975_f64).to_radians())
            .unwrap()
    }

    fn dir(theta: f64, phi: f64) -> Vec3 {
        Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
    }

    #[test]
    fn principal_axis_projects_to_principal_point() {
        for intr in [FisheyeIntrinsics::default_synthetic(), five_term()] {
            let p = project(&intr, &Vec3::z()).unwrap();
            assert_eq!(p, intr.principal_point());
            assert_eq!(unproject(&intr, &p).unwrap(), Vec3::z());
        }
    }

    #[test]
    fn equidistant_projection_examples() {
        let intr = equidistant_origin();
        let p = project(&intr, &dir(0.5, 0.0)).unwrap();
        assert!((p.u - 150.0).abs() < 1e-12 && p.v.abs() < 1e-12);
        let p = project(&intr, &dir(0.5, core::f64::consts::FRAC_PI_2)).unwrap();
        assert!(p.u.abs() < 1e-12 && (p.v - 150.0).abs() < 1e-12);
    }

    #[test]
    fn equidistant_inverse_examples() {
        let intr = equidistant_origin();
        assert_eq!(solve_theta(&intr, 0.0).unwrap(), 0.0);
        assert!((solve_theta(&intr, 150.0).unwrap() - 0.5).abs() < 1e-15);
        let d = unproject(&intr, &PixelPoint::new(150.0, 0.0)).unwrap();
        assert!(angle_between(&d, &dir(0.5, 0.0)) < 1e-15);
    }

    #[test]
    fn five_term_inverse_at_0_9() {
        let intr = five_term();
        // forward evaluation written out term by term
        let t: f64 = 0.9;
        let r = 280.0 * t + 15.0 * t.powi(3) - 3.0 * t.powi(5) + 0.5 * t.powi(7) - 0.02 * t.powi(9);
        let theta = solve_theta(&intr, r).unwrap();
        assert!((theta - 0.9).abs() < 1e-10, "theta = {theta}");
    }

    #[test]
    fn out_of_range_errors() {
        let intr = FisheyeIntrinsics::default_synthetic();
        assert!(matches!(solve_theta(&intr, -1.0), Err(CameraError::RadiusOutOfRange { .. })));
        assert!(matches!(solve_theta(&intr, intr.max_radius() + 1.0), Err(CameraError::RadiusOutOfRange { .. })));
        assert!(matches!(project(&intr, &Vec3::new(0.0, 0.0, -1.0)), Err(CameraError::PolarAngleOutOfRange { .. })));
        assert!(matches!(project(&intr, &Vec3::new(0.0, 0.0, 2.0)), Err(CameraError::NonUnitDirection(_))));
        let outside = PixelPoint::new(640.0 + intr.max_radius() + 5.0, 640.0);
        assert!(!intr.contains(&outside));
        assert!(unproject(&intr, &outside).is_err());
    }

    #[test]
    fn rays_behind_the_image_plane_are_supported() {
        let intr = FisheyeIntrinsics::default_synthetic();
        let d = dir(1.65, 2.0);
        assert!(d.z < 0.0);
        let back = unproject(&intr, &project(&intr, &d).unwrap()).unwrap();
        assert!(angle_between(&d, &back) < 1e-12);
    }

    #[test]
    fn rejects_non_monotone_and_bad_parameters() {
        assert!(matches!(
            FisheyeIntrinsics::new([100.0, -200.0, 0.0, 0.0, 0.0], 0.0, 0.0, 1.0, 1.0, 1.5),
            Err(CameraError::NonMonotonic(_))
        ));
        assert!(FisheyeIntrinsics::new([300.0, 0.0, 0.0, 0.0, 0.0], 0.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(FisheyeIntrinsics::new([300.0, 0.0, 0.0, 0.0, 0.0], 0.0, 0.0, 1.0, 1.0, 4.0).is_err());
        assert!(FisheyeIntrinsics::new([300.0, 0.0, 0.0, 0.0, 0.0], 0.0, 0.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn non_square_pixels_round_trip() {
        let intr = FisheyeIntrinsics::new([300.0, 0.0, 0.0, 0.0, 0.0], 640.0, 480.0, 1.2, 0.9, 1.6).unwrap();
        let d = dir(0.8, -2.3);
        let p = project(&intr, &d).unwrap();
        assert!(angle_between(&d, &unproject(&intr, &p).unwrap()) < 1e-12);
    }

    #[test]
    fn solve_theta_inverts_on_sampled_radii() {
        let intr = five_term();
        for i in 0..=1000 {
            let r = intr.max_radius() * i as f64 / 1000.0;
            let theta = solve_theta(&intr, r).unwrap();
            assert!((intr.radius(theta) - r).abs() < 1e-9, "r = {r}");
        }
    }

    proptest! {
        #[test]
        fn round_trip(theta_frac in 0.0..0.95f64, phi in -core::f64::consts::PI..core::f64::consts::PI) {
            for intr in [FisheyeIntrinsics::default_synthetic(), five_term()] {
                let d = dir(theta_frac * intr.theta_max(), phi);
                let back = unproject(&intr, &project(&intr, &d).unwrap()).unwrap();
                prop_assert!(angle_between(&d, &back) < 1e-9);
            }
        }

        #[test]
        fn azimuth_is_preserved(du in -350.0..350.0f64, dv in -350.0..350.0f64) {
            let intr = FisheyeIntrinsics::default_synthetic();
            let d = unproject(&intr, &PixelPoint::new(640.0 + du, 640.0 + dv)).unwrap();
            if du != 0.0 || dv != 0.0 {
                prop_assert!((libm::atan2(d.y, d.x) - libm::atan2(dv, du)).abs() < 1e-14);
            }
        }

        #[test]
        fn radius_is_monotone(a in 0.0..1.0f64, b in 0.0..1.0f64) {
            let intr = five_term();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(lo < hi);
            prop_assert!(intr.radius(lo * intr.theta_max()) < intr.radius(hi * intr.theta_max()));
        }
    }
}

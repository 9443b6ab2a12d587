//! Angle conventions, angular binning, and camera models.
//!
//! Headings live in the robot body frame: `0` is straight ahead and angles
//! grow counter-clockwise (to the left). Every heading is kept in `(-π, π]`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{LrnError, Result};

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Absolute wrap-aware difference between two angles, in `[0, π]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

/// A robot-frame heading in radians, always normalized into `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Heading(f64);

impl Heading {
    pub fn new(radians: f64) -> Self {
        Heading(normalize_angle(radians))
    }

    pub fn from_degrees(deg: f64) -> Self {
        Heading::new(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// Wrap-aware distance to `other`, in radians.
    pub fn distance_to(self, other: Heading) -> f64 {
        angular_distance(self.0, other.0)
    }
}

impl std::ops::Add<f64> for Heading {
    type Output = Heading;
    fn add(self, rhs: f64) -> Heading {
        Heading::new(self.0 + rhs)
    }
}

/// A point in the plane (meters). Used both for world and robot-frame points.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Bearing of `other` as seen from `self`, in world frame.
    pub fn bearing_to(self, other: Point2) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

/// Ground point in the robot body frame produced by ray projection.
pub type GroundPoint = Point2;

/// World pose of the robot: position plus yaw (world frame, CCW from +x).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Pose2 { x, y, yaw: normalize_angle(yaw) }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Heading of a world point relative to this pose's body frame.
    pub fn relative_heading(&self, p: Point2) -> Heading {
        Heading::new(self.position().bearing_to(p) - self.yaw)
    }

    /// Expresses a world point in the body frame (x forward, y left).
    pub fn to_body(&self, p: Point2) -> Point2 {
        let (s, c) = self.yaw.sin_cos();
        let dx = p.x - self.x;
        let dy = p.y - self.y;
        Point2::new(c * dx + s * dy, -s * dx + c * dy)
    }
}

/// Equal-width angular sectors around the robot.
///
/// Bin `i` is centered at `i * 2π / k` and covers the half-open interval
/// `[center - width/2, center + width/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinLayout {
    k: usize,
}

impl BinLayout {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(LrnError::InvalidParameter("bin count must be positive".into()));
        }
        Ok(BinLayout { k })
    }

    /// Layout for a bin width in degrees; the width must divide 360 evenly.
    pub fn from_width_deg(width_deg: f64) -> Result<Self> {
        if !(width_deg > 0.0) || width_deg > 360.0 {
            return Err(LrnError::InvalidParameter(format!("bin width {width_deg} deg out of range")));
        }
        let k = (360.0 / width_deg).round();
        if (k * width_deg - 360.0).abs() > 1e-9 {
            return Err(LrnError::InvalidParameter(format!("bin width {width_deg} deg does not divide 360")));
        }
        BinLayout::new(k as usize)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bin_width(&self) -> f64 {
        TAU / self.k as f64
    }

    pub fn bin_width_deg(&self) -> f64 {
        360.0 / self.k as f64
    }

    pub fn bin_index(&self, h: Heading) -> usize {
        // Position in units of bins; bin i covers [i - 0.5, i + 0.5).
        let t = h.radians() / TAU * self.k as f64;
        let i = (t + 0.5).floor() as i64;
        i.rem_euclid(self.k as i64) as usize
    }

    pub fn bin_center(&self, i: usize) -> Result<Heading> {
        if i >= self.k {
            return Err(LrnError::IndexOutOfRange { index: i, len: self.k });
        }
        Ok(self.center_unchecked(i))
    }

    pub(crate) fn center_unchecked(&self, i: usize) -> Heading {
        Heading::new(TAU * (i as f64 / self.k as f64))
    }

    pub fn centers(&self) -> impl Iterator<Item = Heading> + '_ {
        (0..self.k).map(|i| self.center_unchecked(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CameraKind {
    Pinhole,
    EquidistantFisheye,
}

/// Intrinsics plus mounting yaw. Only azimuth matters downstream, so there
/// are no full extrinsics.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub kind: CameraKind,
    pub width: u32,
    pub height: u32,
    /// Horizontal focal length; the single focal length for the fisheye model.
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Optical axis heading in the robot frame.
    pub mount_yaw: f64,
    /// Full field of view of the fisheye image circle. Unused for pinhole.
    pub fisheye_fov: f64,
}

impl CameraModel {
    pub fn pinhole(width: u32, height: u32, fx: f64, fy: f64, cx: f64, cy: f64, mount_yaw: f64) -> Self {
        CameraModel { kind: CameraKind::Pinhole, width, height, fx, fy, cx, cy, mount_yaw, fisheye_fov: 0.0 }
    }

    pub fn fisheye(width: u32, height: u32, f: f64, cx: f64, cy: f64, mount_yaw: f64, fov: f64) -> Self {
        CameraModel {
            kind: CameraKind::EquidistantFisheye,
            width,
            height,
            fx: f,
            fy: f,
            cx,
            cy,
            mount_yaw,
            fisheye_fov: fov,
        }
    }

    /// Horizontal field of view: derived for pinhole, stored for fisheye.
    pub fn hfov(&self) -> f64 {
        match self.kind {
            CameraKind::Pinhole => (self.cx / self.fx).atan() + ((self.width as f64 - self.cx) / self.fx).atan(),
            CameraKind::EquidistantFisheye => self.fisheye_fov,
        }
    }

    fn check_bounds(&self, u: f64, v: f64) -> Result<()> {
        let ok =
            u.is_finite() && v.is_finite() && u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(LrnError::InvalidPixel { u, v })
        }
    }

    /// Azimuth of the pixel ray relative to the optical axis, CCW positive.
    fn pixel_azimuth(&self, u: f64, v: f64) -> Result<f64> {
        self.check_bounds(u, v)?;
        match self.kind {
            CameraKind::Pinhole => Ok((-(u - self.cx) / self.fx).atan()),
            CameraKind::EquidistantFisheye => {
                let du = u - self.cx;
                let dv = v - self.cy;
                let r = du.hypot(dv);
                let theta = r / self.fx;
                if theta > self.fisheye_fov / 2.0 {
                    return Err(LrnError::InvalidPixel { u, v });
                }
                if r == 0.0 {
                    return Ok(0.0);
                }
                // Camera frame: x right, y down, z forward.
                let x = theta.sin() * du / r;
                let z = theta.cos();
                Ok((-x).atan2(z))
            }
        }
    }

    pub fn heading_of_pixel(&self, u: f64, v: f64) -> Result<Heading> {
        Ok(Heading::new(self.mount_yaw + self.pixel_azimuth(u, v)?))
    }

    /// Ground point at distance `range_h` along the pixel's azimuth; elevation is discarded.
    pub fn pixel_ray_ground_point(&self, u: f64, v: f64, range_h: f64) -> Result<GroundPoint> {
        if !(range_h > 0.0) {
            return Err(LrnError::InvalidParameter(format!("range must be positive, got {range_h}")));
        }
        let theta = self.heading_of_pixel(u, v)?.radians();
        Ok(Point2::new(range_h * theta.cos(), range_h * theta.sin()))
    }

    /// Projects a point given in the camera frame (x right, y down, z forward)
    /// to pixel coordinates. Returns `None` when the point is behind the
    /// camera, outside the fisheye circle, or off the image.
    pub fn project_camera_point(&self, x: f64, y: f64, z: f64) -> Option<(f64, f64)> {
        let (u, v) = match self.kind {
            CameraKind::Pinhole => {
                if z <= 0.0 {
                    return None;
                }
                (self.cx + self.fx * x / z, self.cy + self.fy * y / z)
            }
            CameraKind::EquidistantFisheye => {
                let lateral = x.hypot(y);
                let theta = lateral.atan2(z);
                if theta > self.fisheye_fov / 2.0 {
                    return None;
                }
                if lateral == 0.0 {
                    (self.cx, self.cy)
                } else {
                    let r = self.fx * theta;
                    (self.cx + r * x / lateral, self.cy + r * y / lateral)
                }
            }
        };
        self.check_bounds(u, v).ok().map(|_| (u, v))
    }

    /// Projects a ground point in the robot body frame for a camera mounted
    /// `height_m` above the ground with a horizontal optical axis.
    pub fn project_ground_point(&self, p: GroundPoint, height_m: f64) -> Option<(f64, f64)> {
        let (s, c) = self.mount_yaw.sin_cos();
        // Rotate into the camera's yawed frame: forward along the optical axis.
        let fwd = c * p.x + s * p.y;
        let left = -s * p.x + c * p.y;
        self.project_camera_point(-left, height_m, fwd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cam(mount_yaw: f64) -> CameraModel {
        CameraModel::pinhole(200, 100, 100.0, 100.0, 50.0, 50.0, mount_yaw)
    }

    #[test]
    fn normalize_keeps_pi_and_flips_minus_pi() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert_abs_diff_eq!(normalize_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn principal_column_is_optical_axis() {
        assert_eq!(cam(0.0).heading_of_pixel(50.0, 10.0).unwrap().radians(), 0.0);
        assert_abs_diff_eq!(cam(PI).heading_of_pixel(50.0, 10.0).unwrap().radians(), PI, epsilon = 1e-12);
    }

    #[test]
    fn right_of_center_is_clockwise() {
        let h = cam(0.0).heading_of_pixel(150.0, 10.0).unwrap();
        assert_abs_diff_eq!(h.radians(), -std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
    }

    #[test]
    fn out_of_bounds_pixel_rejected() {
        assert!(matches!(cam(0.0).heading_of_pixel(200.0, 0.0), Err(LrnError::InvalidPixel { .. })));
        assert!(cam(0.0).heading_of_pixel(-0.5, 0.0).is_err());
        assert!(cam(0.0).heading_of_pixel(0.0, 100.0).is_err());
    }

    #[test]
    fn ground_points() {
        let c = cam(0.0);
        let p = c.pixel_ray_ground_point(50.0, 0.0, 16.0).unwrap();
        assert_abs_diff_eq!(p.x, 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-12);
        let p = cam(PI / 2.0).pixel_ray_ground_point(50.0, 0.0, 50.0).unwrap();
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.y, 50.0, epsilon = 1e-12);
        let p = c.pixel_ray_ground_point(150.0, 0.0, 10.0).unwrap();
        assert_abs_diff_eq!(p.x, 7.071_067_811_865_475, epsilon = 1e-9);
        assert_abs_diff_eq!(p.y, -7.071_067_811_865_475, epsilon = 1e-9);
        assert!(c.pixel_ray_ground_point(50.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn bin_index_examples() {
        let l = BinLayout::new(72).unwrap();
        assert_eq!(l.bin_index(Heading::new(0.0)), 0);
        assert_eq!(l.bin_index(Heading::new(0.087_266_5)), 1);
        let half = l.bin_width() / 2.0;
        assert_eq!(l.bin_index(Heading::new(-half - 1e-9)), 71);
        assert_eq!(l.bin_index(Heading::new(-half)), 0);
    }

    #[test]
    fn bin_center_examples() {
        let l4 = BinLayout::new(4).unwrap();
        assert_abs_diff_eq!(l4.bin_center(1).unwrap().radians(), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l4.bin_center(3).unwrap().radians(), -PI / 2.0, epsilon = 1e-15);
        assert_eq!(BinLayout::new(72).unwrap().bin_center(36).unwrap().radians(), PI);
        assert!(matches!(l4.bin_center(4), Err(LrnError::IndexOutOfRange { .. })));
    }

    #[test]
    fn layout_from_width() {
        assert_eq!(BinLayout::from_width_deg(5.0).unwrap().k(), 72);
        assert!(BinLayout::from_width_deg(7.0).is_err());
        assert!(BinLayout::new(0).is_err());
    }

    #[test]
    fn fisheye_azimuth_follows_displacement() {
        let f = CameraModel::fisheye(400, 400, 100.0, 200.0, 200.0, 0.0, 200f64.to_radians());
        assert_eq!(f.heading_of_pixel(200.0, 200.0).unwrap().radians(), 0.0);
        // Pure horizontal displacement: azimuth equals -r/f.
        let h = f.heading_of_pixel(250.0, 200.0).unwrap();
        assert_abs_diff_eq!(h.radians(), -0.5, epsilon = 1e-12);
        // Beyond the image circle (theta = 1.9 rad > 100 deg).
        assert!(f.heading_of_pixel(10.0, 200.0).is_err());
    }

    #[test]
    fn projection_inverts_azimuth() {
        let c = cam(0.3);
        let (u, v) = c.project_ground_point(Point2::new(10.0, 2.0), 1.0).unwrap();
        let h = c.heading_of_pixel(u, v).unwrap();
        assert_abs_diff_eq!(h.radians(), 2f64.atan2(10.0), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn center_round_trip(k in 1usize..400, seed in 0usize..10_000) {
            let l = BinLayout::new(k).unwrap();
            let i = seed % k;
            prop_assert_eq!(l.bin_index(l.bin_center(i).unwrap()), i);
        }

        #[test]
        fn pinhole_monotone_in_u(fx in 20.0f64..500.0, yaw in -3.0f64..3.0, a in 0.0f64..199.0, b in 0.0f64..199.0) {
            let c = CameraModel::pinhole(200, 50, fx, fx, 100.0, 25.0, yaw);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            // Unwrap relative to the mount yaw to compare on a line.
            let hl = normalize_angle(c.heading_of_pixel(lo, 1.0).unwrap().radians() - yaw);
            let hh = normalize_angle(c.heading_of_pixel(hi, 1.0).unwrap().radians() - yaw);
            prop_assert!(hh <= hl);
        }

        #[test]
        fn ground_point_norm_is_range(u in 0.0f64..200.0, v in 0.0f64..100.0, r in 0.1f64..200.0, yaw in -7.0f64..7.0) {
            let p = cam(yaw).pixel_ray_ground_point(u, v, r).unwrap();
            prop_assert!((p.norm() - r).abs() < 1e-6);
        }
    }
}

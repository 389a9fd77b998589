//! Pinhole camera with two-coefficient radial distortion.
//!
//! Pixel coordinates are continuous with the origin at the top-left corner of
//! the top-left pixel, so the center of pixel `(x, y)` sits at
//! `(x + 0.5, y + 0.5)`. Distortion acts on normalized camera coordinates and
//! the principal point is added afterwards, which makes projection exactly
//! equivariant under principal-point translation.

use nalgebra::{Matrix3, Vector2, Vector3};
use thiserror::Error;

/// Camera-frame depth at or below which a point counts as behind the camera.
pub const BEHIND_EPSILON: f64 = 1e-9;
/// Convergence tolerance of the undistortion iteration (normalized units).
pub const UNDISTORT_TOLERANCE: f64 = 1e-10;
/// Iteration cap of the undistortion iteration.
pub const UNDISTORT_MAX_ITERATIONS: usize = 50;

const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("focal lengths must be positive and finite (fx={fx}, fy={fy})")]
    InvalidFocal { fx: f64, fy: f64 },
    #[error("intrinsic parameter is not finite")]
    NonFiniteIntrinsics,
    #[error("image size must be at least 1x1 (got {width}x{height})")]
    ZeroSize { width: u32, height: u32 },
    #[error("quaternion has zero or non-finite norm")]
    InvalidQuaternion,
    #[error("rotation matrix is not orthonormal with determinant +1")]
    NotOrthonormal,
    #[error("translation is not finite")]
    NonFiniteTranslation,
    #[error("point is at or behind the camera plane")]
    Behind,
    #[error("distortion inversion did not converge")]
    NoConverge,
    #[error("depth must be positive and finite (got {0})")]
    InvalidDepth(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    /// Principal point. Recaptured sub-image cameras routinely have negative values here.
    pub cx: f64,
    pub cy: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, k1: f64, k2: f64) -> Result<Self, GeometryError> {
        if !(fx.is_finite() && fy.is_finite() && fx > 0.0 && fy > 0.0) {
            return Err(GeometryError::InvalidFocal { fx, fy });
        }
        if ![cx, cy, k1, k2].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFiniteIntrinsics);
        }
        Ok(Self { fx, fy, cx, cy, k1, k2 })
    }

    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        Self::new(fx, fy, cx, cy, 0.0, 0.0)
    }

    pub fn has_distortion(&self) -> bool {
        self.k1 != 0.0 || self.k2 != 0.0
    }

    #[inline]
    fn radial_factor(&self, r2: f64) -> f64 {
        1.0 + self.k1 * r2 + self.k2 * r2 * r2
    }

    /// Applies `x_d = x (1 + k1 r^2 + k2 r^4)` to a normalized coordinate.
    #[inline]
    pub fn distort_normalized(&self, xy: Vector2<f64>) -> Vector2<f64> {
        if !self.has_distortion() {
            return xy;
        }
        xy * self.radial_factor(xy.norm_squared())
    }

    /// Fixed-point inversion of [`Intrinsics::distort_normalized`].
    pub fn undistort_normalized(&self, xy_d: Vector2<f64>) -> Result<Vector2<f64>, GeometryError> {
        if !self.has_distortion() {
            return Ok(xy_d);
        }
        let mut xy = xy_d;
        for _ in 0..UNDISTORT_MAX_ITERATIONS {
            let factor = self.radial_factor(xy.norm_squared());
            if !factor.is_finite() || factor == 0.0 {
                return Err(GeometryError::NoConverge);
            }
            xy = xy_d / factor;
            let residual = self.distort_normalized(xy) - xy_d;
            if residual.amax() < UNDISTORT_TOLERANCE {
                return Ok(xy);
            }
        }
        Err(GeometryError::NoConverge)
    }

    /// Normalized (undistorted) coordinate to pixel coordinate.
    #[inline]
    pub fn normalized_to_pixel(&self, xy: Vector2<f64>) -> PixelCoord {
        let d = self.distort_normalized(xy);
        PixelCoord::new(self.fx * d.x + self.cx, self.fy * d.y + self.cy)
    }

    /// Pixel coordinate to normalized (undistorted) coordinate.
    pub fn pixel_to_normalized(&self, pixel: PixelCoord) -> Result<Vector2<f64>, GeometryError> {
        let xy_d = Vector2::new((pixel.u - self.cx) / self.fx, (pixel.v - self.cy) / self.fy);
        self.undistort_normalized(xy_d)
    }
}

/// World-to-camera pose.
///
/// The rotation is stored both as the quaternion it was built from and as the
/// matrix derived from it, so a quaternion read from text and written back is
/// reproduced bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics {
    quaternion: [f64; 4],
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Extrinsics {
    pub fn identity() -> Self {
        Self {
            quaternion: [1.0, 0.0, 0.0, 0.0],
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose from a `(w, x, y, z)` quaternion, which need not be unit length.
    pub fn from_quaternion(q: [f64; 4], translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(GeometryError::InvalidQuaternion);
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFiniteTranslation);
        }
        let [w, x, y, z] = q.map(|v| v / norm);
        let rotation = Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        );
        Ok(Self { quaternion: q, rotation, translation })
    }

    /// Builds a pose from a world-to-camera rotation matrix. The matrix is
    /// converted to a quaternion and re-expanded so the stored rotation is
    /// orthonormal to machine precision.
    pub fn from_rotation(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if !rotation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NotOrthonormal);
        }
        let gram = rotation.transpose() * rotation;
        if (gram - Matrix3::identity()).amax() > ORTHONORMAL_TOLERANCE
            || (rotation.determinant() - 1.0).abs() > ORTHONORMAL_TOLERANCE
        {
            return Err(GeometryError::NotOrthonormal);
        }
        Self::from_quaternion(rotation_to_quaternion(&rotation), translation)
    }

    /// Pose of a camera centered at `center` with world-to-camera rotation `rotation`.
    pub fn from_center(rotation: Matrix3<f64>, center: Vector3<f64>) -> Result<Self, GeometryError> {
        let probe = Self::from_rotation(rotation, Vector3::zeros())?;
        let translation = -(probe.rotation * center);
        Self::from_quaternion(probe.quaternion, translation)
    }

    pub fn quaternion(&self) -> [f64; 4] {
        self.quaternion
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    #[inline]
    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn camera_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }

    /// Exact bitwise equality, used to check that recapture copies poses verbatim.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        let a = self.quaternion.iter().chain(self.rotation.iter()).chain(self.translation.iter());
        let b = other.quaternion.iter().chain(other.rotation.iter()).chain(other.translation.iter());
        a.zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
    }
}

fn rotation_to_quaternion(m: &Matrix3<f64>) -> [f64; 4] {
    let trace = m.trace();
    let (w, x, y, z);
    if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        w = 0.25 * s;
        x = (m[(2, 1)] - m[(1, 2)]) / s;
        y = (m[(0, 2)] - m[(2, 0)]) / s;
        z = (m[(1, 0)] - m[(0, 1)]) / s;
    } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
        let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
        w = (m[(2, 1)] - m[(1, 2)]) / s;
        x = 0.25 * s;
        y = (m[(0, 1)] + m[(1, 0)]) / s;
        z = (m[(0, 2)] + m[(2, 0)]) / s;
    } else if m[(1, 1)] > m[(2, 2)] {
        let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
        w = (m[(0, 2)] - m[(2, 0)]) / s;
        x = (m[(0, 1)] + m[(1, 0)]) / s;
        y = 0.25 * s;
        z = (m[(1, 2)] + m[(2, 1)]) / s;
    } else {
        let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
        w = (m[(1, 0)] - m[(0, 1)]) / s;
        x = (m[(0, 2)] + m[(2, 0)]) / s;
        y = (m[(1, 2)] + m[(2, 1)]) / s;
        z = 0.25 * s;
    }
    [w, x, y, z]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub extrinsics: Extrinsics,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn new(intrinsics: Intrinsics, extrinsics: Extrinsics, width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::ZeroSize { width, height });
        }
        Ok(Self { intrinsics, extrinsics, width, height })
    }

    pub fn center(&self) -> Vector3<f64> {
        self.extrinsics.center()
    }

    /// Projects a world point. The result may fall outside the image.
    #[inline]
    pub fn project(&self, point: &Vector3<f64>) -> Result<PixelCoord, GeometryError> {
        let p = self.extrinsics.world_to_camera(point);
        if p.z <= BEHIND_EPSILON {
            return Err(GeometryError::Behind);
        }
        Ok(self.intrinsics.normalized_to_pixel(Vector2::new(p.x / p.z, p.y / p.z)))
    }

    /// Projects and also returns the camera-frame depth of the point.
    #[inline]
    pub fn project_with_depth(&self, point: &Vector3<f64>) -> Result<(PixelCoord, f64), GeometryError> {
        let p = self.extrinsics.world_to_camera(point);
        if p.z <= BEHIND_EPSILON {
            return Err(GeometryError::Behind);
        }
        Ok((self.intrinsics.normalized_to_pixel(Vector2::new(p.x / p.z, p.y / p.z)), p.z))
    }

    /// Lifts a pixel to the world point at camera-frame depth `depth`.
    pub fn unproject(&self, pixel: PixelCoord, depth: f64) -> Result<Vector3<f64>, GeometryError> {
        if !(depth.is_finite() && depth > 0.0) {
            return Err(GeometryError::InvalidDepth(depth));
        }
        let n = self.intrinsics.pixel_to_normalized(pixel)?;
        Ok(self.extrinsics.camera_to_world(&Vector3::new(n.x * depth, n.y * depth, depth)))
    }

    /// World-frame direction of the pixel's ray, scaled so its camera-frame z is 1.
    pub fn ray_direction(&self, pixel: PixelCoord) -> Result<Vector3<f64>, GeometryError> {
        let n = self.intrinsics.pixel_to_normalized(pixel)?;
        Ok(self.extrinsics.rotation().transpose() * Vector3::new(n.x, n.y, 1.0))
    }

    pub fn contains(&self, pixel: PixelCoord) -> bool {
        pixel.u >= 0.0 && pixel.v >= 0.0 && pixel.u < self.width as f64 && pixel.v < self.height as f64
    }

    pub fn pixel_count(&self) -> u64 {
        self.width as u64 * self.height as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Center of the integer pixel `(x, y)`.
    pub fn center_of(x: u32, y: u32) -> Self {
        Self::new(x as f64 + 0.5, y as f64 + 0.5)
    }

    pub fn distance(&self, other: &PixelCoord) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

// Free-function forms of the camera operations.

pub fn project(camera: &Camera, point: &Vector3<f64>) -> Result<PixelCoord, GeometryError> {
    camera.project(point)
}

pub fn unproject(camera: &Camera, pixel: PixelCoord, depth: f64) -> Result<Vector3<f64>, GeometryError> {
    camera.unproject(pixel, depth)
}

pub fn distort_normalized(intr: &Intrinsics, xy: Vector2<f64>) -> Vector2<f64> {
    intr.distort_normalized(xy)
}

pub fn undistort_normalized(intr: &Intrinsics, xy_d: Vector2<f64>) -> Result<Vector2<f64>, GeometryError> {
    intr.undistort_normalized(xy_d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn simple_camera(k1: f64) -> Camera {
        let intr = Intrinsics::new(1000.0, 1000.0, 500.0, 500.0, k1, 0.0).unwrap();
        Camera::new(intr, Extrinsics::identity(), 1000, 1000).unwrap()
    }

    #[test]
    fn principal_ray_hits_principal_point() {
        let p = simple_camera(0.0).project(&Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(p, PixelCoord::new(500.0, 500.0));
    }

    #[test]
    fn projects_off_axis_point() {
        let p = simple_camera(0.0).project(&Vector3::new(0.1, 0.2, 1.0)).unwrap();
        assert_abs_diff_eq!(p.u, 600.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.v, 700.0, epsilon = 1e-12);
    }

    #[test]
    fn projects_with_radial_distortion() {
        // r^2 = 0.05, factor 1.005
        let p = simple_camera(0.1).project(&Vector3::new(0.1, 0.2, 1.0)).unwrap();
        assert_abs_diff_eq!(p.u, 600.5, epsilon = 1e-9);
        assert_abs_diff_eq!(p.v, 701.0, epsilon = 1e-9);
    }

    #[test]
    fn behind_and_grazing_points() {
        let cam = simple_camera(0.0);
        assert_eq!(cam.project(&Vector3::new(0.0, 0.0, -1.0)), Err(GeometryError::Behind));
        assert_eq!(cam.project(&Vector3::new(0.0, 0.0, 0.0)), Err(GeometryError::Behind));
        assert!(cam.project(&Vector3::new(0.0, 0.0, 2e-9)).is_ok());
    }

    #[test]
    fn unprojects_linear_camera() {
        let cam = simple_camera(0.0);
        let p = cam.unproject(PixelCoord::new(600.0, 700.0), 1.0).unwrap();
        assert_abs_diff_eq!(p, Vector3::new(0.1, 0.2, 1.0), epsilon = 1e-12);
        let q = cam.unproject(PixelCoord::new(500.0, 500.0), 7.25).unwrap();
        assert_eq!(q, Vector3::new(0.0, 0.0, 7.25));
        assert!(matches!(cam.unproject(PixelCoord::new(1.0, 1.0), 0.0), Err(GeometryError::InvalidDepth(_))));
    }

    #[test]
    fn distortion_values() {
        let id = Intrinsics::pinhole(1.0, 1.0, 0.0, 0.0).unwrap();
        let xy = Vector2::new(0.3, -0.4);
        assert_eq!(id.distort_normalized(xy), xy);
        let k = Intrinsics::new(1.0, 1.0, 0.0, 0.0, 0.1, 0.0).unwrap();
        let d = k.distort_normalized(xy);
        assert_abs_diff_eq!(d.x, 0.3075, epsilon = 1e-15);
        assert_abs_diff_eq!(d.y, -0.41, epsilon = 1e-15);
        let k2 = Intrinsics::new(1.0, 1.0, 0.0, 0.0, -0.3, 0.7).unwrap();
        assert_eq!(k2.distort_normalized(Vector2::zeros()), Vector2::zeros());
        assert_eq!(k2.undistort_normalized(Vector2::zeros()).unwrap(), Vector2::zeros());
    }

    #[test]
    fn undistort_round_trip() {
        let k = Intrinsics::new(1.0, 1.0, 0.0, 0.0, 0.1, 0.0).unwrap();
        let xy = Vector2::new(0.3, -0.4);
        let back = k.undistort_normalized(k.distort_normalized(xy)).unwrap();
        assert_abs_diff_eq!(back, xy, epsilon = 1e-9);
        let id = Intrinsics::pinhole(1.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(id.undistort_normalized(Vector2::new(3.0, -9.0)).unwrap(), Vector2::new(3.0, -9.0));
    }

    #[test]
    fn undistort_outside_domain_fails() {
        // Strong barrel distortion folds over; the iteration diverges.
        let k = Intrinsics::new(1.0, 1.0, 0.0, 0.0, -0.5, 0.0).unwrap();
        assert_eq!(k.undistort_normalized(Vector2::new(2.0, 2.0)), Err(GeometryError::NoConverge));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Intrinsics::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(Intrinsics::new(1.0, 1.0, f64::NAN, 0.0, 0.0, 0.0).is_err());
        assert!(Intrinsics::new(1.0, 1.0, -40.0, -3.0, 0.0, 0.0).is_ok());
        let intr = Intrinsics::pinhole(1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(Camera::new(intr, Extrinsics::identity(), 0, 5).is_err());
        let skew = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert_eq!(Extrinsics::from_rotation(skew, Vector3::zeros()), Err(GeometryError::NotOrthonormal));
        let reflect = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert_eq!(Extrinsics::from_rotation(reflect, Vector3::zeros()), Err(GeometryError::NotOrthonormal));
        assert!(Extrinsics::from_quaternion([0.0; 4], Vector3::zeros()).is_err());
    }

    #[test]
    fn quaternion_matrix_conversions_agree() {
        let nadir = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
        let e = Extrinsics::from_rotation(nadir, Vector3::new(1.0, 2.0, 3.0)).unwrap();
        assert_eq!(e.quaternion(), [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(*e.rotation(), nadir);
        let q = Extrinsics::from_quaternion([0.9, 0.1, -0.3, 0.2], Vector3::zeros()).unwrap();
        let r = Extrinsics::from_rotation(*q.rotation(), Vector3::zeros()).unwrap();
        assert_abs_diff_eq!(*r.rotation(), *q.rotation(), epsilon = 1e-14);
        let gram = q.rotation().transpose() * q.rotation();
        assert_abs_diff_eq!(gram, Matrix3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(q.rotation().determinant(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn center_round_trip() {
        let c = Vector3::new(3.0, -4.0, 60.0);
        let nadir = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
        let e = Extrinsics::from_center(nadir, c).unwrap();
        assert_abs_diff_eq!(e.center(), c, epsilon = 1e-12);
        assert_abs_diff_eq!(e.world_to_camera(&Vector3::new(3.0, -4.0, 0.0)), Vector3::new(0.0, 0.0, 60.0), epsilon = 1e-12);
    }
}

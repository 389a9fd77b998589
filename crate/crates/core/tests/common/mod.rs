#![allow(dead_code)]

use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;
use sir_core::{Camera, Extrinsics, Intrinsics};

/// Random pose: any rotation, translation within a 100-unit cube.
pub fn extrinsics() -> impl Strategy<Value = Extrinsics> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, prop::array::uniform3(-100.0f64..100.0))
        .prop_filter("non-degenerate quaternion", |(w, x, y, z, _)| w * w + x * x + y * y + z * z > 0.01)
        .prop_map(|(w, x, y, z, t)| {
            let n = (w * w + x * x + y * y + z * z).sqrt();
            Extrinsics::from_quaternion([w / n, x / n, y / n, z / n], Vector3::from(t)).unwrap()
        })
}

/// Random camera with mild radial distortion; `distorted` toggles k1, k2.
pub fn camera(distorted: bool) -> impl Strategy<Value = Camera> {
    let k = if distorted { (-0.1f64..0.1, -0.02f64..0.02).boxed() } else { Just((0.0, 0.0)).boxed() };
    (64u32..6000, 64u32..6000, 100.0f64..8000.0, 0.8f64..1.25, -0.2f64..1.2, -0.2f64..1.2, k, extrinsics()).prop_map(
        |(w, h, f, aspect, px, py, (k1, k2), ext)| {
            let intr = Intrinsics::new(f, f * aspect, px * w as f64, py * h as f64, k1, k2).unwrap();
            Camera::new(intr, ext, w, h).unwrap()
        },
    )
}

/// World point at camera-frame depth `depth` along normalized direction `(x, y)`.
pub fn point_in_front(cam: &Camera, x: f64, y: f64, depth: f64) -> Vector3<f64> {
    cam.extrinsics.camera_to_world(&Vector3::new(x * depth, y * depth, depth))
}

/// Rotation taking camera axes to a random orientation, for building poses by hand.
pub fn rotation(axis: [f64; 3], angle: f64) -> nalgebra::Matrix3<f64> {
    let axis = nalgebra::Unit::new_normalize(Vector3::from(axis));
    *UnitQuaternion::from_axis_angle(&axis, angle).to_rotation_matrix().matrix()
}

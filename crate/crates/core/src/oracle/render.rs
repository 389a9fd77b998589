use super::Scene;
use crate::geometry::{Camera, PixelCoord};
use crate::image::Image;
use crate::model_io::DepthMap;
use nalgebra::Vector3;
use rayon::prelude::*;

/// Bisection stops once the bracket is shorter than this (scene units along the ray).
const HIT_TOLERANCE: f64 = 1e-7;

/// A rendered view with its exact per-pixel depth.
#[derive(Debug, Clone)]
pub struct GroundTruthView {
    pub camera: Camera,
    /// Linear RGB radiance per pixel, row-major.
    pub radiance: Vec<[f64; 3]>,
    /// Camera-frame depth of the first surface hit; 0 where `valid` is false.
    pub depth: Vec<f64>,
    pub valid: Vec<bool>,
}

impl GroundTruthView {
    /// 8-bit RGB quantization of the radiance.
    pub fn to_image(&self) -> Image {
        let data = self
            .radiance
            .iter()
            .flat_map(|rgb| rgb.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect();
        Image::from_raw(self.camera.width, self.camera.height, 3, data).expect("radiance buffer matches camera")
    }

    pub fn depth_map(&self, view_id: &str) -> DepthMap {
        let depths = self
            .depth
            .iter()
            .zip(&self.valid)
            .map(|(&d, &v)| if v { d as f32 } else { 0.0 })
            .collect();
        DepthMap::from_depths(view_id, self.camera.width, self.camera.height, depths)
    }

    pub fn depth_at(&self, x: u32, y: u32) -> Option<f64> {
        let i = y as usize * self.camera.width as usize + x as usize;
        self.valid[i].then(|| self.depth[i])
    }
}

/// Ray parameter of the first intersection of `origin + t * dir` with the
/// height field, where `dir` is scaled so `t` equals camera-frame depth.
pub(crate) fn intersect(scene: &Scene, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    let amp = scene.spec().height_amplitude;
    if dir.z >= 0.0 {
        return None;
    }
    let t_top = (amp - origin.z) / dir.z;
    let t_bottom = (-amp - origin.z) / dir.z;
    if t_bottom <= 0.0 {
        return None;
    }
    let f = |t: f64| origin.z + t * dir.z - scene.height(origin.x + t * dir.x, origin.y + t * dir.y);
    let mut t0 = t_top.max(0.0);
    if f(t0) <= 0.0 {
        // At the top of the slab f >= 0, so this is a hit exactly on the slab
        // top (always the case for a flat scene); otherwise the camera sits
        // below the terrain.
        return (t0 == t_top && t0 > 0.0).then_some(t0);
    }
    let len = dir.norm();
    let step = scene.min_height_wavelength() / 4.0 / len;
    loop {
        let t1 = (t0 + step).min(t_bottom);
        let f1 = f(t1);
        if f1 <= 0.0 {
            let (mut lo, mut hi) = (t0, t1);
            while (hi - lo) * len > HIT_TOLERANCE {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        if t1 >= t_bottom {
            return None;
        }
        t0 = t1;
    }
}

/// Ray casts every pixel center of `camera` against the scene.
pub fn render_view(scene: &Scene, camera: &Camera) -> GroundTruthView {
    let w = camera.width as usize;
    let n = w * camera.height as usize;
    let origin = camera.center();
    let rows: Vec<Vec<Option<(f64, [f64; 3])>>> = (0..camera.height)
        .into_par_iter()
        .map(|y| {
            (0..camera.width)
                .map(|x| {
                    let dir = camera.ray_direction(PixelCoord::center_of(x, y)).ok()?;
                    let t = intersect(scene, &origin, &dir)?;
                    let hit = origin + dir * t;
                    Some((t, scene.shade(hit.x, hit.y)))
                })
                .collect()
        })
        .collect();
    let mut radiance = Vec::with_capacity(n);
    let mut depth = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for px in rows.into_iter().flatten() {
        match px {
            Some((t, rgb)) => {
                radiance.push(rgb);
                depth.push(t);
                valid.push(true);
            }
            None => {
                radiance.push([0.0; 3]);
                depth.push(0.0);
                valid.push(false);
            }
        }
    }
    GroundTruthView { camera: *camera, radiance, depth, valid }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Extrinsics, Intrinsics};
    use crate::oracle::{generate_scene, SceneSpec};
    use nalgebra::Matrix3;

    fn flat_scene() -> Scene {
        generate_scene(&SceneSpec { height_amplitude: 0.0, ..Default::default() }).unwrap()
    }

    fn camera(rotation: Matrix3<f64>, center: Vector3<f64>) -> Camera {
        let intr = Intrinsics::pinhole(40.0, 40.0, 16.0, 12.0).unwrap();
        Camera::new(intr, Extrinsics::from_center(rotation, center).unwrap(), 32, 24).unwrap()
    }

    fn nadir() -> Matrix3<f64> {
        Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0)
    }

    #[test]
    fn fronto_parallel_plane_has_constant_depth() {
        let view = render_view(&flat_scene(), &camera(nadir(), Vector3::new(50.0, 50.0, 7.5)));
        assert!(view.valid.iter().all(|&v| v));
        for &d in &view.depth {
            assert!((d - 7.5).abs() < 1e-6);
        }
    }

    #[test]
    fn tilted_camera_matches_ray_plane_formula() {
        let tilt = 0.3f64;
        let tilt_about_x = Matrix3::new(1.0, 0.0, 0.0, 0.0, tilt.cos(), -tilt.sin(), 0.0, tilt.sin(), tilt.cos());
        let cam = camera(tilt_about_x * nadir(), Vector3::new(50.0, 50.0, 10.0));
        let view = render_view(&flat_scene(), &cam);
        for y in 0..cam.height {
            for x in 0..cam.width {
                let dir = cam.ray_direction(PixelCoord::center_of(x, y)).unwrap();
                let t = -cam.center().z / dir.z;
                let d = view.depth_at(x, y).unwrap();
                assert!((d - t).abs() < 1e-6, "pixel ({x},{y}): {d} vs {t}");
            }
        }
    }

    #[test]
    fn upward_rays_miss() {
        let up = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        let view = render_view(&flat_scene(), &camera(up, Vector3::new(0.0, 0.0, 5.0)));
        assert!(view.valid.iter().all(|&v| !v));
        assert!(view.depth.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn terrain_hits_lie_on_surface() {
        let scene = generate_scene(&SceneSpec::default()).unwrap();
        let cam = camera(nadir(), Vector3::new(40.0, 60.0, 30.0));
        let view = render_view(&scene, &cam);
        for y in 0..cam.height {
            for x in 0..cam.width {
                let d = view.depth_at(x, y).unwrap();
                let p = cam.unproject(PixelCoord::center_of(x, y), d).unwrap();
                assert!((p.z - scene.height(p.x, p.y)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let scene = generate_scene(&SceneSpec::default()).unwrap();
        let cam = camera(nadir(), Vector3::new(40.0, 60.0, 30.0));
        let a = render_view(&scene, &cam);
        let b = render_view(&scene, &cam);
        assert_eq!(a.to_image(), b.to_image());
        assert!(a.depth.iter().zip(&b.depth).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

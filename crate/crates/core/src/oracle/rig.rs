use super::{noise, GroundTruthView, Scene, SceneError};
use crate::geometry::{Camera, Extrinsics, Intrinsics};
use crate::model_io::SparsePoint;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Regular grid of nadir cameras over the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RigSpec {
    pub rows: u32,
    pub cols: u32,
    /// Height of the camera centers above `z = 0`.
    pub altitude: f64,
    /// Fraction of the footprint shared by neighboring cameras, in `[0, 1)`.
    pub overlap: f64,
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    #[serde(default)]
    pub k1: f64,
    #[serde(default)]
    pub k2: f64,
}

impl Default for RigSpec {
    fn default() -> Self {
        Self { rows: 1, cols: 5, altitude: 60.0, overlap: 0.9, width: 640, height: 480, focal: 600.0, k1: 0.0, k2: 0.0 }
    }
}

impl RigSpec {
    /// Ground footprint `(width, height)` of one camera at `z = 0`.
    pub fn footprint(&self) -> (f64, f64) {
        (
            self.altitude * self.width as f64 / self.focal,
            self.altitude * self.height as f64 / self.focal,
        )
    }

    /// Distance between neighboring camera centers along x and y.
    pub fn spacing(&self) -> (f64, f64) {
        let (fw, fh) = self.footprint();
        (fw * (1.0 - self.overlap), fh * (1.0 - self.overlap))
    }
}

/// Camera-frame axes of a nadir view expressed in the world: x east, y south, z down.
pub fn nadir_rotation() -> Matrix3<f64> {
    Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0)
}

/// Nadir cameras on a `rows x cols` grid centered over the scene extent,
/// row-major with row 0 to the north.
pub fn make_aerial_cameras(scene: &Scene, rig: &RigSpec) -> Result<Vec<Camera>, SceneError> {
    if rig.rows == 0 || rig.cols == 0 {
        return Err(SceneError::BadRig("rows and cols must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&rig.overlap) {
        return Err(SceneError::BadRig(format!("overlap {} outside [0, 1)", rig.overlap)));
    }
    if !(rig.altitude > scene.spec().height_amplitude) {
        return Err(SceneError::BadRig("cameras must fly above the terrain".into()));
    }
    let intr = Intrinsics::new(
        rig.focal,
        rig.focal,
        rig.width as f64 / 2.0,
        rig.height as f64 / 2.0,
        rig.k1,
        rig.k2,
    )
    .map_err(|e| SceneError::BadRig(e.to_string()))?;
    let (sx, sy) = rig.spacing();
    let (cx, cy) = scene.spec().extent.center();
    let mut cams = Vec::with_capacity((rig.rows * rig.cols) as usize);
    for r in 0..rig.rows {
        for c in 0..rig.cols {
            let x = cx + (c as f64 - (rig.cols - 1) as f64 / 2.0) * sx;
            let y = cy - (r as f64 - (rig.rows - 1) as f64 / 2.0) * sy;
            let pose = Extrinsics::from_center(nadir_rotation(), Vector3::new(x, y, rig.altitude))
                .map_err(|e| SceneError::BadRig(e.to_string()))?;
            cams.push(Camera::new(intr, pose, rig.width, rig.height).map_err(|e| SceneError::BadRig(e.to_string()))?);
        }
    }
    Ok(cams)
}

/// Surface points on a jittered grid covering the union of the views'
/// footprints, each observed by the views that see it unoccluded.
/// `view_ids[k]` is the id recorded for `views[k]`.
pub fn sample_sparse_points(scene: &Scene, views: &[GroundTruthView], view_ids: &[u32], spacing: f64) -> Vec<SparsePoint> {
    assert_eq!(views.len(), view_ids.len());
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for v in views {
        let c = v.camera.center();
        let reach = c.z * (v.camera.width.max(v.camera.height) as f64) / v.camera.intrinsics.fx.min(v.camera.intrinsics.fy);
        x0 = x0.min(c.x - reach);
        x1 = x1.max(c.x + reach);
        y0 = y0.min(c.y - reach);
        y1 = y1.max(c.y + reach);
    }
    let nx = ((x1 - x0) / spacing).ceil().max(1.0) as i64;
    let ny = ((y1 - y0) / spacing).ceil().max(1.0) as i64;
    let seed = scene.spec().seed;
    let mut out = Vec::new();
    for gy in 0..ny {
        for gx in 0..nx {
            let h = noise::hash2(seed, 0x5350_4152, gx, gy);
            let jx = noise::unit_f64(h);
            let jy = noise::unit_f64(noise::mix64(h));
            let x = x0 + (gx as f64 + jx) * spacing;
            let y = y0 + (gy as f64 + jy) * spacing;
            let p = Vector3::new(x, y, scene.height(x, y));
            let observations: Vec<u32> = views
                .iter()
                .zip(view_ids)
                .filter(|(v, _)| sees(v, &p))
                .map(|(_, &id)| id)
                .collect();
            if observations.is_empty() {
                continue;
            }
            let rgb = scene.shade(x, y).map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8);
            out.push(SparsePoint { id: out.len() as u64 + 1, position: p, color: rgb, error: 0.0, observations });
        }
    }
    out
}

fn sees(view: &GroundTruthView, p: &Vector3<f64>) -> bool {
    let Ok((px, depth)) = view.camera.project_with_depth(p) else {
        return false;
    };
    if !view.camera.contains(px) {
        return false;
    }
    match view.depth_at(px.u as u32, px.v as u32) {
        Some(gt) => (gt - depth).abs() < 0.01 * depth,
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{generate_scene, render_view, SceneSpec};
    use approx::assert_abs_diff_eq;

    fn scene() -> Scene {
        generate_scene(&SceneSpec::default()).unwrap()
    }

    #[test]
    fn single_camera_centered() {
        let rig = RigSpec { rows: 1, cols: 1, ..Default::default() };
        let cams = make_aerial_cameras(&scene(), &rig).unwrap();
        assert_eq!(cams.len(), 1);
        assert_abs_diff_eq!(cams[0].center(), Vector3::new(50.0, 50.0, 60.0), epsilon = 1e-12);
        let down = cams[0].extrinsics.rotation().transpose() * Vector3::z();
        assert_abs_diff_eq!(down, -Vector3::z(), epsilon = 1e-15);
    }

    #[test]
    fn half_overlap_spacing() {
        let rig = RigSpec { rows: 1, cols: 2, overlap: 0.5, ..Default::default() };
        let cams = make_aerial_cameras(&scene(), &rig).unwrap();
        let (fw, _) = rig.footprint();
        assert_abs_diff_eq!(fw, 64.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cams[1].center().x - cams[0].center().x, fw * 0.5, epsilon = 1e-9);
        let rig = RigSpec { rows: 2, cols: 1, overlap: 0.5, ..Default::default() };
        let cams = make_aerial_cameras(&scene(), &rig).unwrap();
        let (_, fh) = rig.footprint();
        assert_abs_diff_eq!(cams[0].center().y - cams[1].center().y, fh * 0.5, epsilon = 1e-9);
    }

    #[test]
    fn zero_overlap_tiles_edge_to_edge() {
        let rig = RigSpec { rows: 1, cols: 3, overlap: 0.0, ..Default::default() };
        let cams = make_aerial_cameras(&scene(), &rig).unwrap();
        // Right edge of one footprint at z = 0 is the left edge of the next.
        for pair in cams.windows(2) {
            let right = pair[0].unproject(crate::PixelCoord::new(640.0, 240.0), 60.0).unwrap();
            let left = pair[1].unproject(crate::PixelCoord::new(0.0, 240.0), 60.0).unwrap();
            assert_abs_diff_eq!(right.x, left.x, epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_bad_rigs() {
        assert!(make_aerial_cameras(&scene(), &RigSpec { rows: 0, ..Default::default() }).is_err());
        assert!(make_aerial_cameras(&scene(), &RigSpec { overlap: 1.0, ..Default::default() }).is_err());
        assert!(make_aerial_cameras(&scene(), &RigSpec { altitude: 1.0, ..Default::default() }).is_err());
    }

    #[test]
    fn sparse_points_are_on_surface_and_observed() {
        let s = scene();
        let rig = RigSpec { rows: 1, cols: 2, width: 64, height: 48, focal: 60.0, overlap: 0.5, ..Default::default() };
        let cams = make_aerial_cameras(&s, &rig).unwrap();
        let views: Vec<_> = cams.iter().map(|c| render_view(&s, c)).collect();
        let pts = sample_sparse_points(&s, &views, &[1, 2], 2.0);
        assert!(!pts.is_empty());
        assert!(pts.iter().any(|p| p.observations == vec![1, 2]));
        for p in &pts {
            assert!((p.position.z - s.height(p.position.x, p.position.y)).abs() < 1e-12);
        }
    }
}

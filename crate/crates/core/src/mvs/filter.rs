use super::FuseParams;
use crate::geometry::{Camera, PixelCoord};
use crate::model_io::DepthMap;
use nalgebra::Vector3;
use rayon::prelude::*;

/// A depth map together with the camera it was computed for.
#[derive(Debug, Clone, Copy)]
pub struct FilterView<'a> {
    pub camera: Camera,
    pub depth: &'a DepthMap,
}

/// Checks reference pixel `(x, y)` at depth `d` against a neighbor view.
///
/// The point is carried into the neighbor, read back at the nearest pixel
/// there and reprojected into the reference. Returns the pixel index and
/// world point found in the neighbor when the round trip lands within
/// `reproj_tol` pixels and `depth_rel_tol` relative depth.
pub fn consistency_check(reference: &Camera, x: u32, y: u32, d: f64, neighbor: &FilterView, params: &FuseParams) -> Option<(usize, Vector3<f64>)> {
    let here = PixelCoord::center_of(x, y);
    let p = reference.unproject(here, d).ok()?;
    let q = neighbor.camera.project(&p).ok()?;
    if !neighbor.camera.contains(q) {
        return None;
    }
    let (nx, ny) = (q.u.floor() as u32, q.v.floor() as u32);
    if nx >= neighbor.depth.width || ny >= neighbor.depth.height {
        return None;
    }
    let dn = neighbor.depth.get(nx, ny)? as f64;
    let back = neighbor.camera.unproject(PixelCoord::center_of(nx, ny), dn).ok()?;
    let (r, dr) = reference.project_with_depth(&back).ok()?;
    let ok = r.distance(&here) < params.reproj_tol && (dr - d).abs() / d < params.depth_rel_tol;
    ok.then(|| (neighbor.depth.index(nx, ny), back))
}

/// Keeps reference pixels confirmed by at least `min_support - 1` neighbors.
pub fn geometric_consistency_filter(reference: &FilterView, neighbors: &[FilterView], params: &FuseParams) -> DepthMap {
    let map = reference.depth;
    let need = params.min_support.saturating_sub(1) as usize;
    let w = map.width as usize;
    let kept: Vec<f32> = (0..map.height)
        .into_par_iter()
        .flat_map_iter(|y| {
            (0..map.width).map(move |x| {
                let Some(d) = map.get(x, y) else { return 0.0 };
                let agree = if need == 0 {
                    0
                } else {
                    neighbors
                        .iter()
                        .filter(|n| consistency_check(&reference.camera, x, y, d as f64, n, params).is_some())
                        .take(need)
                        .count()
                };
                if agree >= need {
                    d
                } else {
                    0.0
                }
            })
        })
        .collect();
    debug_assert_eq!(kept.len(), w * map.height as usize);
    DepthMap::from_depths(map.view_id.clone(), map.width, map.height, kept)
}

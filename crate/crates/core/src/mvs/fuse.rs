use super::{consistency_check, FilterView, FuseParams};
use crate::geometry::{Camera, PixelCoord};
use crate::image::Image;
use crate::model_io::{CloudPoint, DepthMap, PointCloud};

/// A filtered depth map entering fusion with the views allowed to merge into it.
#[derive(Debug, Clone)]
pub struct FuseView<'a> {
    pub camera: Camera,
    pub depth: &'a DepthMap,
    /// Indices of other entries in the fusion list that overlap this view.
    pub neighbors: Vec<usize>,
}

/// Merges depth maps into one point cloud.
///
/// Views are visited in list order. Every unclaimed valid pixel starts a
/// point, which absorbs the consistent and still unclaimed pixels of the
/// neighbor views; absorbed pixels never start points of their own. Points
/// with fewer than `min_support` contributing views are dropped. `colors`
/// is asked for one view's image at a time, when that view is visited.
pub fn fuse_depth_maps(views: &[FuseView], params: &FuseParams, mut colors: impl FnMut(usize) -> Option<Image>) -> PointCloud {
    let mut claimed: Vec<Vec<bool>> = views.iter().map(|v| vec![false; v.depth.len()]).collect();
    let mut points = Vec::new();
    for (vi, view) in views.iter().enumerate() {
        if view.depth.valid_count() == 0 {
            continue;
        }
        let image = colors(vi).filter(|im| im.width() == view.depth.width && im.height() == view.depth.height);
        for y in 0..view.depth.height {
            for x in 0..view.depth.width {
                let i = view.depth.index(x, y);
                if claimed[vi][i] {
                    continue;
                }
                let Some(d) = view.depth.get(x, y) else { continue };
                let Ok(p) = view.camera.unproject(PixelCoord::center_of(x, y), d as f64) else { continue };
                claimed[vi][i] = true;
                let mut sum = p;
                let mut support = 1u32;
                for &ni in &view.neighbors {
                    if ni == vi {
                        continue;
                    }
                    let n = FilterView { camera: views[ni].camera, depth: views[ni].depth };
                    if let Some((j, q)) = consistency_check(&view.camera, x, y, d as f64, &n, params) {
                        if !claimed[ni][j] {
                            claimed[ni][j] = true;
                            sum += q;
                            support += 1;
                        }
                    }
                }
                if support < params.min_support {
                    continue;
                }
                let color = image.as_ref().map(|im| im.rgb(x, y)).unwrap_or([255, 255, 255]);
                points.push(CloudPoint { position: sum / support as f64, color, support });
            }
        }
    }
    PointCloud { points }
}

use super::PipelineError;
use crate::model_io::{write_depth_map, write_image, write_sparse_model, SceneModel, View};
use crate::oracle::{generate_scene, make_aerial_cameras, render_view, sample_sparse_points, RigSpec, SceneSpec};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const FIXTURE_FILE: &str = "scene.json";

/// What a fixture directory was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub scene: SceneSpec,
    pub rig: RigSpec,
    pub sparse_spacing: f64,
}

impl FixtureSpec {
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join(FIXTURE_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))
    }
}

/// Name stem of the `k`-th oracle view (zero-based); its image id is `k + 1`.
pub fn view_stem(k: usize) -> String {
    format!("view_{:03}", k + 1)
}

/// Renders the scene from every rig camera and writes `scene.json`,
/// `images/`, `gt/` and `sparse/` under `out`.
pub fn generate_fixture(spec: &FixtureSpec, out: &Path) -> Result<(), PipelineError> {
    let scene = generate_scene(&spec.scene)?;
    let cams = make_aerial_cameras(&scene, &spec.rig)?;
    let mut model = SceneModel::default();
    let mut views = Vec::with_capacity(cams.len());
    for (k, cam) in cams.iter().enumerate() {
        let id = k as u32 + 1;
        let stem = view_stem(k);
        let mut gt = render_view(&scene, cam);
        write_image(&out.join("images").join(format!("{stem}.ppm")), &gt.to_image())?;
        write_depth_map(&out.join("gt").join(format!("{stem}.sird")), &gt.depth_map(&stem))?;
        model.cameras.insert(id, *cam);
        model.views.insert(id, View { camera_id: id, name: format!("{stem}.ppm"), extrinsics: cam.extrinsics });
        // Only depths are needed from here on.
        gt.radiance = Vec::new();
        views.push(gt);
    }
    let ids: Vec<u32> = (1..=cams.len() as u32).collect();
    if spec.sparse_spacing > 0.0 {
        model.sparse_points = sample_sparse_points(&scene, &views, &ids, spec.sparse_spacing);
    }
    write_sparse_model(&model, &out.join("sparse"))?;
    let path = out.join(FIXTURE_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(spec).expect("spec serializes") + "\n").map_err(|e| PipelineError::io(&path, e))?;
    Ok(())
}

use super::engine::{Manifest, MANIFEST_FILE};
use super::oracle_fixture::FixtureSpec;
use super::PipelineError;
use crate::model_io::{parse_ply_vertices, read_depth_map, DepthMap};
use crate::oracle::generate_scene;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Accuracy of the estimated depths over the ground-truth pixels of one
/// native image (or of all of them).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthScore {
    pub name: String,
    /// Native pixels with a ground-truth depth.
    pub gt_pixels: usize,
    /// Of those, pixels with a valid estimate.
    pub estimated: usize,
    /// Median of `|d_est - d_gt|` over estimated pixels; `None` when there are none.
    pub median_abs_error: Option<f64>,
    /// Fraction of ground-truth pixels estimated within two inverse-depth steps.
    pub completeness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    pub overall: DepthScore,
    pub views: Vec<DepthScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Depth maps after geometric filtering.
    pub filtered: DepthMetrics,
    /// Depth maps straight out of the sweep.
    pub raw: DepthMetrics,
    pub cloud_points: usize,
    /// Median distance of the fused points to the true surface.
    pub cloud_accuracy: Option<f64>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

struct Accumulator {
    gt: usize,
    complete: usize,
    errors: Vec<f64>,
}

impl Accumulator {
    fn new() -> Self {
        Self { gt: 0, complete: 0, errors: Vec::new() }
    }

    fn score(mut self, name: &str) -> DepthScore {
        DepthScore {
            name: name.to_string(),
            gt_pixels: self.gt,
            estimated: self.errors.len(),
            median_abs_error: median(&mut self.errors),
            completeness: if self.gt == 0 { 0.0 } else { self.complete as f64 / self.gt as f64 },
        }
    }
}

/// Scores the depth maps in `dir` against `gt/<parent>.sird` through the manifest's pixel mapping.
pub fn score_depths(manifest: &Manifest, dir: &Path, gt_dir: &Path) -> Result<DepthMetrics, PipelineError> {
    let mut by_parent: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, v) in manifest.views.iter().enumerate() {
        by_parent.entry(v.parent.as_str()).or_default().push(i);
    }
    let mut all = Accumulator::new();
    let mut views = Vec::new();
    for (parent, idx) in by_parent {
        let gt_path = gt_dir.join("gt").join(format!("{parent}.sird"));
        if !gt_path.exists() {
            return Err(PipelineError::MissingGroundTruth(gt_path));
        }
        let gt = read_depth_map(&gt_path)?;
        let maps: Vec<DepthMap> = idx.iter().map(|&i| read_depth_map(&dir.join(format!("{}.sird", manifest.views[i].stem)))).collect::<Result<_, _>>()?;
        let mut acc = Accumulator::new();
        for y in 0..gt.height {
            for x in 0..gt.width {
                let Some(dg) = gt.get(x, y) else { continue };
                acc.gt += 1;
                all.gt += 1;
                let hit = idx.iter().zip(&maps).find_map(|(&i, m)| {
                    let v = &manifest.views[i];
                    let (ex, ey) = if v.scale == [1.0, 1.0] {
                        (x as i64 - v.origin[0] as i64, y as i64 - v.origin[1] as i64)
                    } else {
                        (((x as f64 + 0.5) * v.scale[0]).floor() as i64, ((y as f64 + 0.5) * v.scale[1]).floor() as i64)
                    };
                    let inside = ex >= 0 && ey >= 0 && (ex as u32) < m.width && (ey as u32) < m.height;
                    inside.then(|| (m.get(ex as u32, ey as u32), v.inverse_step))
                });
                if let Some((Some(de), step)) = hit {
                    let (de, dg) = (de as f64, dg as f64);
                    let err = (de - dg).abs();
                    acc.errors.push(err);
                    all.errors.push(err);
                    if (1.0 / de - 1.0 / dg).abs() <= 2.0 * step {
                        acc.complete += 1;
                        all.complete += 1;
                    }
                }
            }
        }
        views.push(acc.score(parent));
    }
    Ok(DepthMetrics { overall: all.score("overall"), views })
}

/// Scores a reconstruct output directory against an oracle fixture directory.
pub fn evaluate_run(out_dir: &Path, gt_dir: &Path) -> Result<Metrics, PipelineError> {
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| PipelineError::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| PipelineError::Data(format!("{}: {e}", manifest_path.display())))?;
    let filtered = score_depths(&manifest, &out_dir.join("filtered"), gt_dir)?;
    let raw = score_depths(&manifest, &out_dir.join("depth"), gt_dir)?;
    let (cloud_points, cloud_accuracy) = match std::fs::read_to_string(out_dir.join("cloud.ply")) {
        Ok(text) => {
            let pts = parse_ply_vertices(&text)?;
            let spec = FixtureSpec::load(gt_dir)?;
            let scene = generate_scene(&spec.scene)?;
            let mut d: Vec<f64> = pts.iter().map(|p| scene.surface_distance(&p.position)).collect();
            (pts.len(), median(&mut d))
        }
        Err(_) => (0, None),
    };
    Ok(Metrics { filtered, raw, cloud_points, cloud_accuracy })
}

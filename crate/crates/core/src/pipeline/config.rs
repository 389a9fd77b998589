use super::PipelineError;
use crate::mvs::{FuseParams, SweepParams};
use crate::oracle::{RigSpec, SceneSpec};
use crate::recapture::GridSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

/// How `reconstruct` treats the input images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Split every image into the configured grid of sub-images.
    Sir,
    /// Shrink every image so its longer side is at most `max_image_size`.
    Downsample,
    /// Use the images as they are.
    Native,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sir" => Ok(Mode::Sir),
            "downsample" => Ok(Mode::Downsample),
            "native" => Ok(Mode::Native),
            _ => Err(format!("unknown mode {s:?} (expected sir, downsample or native)")),
        }
    }
}

/// Matching parameters; the depth range is optional and derived from the
/// sparse points observed by each cluster when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub num_hypotheses: usize,
    pub window: usize,
    pub cost_threshold: f64,
    pub min_depth: Option<f64>,
    pub max_depth: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let p = SweepParams::new(1.0, 2.0);
        Self { num_hypotheses: p.num_hypotheses, window: p.window, cost_threshold: p.cost_threshold, min_depth: None, max_depth: None }
    }
}

impl SweepConfig {
    pub fn params(&self, min_depth: f64, max_depth: f64) -> SweepParams {
        SweepParams { num_hypotheses: self.num_hypotheses, window: self.window, cost_threshold: self.cost_threshold, min_depth, max_depth }
    }

    pub fn fixed_range(&self) -> Option<(f64, f64)> {
        self.min_depth.zip(self.max_depth)
    }
}

/// Sizes used by `bench` for the analytic memory report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub width: u64,
    pub height: u64,
    pub channels: u64,
    pub bytes_per_sample: u64,
    pub sources: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { width: 10_300, height: 7_700, channels: 3, bytes_per_sample: 4, sources: 19 }
    }
}

/// Everything a command may need. Every key has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding `cameras.txt`, `images.txt` and optionally `points3D.txt`.
    pub model_dir: PathBuf,
    pub image_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Fixture directory with `gt/*.sird` and `scene.json`, for evaluation.
    pub gt_dir: Option<PathBuf>,
    pub mode: Mode,
    pub grid: GridSpec,
    pub max_image_size: u32,
    pub cluster_size: usize,
    /// Source images used per reference view.
    pub num_sources: usize,
    pub sweep: SweepConfig,
    pub fuse: FuseParams,
    /// Worker threads; `SIR_WORKERS` takes precedence, all cores when unset.
    pub workers: Option<usize>,
    pub seed: u64,
    pub scene: SceneSpec,
    pub rig: RigSpec,
    /// Ground spacing of the synthetic sparse points.
    pub sparse_spacing: f64,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model_dir: PathBuf::from("sparse"),
            image_dir: PathBuf::from("images"),
            output_dir: PathBuf::from("out"),
            gt_dir: None,
            mode: Mode::Sir,
            grid: GridSpec::new(5, 5).expect("valid grid"),
            max_image_size: 2304,
            cluster_size: 20,
            num_sources: 4,
            sweep: SweepConfig::default(),
            fuse: FuseParams::default(),
            workers: None,
            seed: 42,
            scene: SceneSpec::default(),
            rig: RigSpec::default(),
            sparse_spacing: 2.0,
            bench: BenchConfig::default(),
        }
    }
}

/// Help text listing every configuration key.
pub const CONFIG_KEYS: &str = "\
Configuration keys (JSON file given with --config; override with --set KEY=VALUE):
  model_dir               sparse model directory [sparse]
  image_dir               image directory [images]
  output_dir              output directory [out]
  gt_dir                  fixture directory with gt/ and scene.json [none]
  mode                    sir | downsample | native [sir]
  grid                    sub-image grid as IxJ [5x5]
  max_image_size          longest side after downsampling [2304]
  cluster_size            target views per cluster [20]
  num_sources             source images per reference [4]
  sweep.num_hypotheses    depth hypotheses [128]
  sweep.window            matching window side, odd [7]
  sweep.cost_threshold    minimum NCC [0.3]
  sweep.min_depth         fixed near depth [from sparse points]
  sweep.max_depth         fixed far depth [from sparse points]
  fuse.min_support        views needed per point [2]
  fuse.reproj_tol         reprojection tolerance in px [1.0]
  fuse.depth_rel_tol      relative depth tolerance [0.01]
  workers                 worker threads [all cores; SIR_WORKERS wins]
  seed                    oracle seed, replaces scene.seed [42]
  scene.*                 oracle terrain: extent, height_amplitude, texture_octaves,
                          texture_wavelength, height_wavelength, height_octaves
  rig.*                   oracle cameras: rows, cols, altitude, overlap, width,
                          height, focal, k1, k2
  sparse_spacing          oracle sparse point spacing [2.0]
  bench.*                 width, height, channels, bytes_per_sample, sources";

impl RunConfig {
    /// Reads a JSON config file; missing keys take their defaults.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies `key=value` overrides with dotted keys. Values are parsed as
    /// JSON and fall back to plain strings.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self, PipelineError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root = serde_json::to_value(self).expect("config serializes");
        for (key, raw) in overrides {
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
            let (path, last) = match key.rsplit_once('.') {
                Some((p, l)) => (p.split('.').collect::<Vec<_>>(), l),
                None => (Vec::new(), key.as_str()),
            };
            let mut node = &mut root;
            for part in path {
                node = node.get_mut(part).ok_or_else(|| PipelineError::Config(format!("unknown key {key}")))?;
            }
            let obj = node.as_object_mut().ok_or_else(|| PipelineError::Config(format!("{key}: not an object")))?;
            if !obj.contains_key(last) && !is_optional_key(key) {
                return Err(PipelineError::Config(format!("unknown key {key}")));
            }
            obj.insert(last.to_string(), value);
        }
        serde_json::from_value(root).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.cluster_size < 2 {
            return bad("cluster_size must be at least 2".into());
        }
        if self.num_sources < 1 {
            return bad("num_sources must be at least 1".into());
        }
        if self.max_image_size < 1 {
            return bad("max_image_size must be at least 1".into());
        }
        if let Some(0) = self.workers {
            return bad("workers must be at least 1".into());
        }
        let (lo, hi) = match (self.sweep.min_depth, self.sweep.max_depth) {
            (Some(a), Some(b)) => (a, b),
            (None, None) => (1.0, 2.0),
            _ => return bad("sweep.min_depth and sweep.max_depth must be given together".into()),
        };
        self.sweep.params(lo, hi).validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.fuse.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        let dirs = [&self.model_dir, &self.image_dir, &self.output_dir];
        if dirs[0] == dirs[2] || dirs[1] == dirs[2] {
            return bad("output_dir must differ from model_dir and image_dir".into());
        }
        Ok(())
    }
}

fn is_optional_key(key: &str) -> bool {
    matches!(key, "gt_dir" | "workers" | "sweep.min_depth" | "sweep.max_depth")
}

//! Plane-sweep multi-view stereo with geometric filtering and point fusion.

mod filter;
mod fuse;
mod sweep;

pub use filter::{consistency_check, geometric_consistency_filter, FilterView};
pub use fuse::{fuse_depth_maps, FuseView};
pub use sweep::{plane_sweep, plane_sweep_detailed, SweepInput, SweepResult, TiledGray};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Windows whose intensity variance falls below this are treated as textureless.
pub const MIN_VARIANCE: f64 = 1e-12;

/// A pixel whose cost varies less than this across all hypotheses carries no
/// depth information (zero baseline, for instance) and is left invalid.
pub const FLAT_COST_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MvsError {
    #[error("no source views given")]
    NoSources,
    #[error("degenerate depth range [{min}, {max}]")]
    DegenerateRange { min: f64, max: f64 },
    #[error("invalid sweep parameters: {0}")]
    BadParams(String),
}

fn default_hypotheses() -> usize {
    128
}
fn default_window() -> usize {
    7
}
fn default_cost_threshold() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    #[serde(default = "default_hypotheses")]
    pub num_hypotheses: usize,
    /// Side of the square matching window; odd.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Minimum mean NCC for a depth to be kept.
    #[serde(default = "default_cost_threshold")]
    pub cost_threshold: f64,
    pub min_depth: f64,
    pub max_depth: f64,
}

impl SweepParams {
    pub fn new(min_depth: f64, max_depth: f64) -> Self {
        Self {
            num_hypotheses: default_hypotheses(),
            window: default_window(),
            cost_threshold: default_cost_threshold(),
            min_depth,
            max_depth,
        }
    }

    pub fn validate(&self) -> Result<(), MvsError> {
        if !(self.min_depth.is_finite() && self.max_depth.is_finite() && self.min_depth > 0.0 && self.min_depth < self.max_depth) {
            return Err(MvsError::DegenerateRange { min: self.min_depth, max: self.max_depth });
        }
        if self.num_hypotheses < 2 {
            return Err(MvsError::BadParams("num_hypotheses must be at least 2".into()));
        }
        if self.window < 3 || self.window % 2 == 0 {
            return Err(MvsError::BadParams(format!("window {} must be odd and at least 3", self.window)));
        }
        if !self.cost_threshold.is_finite() {
            return Err(MvsError::BadParams("cost_threshold must be finite".into()));
        }
        Ok(())
    }

    /// Spacing of the hypotheses in inverse depth.
    pub fn inverse_step(&self) -> f64 {
        (1.0 / self.min_depth - 1.0 / self.max_depth) / (self.num_hypotheses - 1) as f64
    }

    /// Depth hypotheses uniform in inverse depth, nearest first. The end
    /// points are exactly `min_depth` and `max_depth`.
    pub fn hypotheses(&self) -> Vec<f64> {
        let n = self.num_hypotheses;
        let (a, b) = (1.0 / self.min_depth, 1.0 / self.max_depth);
        let mut h: Vec<f64> = (0..n).map(|i| 1.0 / (a + (b - a) * i as f64 / (n - 1) as f64)).collect();
        h[0] = self.min_depth;
        h[n - 1] = self.max_depth;
        h
    }
}

fn default_min_support() -> u32 {
    2
}
fn default_reproj_tol() -> f64 {
    1.0
}
fn default_depth_rel_tol() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuseParams {
    #[serde(default = "default_min_support")]
    pub min_support: u32,
    /// Forward-backward reprojection tolerance in pixels.
    #[serde(default = "default_reproj_tol")]
    pub reproj_tol: f64,
    #[serde(default = "default_depth_rel_tol")]
    pub depth_rel_tol: f64,
}

impl Default for FuseParams {
    fn default() -> Self {
        Self { min_support: default_min_support(), reproj_tol: default_reproj_tol(), depth_rel_tol: default_depth_rel_tol() }
    }
}

impl FuseParams {
    pub fn validate(&self) -> Result<(), MvsError> {
        if self.min_support < 1 {
            return Err(MvsError::BadParams("min_support must be at least 1".into()));
        }
        if !(self.reproj_tol > 0.0 && self.depth_rel_tol > 0.0) {
            return Err(MvsError::BadParams("tolerances must be positive".into()));
        }
        Ok(())
    }
}

//! Analytic memory accounting for one MVS step.
//!
//! The model counts image buffers, the cost volume and the output depth and
//! mask buffers. Scratch space internal to a matching algorithm is excluded.

use crate::clustering::Cluster;
use crate::mvs::SweepParams;
use crate::recapture::GridSpec;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MemoryError {
    #[error("byte count overflows 64 bits")]
    Overflow,
    #[error("{0} must be at least 1")]
    Zero(&'static str),
}

/// Bytes per depth-map pixel: an `f32` depth and a one-byte validity mask.
pub const DEPTH_BUFFER_BYTES_PER_PIXEL: u64 = 5;
/// Bytes per cost-volume cell.
pub const COST_BYTES: u64 = 4;

/// `width * height * channels * bytes_per_sample`, exactly.
pub fn image_bytes(width: u64, height: u64, channels: u64, bytes_per_sample: u64) -> Result<u64, MemoryError> {
    for (v, name) in [(width, "width"), (height, "height"), (channels, "channels"), (bytes_per_sample, "bytes_per_sample")] {
        if v == 0 {
            return Err(MemoryError::Zero(name));
        }
    }
    width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(channels))
        .and_then(|v| v.checked_mul(bytes_per_sample))
        .ok_or(MemoryError::Overflow)
}

/// Native image size and sample layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageDims {
    pub width: u64,
    pub height: u64,
    pub channels: u64,
    pub bytes_per_sample: u64,
}

impl ImageDims {
    /// RGB with a 32-bit float per channel.
    pub fn rgb_f32(width: u64, height: u64) -> Self {
        Self { width, height, channels: 3, bytes_per_sample: 4 }
    }
}

/// Measured residency of one cluster during a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterUsage {
    pub cluster: usize,
    pub members: usize,
    /// Bytes of every distinct image tile the cluster was planned to load.
    pub budget_bytes: u64,
    /// Largest resident image byte count observed while the cluster ran.
    pub peak_resident_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub dims: ImageDims,
    pub grid: GridSpec,
    pub tile_width: u64,
    pub tile_height: u64,
    pub native_image_bytes: u64,
    pub tile_bytes: u64,
    pub sources: u64,
    pub num_hypotheses: u64,
    pub image_buffer_bytes: u64,
    pub cost_volume_bytes: u64,
    pub depth_buffer_bytes: u64,
    pub peak_bytes: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clusters: Vec<ClusterUsage>,
}

fn mul(a: u64, b: u64) -> Result<u64, MemoryError> {
    a.checked_mul(b).ok_or(MemoryError::Overflow)
}

fn add(a: u64, b: u64) -> Result<u64, MemoryError> {
    a.checked_add(b).ok_or(MemoryError::Overflow)
}

/// Peak memory of one reference step with `sources` source tiles resident.
///
/// Tiles are sized `ceil(W / I) x ceil(H / J)`.
pub fn estimate_peak(dims: ImageDims, grid: GridSpec, sources: u64, num_hypotheses: u64) -> Result<MemoryReport, MemoryError> {
    if grid.cols == 0 || grid.rows == 0 {
        return Err(MemoryError::Zero("grid"));
    }
    let native_image_bytes = image_bytes(dims.width, dims.height, dims.channels, dims.bytes_per_sample)?;
    let tile_width = dims.width.div_ceil(grid.cols as u64);
    let tile_height = dims.height.div_ceil(grid.rows as u64);
    let tile_bytes = image_bytes(tile_width, tile_height, dims.channels, dims.bytes_per_sample)?;
    let tile_px = mul(tile_width, tile_height)?;
    let image_buffer_bytes = mul(add(sources, 1)?, tile_bytes)?;
    let cost_volume_bytes = mul(mul(tile_px, num_hypotheses)?, COST_BYTES)?;
    let depth_buffer_bytes = mul(tile_px, DEPTH_BUFFER_BYTES_PER_PIXEL)?;
    let peak_bytes = add(add(image_buffer_bytes, cost_volume_bytes)?, depth_buffer_bytes)?;
    Ok(MemoryReport {
        dims,
        grid,
        tile_width,
        tile_height,
        native_image_bytes,
        tile_bytes,
        sources,
        num_hypotheses,
        image_buffer_bytes,
        cost_volume_bytes,
        depth_buffer_bytes,
        peak_bytes,
        clusters: Vec::new(),
    })
}

/// Peak for a cluster whose every other member or borrowed view serves as a source.
pub fn estimate_cluster_peak(cluster: &Cluster, dims: ImageDims, grid: GridSpec, params: &SweepParams) -> Result<MemoryReport, MemoryError> {
    let sources = (cluster.members.len() + cluster.borrowed.len()).saturating_sub(1) as u64;
    estimate_peak(dims, grid, sources, params.num_hypotheses as u64)
}

fn human(bytes: u64) -> String {
    const UNITS: [&str; 5] = ["B", "KB", "MB", "GB", "TB"];
    let mut v = bytes as f64;
    let mut u = 0;
    while v >= 1000.0 && u + 1 < UNITS.len() {
        v /= 1000.0;
        u += 1;
    }
    if u == 0 {
        format!("{bytes} B")
    } else {
        format!("{v:.2} {}", UNITS[u])
    }
}

impl MemoryReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Aligned two-column table.
    pub fn to_table(&self) -> String {
        let rows: Vec<(String, String)> = vec![
            ("image".into(), format!("{}x{}x{} @ {} B", self.dims.width, self.dims.height, self.dims.channels, self.dims.bytes_per_sample)),
            ("grid".into(), self.grid.to_string()),
            ("tile".into(), format!("{}x{}", self.tile_width, self.tile_height)),
            ("native image".into(), human(self.native_image_bytes)),
            ("tile image".into(), human(self.tile_bytes)),
            ("sources".into(), self.sources.to_string()),
            ("hypotheses".into(), self.num_hypotheses.to_string()),
            ("image buffers".into(), human(self.image_buffer_bytes)),
            ("cost volume".into(), human(self.cost_volume_bytes)),
            ("depth buffers".into(), human(self.depth_buffer_bytes)),
            ("peak".into(), human(self.peak_bytes)),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut s = String::new();
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<width$}  {v:>14}");
        }
        if !self.clusters.is_empty() {
            let _ = writeln!(s, "\n{:>7}  {:>7}  {:>14}  {:>14}", "cluster", "members", "budget", "peak resident");
            for c in &self.clusters {
                let _ = writeln!(s, "{:>7}  {:>7}  {:>14}  {:>14}", c.cluster, c.members, human(c.budget_bytes), human(c.peak_resident_bytes));
            }
        }
        s
    }
}

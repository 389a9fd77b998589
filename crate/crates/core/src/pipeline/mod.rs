//! End-to-end orchestration: oracle fixtures, recapture, clustering, depth,
//! fusion, evaluation and memory reports. Every stage reads and writes the
//! documented file formats, so each can be re-run on its own.

pub mod config;
pub mod engine;
pub mod evaluate;
pub mod layout;
pub mod oracle_fixture;
pub mod resample;
pub mod store;

pub use config::{Mode, RunConfig, SweepConfig, CONFIG_KEYS};
pub use evaluate::{evaluate_run, DepthMetrics, DepthScore, Metrics};
pub use layout::Layout;
pub use store::ResidentCounter;

use crate::clustering::{cluster_views, format_clusters, parse_clusters, Cluster, ClusterError};
use crate::memory::{estimate_cluster_peak, ImageDims, MemoryError, MemoryReport};
use crate::model_io::{ModelIoError, PointCloud};
use crate::mvs::MvsError;
use crate::oracle::SceneError;
use crate::recapture::{GridSpec, RecaptureError};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "SIR_WORKERS";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelIoError),
    #[error(transparent)]
    Recapture(#[from] RecaptureError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Mvs(#[from] MvsError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing ground truth {}", .0.display())]
    MissingGroundTruth(PathBuf),
    #[error("cluster {cluster} held {peak} image bytes, over its budget of {budget}")]
    BudgetExceeded { cluster: usize, peak: u64, budget: u64 },
    #[error("{0}")]
    Data(String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.to_path_buf(), source }
    }

    /// Process exit code: 1 for configuration mistakes, 2 for bad or missing data.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// Worker count from `SIR_WORKERS`, then the config, then the machine.
pub fn resolve_workers(config: &RunConfig) -> Result<usize, PipelineError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(PipelineError::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(config.workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))),
    }
}

/// Runs `f` on a dedicated pool with the resolved number of workers.
pub fn with_workers<T: Send>(config: &RunConfig, f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    let n = resolve_workers(config)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| PipelineError::Config(e.to_string()))?;
    Ok(pool.install(f))
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

/// Writes an oracle fixture to `output_dir`.
pub fn cmd_oracle_gen(config: &RunConfig) -> Result<(), PipelineError> {
    let spec = oracle_fixture::FixtureSpec {
        scene: crate::oracle::SceneSpec { seed: config.seed, ..config.scene.clone() },
        rig: config.rig.clone(),
        sparse_spacing: config.sparse_spacing,
    };
    oracle_fixture::generate_fixture(&spec, &config.output_dir)
}

/// Splits `model_dir` + `image_dir` into `output_dir/sparse` and `output_dir/images`.
pub fn cmd_recapture(config: &RunConfig) -> Result<(), PipelineError> {
    layout::write_recaptured(&config.model_dir, &config.image_dir, config.grid, &config.output_dir.join("sparse"), &config.output_dir.join("images"))
}

/// Clusters the views of `model_dir` and writes `output_dir/clusters.txt`.
pub fn cmd_cluster(config: &RunConfig) -> Result<Vec<Cluster>, PipelineError> {
    let layout = Layout::load(&config.model_dir)?;
    let graph = engine::build_graph(&layout, &config.sweep)?;
    let clusters = cluster_views(&graph, config.cluster_size)?;
    write_text(&config.output_dir.join(engine::CLUSTERS_FILE), &format_clusters(&clusters))?;
    Ok(clusters)
}

fn load_or_make_clusters(config: &RunConfig, graph: &crate::clustering::OverlapGraph) -> Result<Vec<Cluster>, PipelineError> {
    let path = config.output_dir.join(engine::CLUSTERS_FILE);
    match std::fs::read_to_string(&path) {
        Ok(text) => Ok(parse_clusters(&text, graph)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let clusters = cluster_views(graph, config.cluster_size)?;
            write_text(&path, &format_clusters(&clusters))?;
            Ok(clusters)
        }
        Err(e) => Err(PipelineError::io(&path, e)),
    }
}

/// Depth maps for every view of `model_dir`, cluster by cluster, into `output_dir/depth`.
pub fn cmd_depth(config: &RunConfig) -> Result<MemoryReport, PipelineError> {
    depth_with_scales(config, &config.model_dir, &config.image_dir, &BTreeMap::new(), &ResidentCounter::new())
}

fn depth_with_scales(
    config: &RunConfig,
    model_dir: &Path,
    image_dir: &Path,
    scales: &BTreeMap<u32, (f64, f64)>,
    counter: &ResidentCounter,
) -> Result<MemoryReport, PipelineError> {
    let layout = Layout::load(model_dir)?;
    let graph = engine::build_graph(&layout, &config.sweep)?;
    let clusters = load_or_make_clusters(config, &graph)?;
    let usages = engine::run_depth_stage(&layout, &graph, &clusters, image_dir, &config.output_dir, config, scales, counter)?;
    let mut report = memory_report(&layout, &clusters, config)?;
    report.clusters = usages;
    write_text(&config.output_dir.join("memory.json"), &report.to_json())?;
    write_text(&config.output_dir.join("memory.txt"), &report.to_table())?;
    Ok(report)
}

/// Analytic estimate for the largest cluster, in the gray `f32` layout the sweep holds.
fn memory_report(layout: &Layout, clusters: &[Cluster], config: &RunConfig) -> Result<MemoryReport, PipelineError> {
    let frame = layout.parents.first().map(|p| p.frame).ok_or_else(|| PipelineError::Data("model has no images".into()))?;
    let grid = layout
        .parents
        .first()
        .map(|p| GridSpec { cols: p.col_spans.len() as u32, rows: p.row_spans.len() as u32 })
        .unwrap_or(GridSpec::single());
    let dims = ImageDims { width: frame.width as u64, height: frame.height as u64, channels: 1, bytes_per_sample: 4 };
    let largest = clusters.iter().max_by_key(|c| (c.members.len() + c.borrowed.len(), std::cmp::Reverse(c.id)));
    let params = config.sweep.params(1.0, 2.0);
    match largest {
        Some(c) => Ok(estimate_cluster_peak(c, dims, grid, &params)?),
        None => Ok(crate::memory::estimate_peak(dims, grid, 0, params.num_hypotheses as u64)?),
    }
}

/// Geometric filtering of `output_dir/depth` and fusion into `output_dir/cloud.ply`.
pub fn cmd_fuse(config: &RunConfig) -> Result<PointCloud, PipelineError> {
    fuse_in(config, &config.model_dir, &config.image_dir, &ResidentCounter::new())
}

fn fuse_in(config: &RunConfig, model_dir: &Path, image_dir: &Path, counter: &ResidentCounter) -> Result<PointCloud, PipelineError> {
    let layout = Layout::load(model_dir)?;
    let graph = engine::build_graph(&layout, &config.sweep)?;
    engine::run_filter_stage(&layout, &graph, &config.output_dir, config)?;
    engine::run_fuse_stage(&layout, &graph, image_dir, &config.output_dir, config, counter)
}

#[derive(Debug, Clone)]
pub struct ReconstructSummary {
    pub memory: MemoryReport,
    pub cloud_points: usize,
    pub metrics: Option<Metrics>,
}

/// Full pipeline in the configured mode. Prepared inputs go to
/// `output_dir/model` and `output_dir/images` (except in native mode).
pub fn cmd_reconstruct(config: &RunConfig) -> Result<ReconstructSummary, PipelineError> {
    let out = &config.output_dir;
    let stale = out.join(engine::CLUSTERS_FILE);
    if stale.exists() {
        std::fs::remove_file(&stale).map_err(|e| PipelineError::io(&stale, e))?;
    }
    let (model_dir, image_dir, scales) = match config.mode {
        Mode::Native => (config.model_dir.clone(), config.image_dir.clone(), BTreeMap::new()),
        Mode::Sir => {
            layout::write_recaptured(&config.model_dir, &config.image_dir, config.grid, &out.join("model"), &out.join("images"))?;
            (out.join("model"), out.join("images"), BTreeMap::new())
        }
        Mode::Downsample => {
            let scales = layout::write_downsampled(&config.model_dir, &config.image_dir, config.max_image_size, &out.join("model"), &out.join("images"))?;
            (out.join("model"), out.join("images"), scales)
        }
    };
    let counter = ResidentCounter::new();
    let memory = depth_with_scales(config, &model_dir, &image_dir, &scales, &counter)?;
    let cloud = fuse_in(config, &model_dir, &image_dir, &counter)?;
    let metrics = match &config.gt_dir {
        Some(gt) => {
            let m = evaluate_run(out, gt)?;
            write_text(&out.join("metrics.json"), &(serde_json::to_string_pretty(&m).expect("metrics serialize") + "\n"))?;
            Some(m)
        }
        None => None,
    };
    Ok(ReconstructSummary { memory, cloud_points: cloud.len(), metrics })
}

/// Scores `output_dir` against the fixture in `gt_dir` and writes `metrics.json`.
pub fn cmd_evaluate(config: &RunConfig) -> Result<Metrics, PipelineError> {
    let gt = config.gt_dir.as_ref().ok_or_else(|| PipelineError::Config("evaluate needs gt_dir".into()))?;
    let m = evaluate_run(&config.output_dir, gt)?;
    write_text(&config.output_dir.join("metrics.json"), &(serde_json::to_string_pretty(&m).expect("metrics serialize") + "\n"))?;
    Ok(m)
}

/// Analytic memory report for the `bench` sizes under the configured grid.
pub fn cmd_bench(config: &RunConfig) -> Result<MemoryReport, PipelineError> {
    let b = &config.bench;
    let dims = ImageDims { width: b.width, height: b.height, channels: b.channels, bytes_per_sample: b.bytes_per_sample };
    Ok(crate::memory::estimate_peak(dims, config.grid, b.sources, config.sweep.num_hypotheses as u64)?)
}

//! Cluster-by-cluster depth estimation, filtering and fusion over a [`Layout`].

use super::config::{Mode, RunConfig, SweepConfig};
use super::layout::Layout;
use super::store::{ResidentCounter, TileCache};
use super::PipelineError;
use crate::clustering::{frustum_proxies, select_source_views, Cluster, ClusterError, OverlapGraph};
use crate::geometry::PixelCoord;
use crate::memory::ClusterUsage;
use crate::model_io::{read_depth_map, read_image, write_depth_map, write_point_cloud, DepthMap, PointCloud};
use crate::mvs::{fuse_depth_maps, geometric_consistency_filter, plane_sweep, FilterView, FuseView, SweepInput, TiledGray};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// Extra pixels kept around a source footprint before snapping to tiles.
const FOOTPRINT_PAD: f64 = 8.0;
/// Ground samples per image axis when a model has no sparse points.
const FRUSTUM_SAMPLES: u32 = 16;

pub const CLUSTERS_FILE: &str = "clusters.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Overlap graph over the views of a layout, scored on the sparse points or,
/// without any, on ground samples at the middle of the fixed depth range.
pub fn build_graph(layout: &Layout, sweep: &SweepConfig) -> Result<OverlapGraph, PipelineError> {
    let mut proxies: Vec<_> = layout.model.sparse_points.iter().map(|p| p.position).collect();
    if proxies.is_empty() {
        let cams: Vec<_> = layout.parents.iter().map(|p| p.frame).collect();
        if let Some((lo, hi)) = sweep.fixed_range() {
            proxies = frustum_proxies(&cams, 0.5 * (lo + hi), FRUSTUM_SAMPLES);
        }
    }
    Ok(OverlapGraph::build(&layout.cameras(), &proxies)?)
}

/// Fixed range when configured; otherwise the depths of the sparse points
/// seen by the cluster's members, widened by 20% on each side.
pub fn depth_range(layout: &Layout, cluster: &Cluster, sweep: &SweepConfig) -> Result<(f64, f64), PipelineError> {
    if let Some(r) = sweep.fixed_range() {
        return Ok(r);
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for p in &layout.model.sparse_points {
        for v in &p.observations {
            if !cluster.members.contains(v) {
                continue;
            }
            if let Some(Ok((_, d))) = layout.view(*v).map(|lv| lv.camera.project_with_depth(&p.position)) {
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
    }
    if !(lo.is_finite() && hi > 0.0) {
        return Err(PipelineError::Data(format!("cluster {} sees no sparse points and no depth range is configured", cluster.id)));
    }
    let (lo, hi) = (lo * 0.8, hi * 1.2);
    Ok(if hi > lo { (lo, hi) } else { (lo, lo * 1.5) })
}

/// Block of one source parent's tiles: inclusive column and row ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcePlan {
    pub parent: usize,
    pub cols: (usize, usize),
    pub rows: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefPlan {
    pub view: u32,
    /// In ascending parent id order.
    pub sources: Vec<SourcePlan>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPlan {
    pub cluster: Cluster,
    pub range: (f64, f64),
    pub refs: Vec<RefPlan>,
    /// Every tile the cluster reads.
    pub tiles: BTreeSet<u32>,
    /// Gray bytes of all tiles plus the largest 8-bit decode buffer.
    pub budget: u64,
}

/// Tiles of `parent` that can receive the reference view's pixels at any
/// depth in `hyps`, or `None` when none can.
pub fn footprint_tiles(layout: &Layout, view: u32, parent: usize, hyps: &[f64]) -> Option<SourcePlan> {
    let v = layout.view(view)?;
    let frame = layout.parents[v.parent].frame;
    let src = &layout.parents[parent];
    let (w, h) = (src.frame.width as f64, src.frame.height as f64);
    let (ox, oy) = v.origin;
    let (sw, sh) = v.size;
    let mut border: Vec<(u32, u32)> = (0..sw).flat_map(|x| [(x, 0), (x, sh - 1)]).collect();
    border.extend((0..sh).flat_map(|y| [(0, y), (sw - 1, y)]));
    let center = frame.center();
    let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut whole = false;
    'outer: for (x, y) in border {
        let Ok(dir) = frame.ray_direction(PixelCoord::center_of(ox + x, oy + y)) else {
            whole = true;
            break;
        };
        for &d in hyps {
            match src.frame.project(&(center + dir * d)) {
                Ok(p) if p.u.is_finite() && p.v.is_finite() => {
                    u0 = u0.min(p.u);
                    u1 = u1.max(p.u);
                    v0 = v0.min(p.v);
                    v1 = v1.max(p.v);
                }
                _ => {
                    whole = true;
                    break 'outer;
                }
            }
        }
    }
    let (x0, x1, y0, y1) = if whole {
        (0.0, w - 1.0, 0.0, h - 1.0)
    } else {
        (
            (u0 - 0.5 - FOOTPRINT_PAD).floor().max(0.0),
            (u1 - 0.5 + FOOTPRINT_PAD).ceil().min(w - 1.0),
            (v0 - 0.5 - FOOTPRINT_PAD).floor().max(0.0),
            (v1 - 0.5 + FOOTPRINT_PAD).ceil().min(h - 1.0),
        )
    };
    if x0 > x1 || y0 > y1 {
        return None;
    }
    let span = |spans: &[(u32, u32)], a: f64, b: f64| -> (usize, usize) {
        let hit: Vec<usize> = spans
            .iter()
            .enumerate()
            .filter(|(_, &(s, l))| (s as f64) <= b && ((s + l - 1) as f64) >= a)
            .map(|(i, _)| i)
            .collect();
        (hit[0], *hit.last().expect("range intersects the frame"))
    };
    Some(SourcePlan { parent, cols: span(&src.col_spans, x0, x1), rows: span(&src.row_spans, y0, y1) })
}

/// Chooses up to `k` source parents per reference and the tiles to load.
pub fn plan_cluster(layout: &Layout, graph: &OverlapGraph, cluster: &Cluster, config: &RunConfig) -> Result<ClusterPlan, PipelineError> {
    let range = depth_range(layout, cluster, &config.sweep)?;
    let params = config.sweep.params(range.0, range.1);
    params.validate()?;
    let hyps = params.hypotheses();
    let mut refs = Vec::new();
    let mut tiles = BTreeSet::new();
    for &view in &cluster.members {
        tiles.insert(view);
        let own = layout.view(view).expect("member in layout").parent;
        let ranked = match select_source_views(view, cluster, graph, usize::MAX) {
            Ok(r) => r,
            Err(ClusterError::NoSources(_)) => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let mut chosen: Vec<SourcePlan> = Vec::new();
        for cand in ranked {
            if chosen.len() == config.num_sources {
                break;
            }
            let p = layout.view(cand).expect("candidate in layout").parent;
            if p == own || chosen.iter().any(|s| s.parent == p) {
                continue;
            }
            if let Some(plan) = footprint_tiles(layout, view, p, &hyps) {
                chosen.push(plan);
            }
        }
        chosen.sort_by_key(|s| layout.parents[s.parent].key);
        for s in &chosen {
            let parent = &layout.parents[s.parent];
            for row in s.rows.0..=s.rows.1 {
                for col in s.cols.0..=s.cols.1 {
                    tiles.insert(parent.tile(col, row));
                }
            }
        }
        refs.push(RefPlan { view, sources: chosen });
    }
    let mut budget = 0u64;
    let mut largest = 0u64;
    for &t in &tiles {
        let px = layout.view(t).map(|v| v.size.0 as u64 * v.size.1 as u64).unwrap_or(0);
        budget += px * 4;
        largest = largest.max(px * 3);
    }
    Ok(ClusterPlan { cluster: cluster.clone(), range, refs, tiles, budget: budget + largest })
}

/// One output depth map and how it relates to its native image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestView {
    pub id: u32,
    pub stem: String,
    /// Stem of the native image the view was taken from.
    pub parent: String,
    pub cluster: usize,
    pub origin: [u32; 2],
    pub size: [u32; 2],
    /// Output pixels per native pixel along x and y.
    pub scale: [f64; 2],
    pub min_depth: f64,
    pub max_depth: f64,
    pub inverse_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub mode: Option<Mode>,
    pub views: Vec<ManifestView>,
}

fn tile_path(layout: &Layout, image_dir: &Path, id: u32) -> std::path::PathBuf {
    image_dir.join(&layout.view(id).expect("tile in layout").name)
}

/// Runs the plane sweep for every reference of every cluster, one cluster
/// resident at a time, writing `depth/<stem>.sird` and the manifest.
#[allow(clippy::too_many_arguments)]
pub fn run_depth_stage(
    layout: &Layout,
    graph: &OverlapGraph,
    clusters: &[Cluster],
    image_dir: &Path,
    out_dir: &Path,
    config: &RunConfig,
    scales: &BTreeMap<u32, (f64, f64)>,
    counter: &ResidentCounter,
) -> Result<Vec<ClusterUsage>, PipelineError> {
    let mut usages = Vec::new();
    let mut manifest = Manifest { mode: Some(config.mode), views: Vec::new() };
    for cluster in clusters {
        let plan = plan_cluster(layout, graph, cluster, config)?;
        let params = config.sweep.params(plan.range.0, plan.range.1);
        counter.reset_peak();
        {
            let mut cache = TileCache::new(counter);
            for &t in &plan.tiles {
                cache.load(t, &tile_path(layout, image_dir, t))?;
            }
            for r in &plan.refs {
                let v = layout.view(r.view).expect("reference in layout");
                let depth = if r.sources.is_empty() {
                    log::warn!("view {} has no source views; its depth map is empty", v.name);
                    DepthMap::invalid(v.stem(), v.size.0, v.size.1)
                } else {
                    let reference = SweepInput {
                        frame: layout.parents[v.parent].frame,
                        image: TiledGray::window(cache.get(r.view).expect("loaded"), v.origin),
                    };
                    let sources: Vec<SweepInput> = r
                        .sources
                        .iter()
                        .map(|s| {
                            let p = &layout.parents[s.parent];
                            let widths: Vec<u32> = (s.cols.0..=s.cols.1).map(|c| p.col_spans[c].1).collect();
                            let heights: Vec<u32> = (s.rows.0..=s.rows.1).map(|r| p.row_spans[r].1).collect();
                            let tiles = (s.rows.0..=s.rows.1)
                                .flat_map(|row| (s.cols.0..=s.cols.1).map(move |col| (col, row)))
                                .map(|(col, row)| cache.get(p.tile(col, row)).expect("loaded"))
                                .collect();
                            let origin = (p.col_spans[s.cols.0].0, p.row_spans[s.rows.0].0);
                            SweepInput { frame: p.frame, image: TiledGray::from_tiles(origin, &widths, &heights, tiles) }
                        })
                        .collect();
                    plane_sweep(v.stem(), &reference, &sources, &params)?
                };
                write_depth_map(&out_dir.join("depth").join(format!("{}.sird", v.stem())), &depth)?;
                let scale = scales.get(&r.view).copied().unwrap_or((1.0, 1.0));
                manifest.views.push(ManifestView {
                    id: v.id,
                    stem: v.stem().to_string(),
                    parent: layout.parents[v.parent].name.clone(),
                    cluster: cluster.id,
                    origin: [v.origin.0, v.origin.1],
                    size: [v.size.0, v.size.1],
                    scale: [scale.0, scale.1],
                    min_depth: plan.range.0,
                    max_depth: plan.range.1,
                    inverse_step: params.inverse_step(),
                });
            }
        }
        let usage = ClusterUsage { cluster: cluster.id, members: cluster.members.len(), budget_bytes: plan.budget, peak_resident_bytes: counter.peak() };
        if usage.peak_resident_bytes > usage.budget_bytes || counter.current() != 0 {
            return Err(PipelineError::BudgetExceeded { cluster: cluster.id, peak: usage.peak_resident_bytes, budget: usage.budget_bytes });
        }
        usages.push(usage);
    }
    manifest.views.sort_by_key(|v| v.id);
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n").map_err(|e| PipelineError::io(&path, e))?;
    Ok(usages)
}

fn load_maps(layout: &Layout, dir: &Path) -> Result<Vec<DepthMap>, PipelineError> {
    layout.views.iter().map(|v| Ok(read_depth_map(&dir.join(format!("{}.sird", v.stem())))?)).collect()
}

/// Geometric consistency filtering of `depth/` into `filtered/`.
pub fn run_filter_stage(layout: &Layout, graph: &OverlapGraph, out_dir: &Path, config: &RunConfig) -> Result<(), PipelineError> {
    let raw = load_maps(layout, &out_dir.join("depth"))?;
    let index: BTreeMap<u32, usize> = layout.views.iter().enumerate().map(|(i, v)| (v.id, i)).collect();
    for (i, v) in layout.views.iter().enumerate() {
        let neighbors: Vec<FilterView> = graph
            .neighbors(v.id)
            .into_iter()
            .map(|n| FilterView { camera: layout.views[index[&n]].camera, depth: &raw[index[&n]] })
            .collect();
        let out = geometric_consistency_filter(&FilterView { camera: v.camera, depth: &raw[i] }, &neighbors, &config.fuse);
        write_depth_map(&out_dir.join("filtered").join(format!("{}.sird", v.stem())), &out)?;
    }
    Ok(())
}

/// Fuses `filtered/` into `cloud.ply`, reading one color image at a time.
pub fn run_fuse_stage(layout: &Layout, graph: &OverlapGraph, image_dir: &Path, out_dir: &Path, config: &RunConfig, counter: &ResidentCounter) -> Result<PointCloud, PipelineError> {
    let maps = load_maps(layout, &out_dir.join("filtered"))?;
    let index: BTreeMap<u32, usize> = layout.views.iter().enumerate().map(|(i, v)| (v.id, i)).collect();
    let views: Vec<FuseView> = layout
        .views
        .iter()
        .zip(&maps)
        .map(|(v, m)| FuseView { camera: v.camera, depth: m, neighbors: graph.neighbors(v.id).into_iter().map(|n| index[&n]).collect() })
        .collect();
    let mut held = 0u64;
    let mut failure = None;
    let cloud = fuse_depth_maps(&views, &config.fuse, |i| {
        counter.sub(held);
        held = 0;
        match read_image(&image_dir.join(&layout.views[i].name)) {
            Ok(im) => {
                held = im.byte_len() as u64;
                counter.add(held);
                Some(im)
            }
            Err(e) => {
                failure.get_or_insert(e);
                None
            }
        }
    });
    counter.sub(held);
    if let Some(e) = failure {
        return Err(e.into());
    }
    write_point_cloud(&out_dir.join("cloud.ply"), &cloud)?;
    Ok(cloud)
}

//! Overlap scoring, greedy view clustering and source-view selection.
//!
//! Overlap between two views is measured on proxy points (sparse
//! reconstruction points, or ground samples when none exist): the fraction
//! of proxies seen by one view that the other also sees, averaged over both
//! directions.

use crate::geometry::{Camera, PixelCoord};
use nalgebra::Vector3;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use thiserror::Error;

/// Scores at or below this are treated as "no overlap".
pub const SCORE_FLOOR: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClusterError {
    #[error("no proxy points to score overlap with")]
    EmptyProxy,
    #[error("view {0} has no source view overlapping above the floor")]
    NoSources(u32),
    #[error("view {0} is not a member of the cluster")]
    NotAMember(u32),
    #[error("target cluster size must be at least 2")]
    TargetTooSmall,
    #[error("cluster file line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn visibility(camera: &Camera, proxies: &[Vector3<f64>]) -> Vec<bool> {
    proxies.iter().map(|p| camera.project(p).map(|px| camera.contains(px)).unwrap_or(false)).collect()
}

fn score_from_visibility(a: &[bool], b: &[bool]) -> f64 {
    let (mut in_a, mut in_b, mut both) = (0usize, 0usize, 0usize);
    for (&va, &vb) in a.iter().zip(b) {
        in_a += va as usize;
        in_b += vb as usize;
        both += (va && vb) as usize;
    }
    let frac = |n: usize| if n == 0 { 0.0 } else { both as f64 / n as f64 };
    (frac(in_a) + frac(in_b)) / 2.0
}

/// Symmetric overlap score in `[0, 1]`.
pub fn overlap_score(a: &Camera, b: &Camera, proxies: &[Vector3<f64>]) -> Result<f64, ClusterError> {
    if proxies.is_empty() {
        return Err(ClusterError::EmptyProxy);
    }
    Ok(score_from_visibility(&visibility(a, proxies), &visibility(b, proxies)))
}

/// Ground proxies for models without sparse points: a `samples x samples`
/// pixel lattice of every view lifted to `depth`.
pub fn frustum_proxies(cameras: &[Camera], depth: f64, samples: u32) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    for cam in cameras {
        for sy in 0..samples {
            for sx in 0..samples {
                let u = (sx as f64 + 0.5) / samples as f64 * cam.width as f64;
                let v = (sy as f64 + 0.5) / samples as f64 * cam.height as f64;
                if let Ok(p) = cam.unproject(PixelCoord::new(u, v), depth) {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Dense symmetric score matrix over a list of views.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapGraph {
    ids: Vec<u32>,
    scores: Vec<f64>,
}

impl OverlapGraph {
    /// Scores every pair. `views` must have unique ids; they are sorted by id.
    pub fn build(views: &[(u32, Camera)], proxies: &[Vector3<f64>]) -> Result<Self, ClusterError> {
        if proxies.is_empty() {
            return Err(ClusterError::EmptyProxy);
        }
        let mut sorted: Vec<&(u32, Camera)> = views.iter().collect();
        sorted.sort_by_key(|(id, _)| *id);
        let vis: Vec<Vec<bool>> = {
            use rayon::prelude::*;
            sorted.par_iter().map(|(_, cam)| visibility(cam, proxies)).collect()
        };
        let n = sorted.len();
        let mut scores = vec![0.0; n * n];
        for i in 0..n {
            scores[i * n + i] = 1.0;
            for j in i + 1..n {
                let s = score_from_visibility(&vis[i], &vis[j]);
                scores[i * n + j] = s;
                scores[j * n + i] = s;
            }
        }
        Ok(Self { ids: sorted.iter().map(|(id, _)| *id).collect(), scores })
    }

    /// Builds a graph from explicit scores; `score(i, j)` is queried for `i < j`.
    pub fn from_fn(mut ids: Vec<u32>, score: impl Fn(u32, u32) -> f64) -> Self {
        ids.sort_unstable();
        ids.dedup();
        let n = ids.len();
        let mut scores = vec![0.0; n * n];
        for i in 0..n {
            scores[i * n + i] = 1.0;
            for j in i + 1..n {
                let s = score(ids[i], ids[j]).clamp(0.0, 1.0);
                scores[i * n + j] = s;
                scores[j * n + i] = s;
            }
        }
        Self { ids, scores }
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn index(&self, id: u32) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn score(&self, a: u32, b: u32) -> f64 {
        match (self.index(a), self.index(b)) {
            (Some(i), Some(j)) => self.scores[i * self.ids.len() + j],
            _ => 0.0,
        }
    }

    /// Views scoring above the floor with `id`, in id order.
    pub fn neighbors(&self, id: u32) -> Vec<u32> {
        self.ids.iter().copied().filter(|&o| o != id && self.score(id, o) > SCORE_FLOOR).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub id: usize,
    /// Views reconstructed by this cluster; each is a reference view exactly once.
    pub members: Vec<u32>,
    /// Non-member views overlapping a member, usable read-only as stereo sources.
    pub borrowed: Vec<u32>,
    /// True when the single member overlaps no other view.
    pub isolated: bool,
}

impl Cluster {
    pub fn references(&self) -> &[u32] {
        &self.members
    }

    pub fn contains(&self, id: u32) -> bool {
        self.members.contains(&id)
    }
}

/// Greedy agglomeration into clusters of about `target_size` views.
///
/// Each cluster is seeded with the unassigned view that has the most
/// unassigned neighbors and grown with the unassigned view of largest total
/// overlap to the current members, stopping at `target_size` or when no
/// candidate's total exceeds the floor. Ties go to the smaller id.
pub fn cluster_views(graph: &OverlapGraph, target_size: usize) -> Result<Vec<Cluster>, ClusterError> {
    if target_size < 2 {
        return Err(ClusterError::TargetTooSmall);
    }
    let mut unassigned: BTreeSet<u32> = graph.ids().iter().copied().collect();
    let mut clusters = Vec::new();
    while !unassigned.is_empty() {
        let seed = *unassigned
            .iter()
            .max_by(|&&a, &&b| {
                let da = unassigned.iter().filter(|&&o| o != a && graph.score(a, o) > SCORE_FLOOR).count();
                let db = unassigned.iter().filter(|&&o| o != b && graph.score(b, o) > SCORE_FLOOR).count();
                da.cmp(&db).then(b.cmp(&a))
            })
            .expect("non-empty");
        unassigned.remove(&seed);
        let mut members = vec![seed];
        while members.len() < target_size {
            let best = unassigned
                .iter()
                .map(|&c| (c, members.iter().map(|&m| graph.score(c, m)).sum::<f64>()))
                .filter(|&(_, total)| total > SCORE_FLOOR)
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            match best {
                Some((c, _)) => {
                    unassigned.remove(&c);
                    members.push(c);
                }
                None => break,
            }
        }
        members.sort_unstable();
        let member_set: BTreeSet<u32> = members.iter().copied().collect();
        let borrowed: Vec<u32> = graph
            .ids()
            .iter()
            .copied()
            .filter(|o| !member_set.contains(o) && members.iter().any(|&m| graph.score(m, *o) > SCORE_FLOOR))
            .collect();
        let isolated = members.len() == 1 && graph.neighbors(seed).is_empty();
        clusters.push(Cluster { id: clusters.len(), members, borrowed, isolated });
    }
    Ok(clusters)
}

/// Up to `k` source views for `reference`, best overlap first (ties by id),
/// drawn from the cluster's members and borrowed views.
pub fn select_source_views(reference: u32, cluster: &Cluster, graph: &OverlapGraph, k: usize) -> Result<Vec<u32>, ClusterError> {
    if !cluster.contains(reference) {
        return Err(ClusterError::NotAMember(reference));
    }
    let mut cands: Vec<(u32, f64)> = cluster
        .members
        .iter()
        .chain(&cluster.borrowed)
        .copied()
        .filter(|&v| v != reference)
        .map(|v| (v, graph.score(reference, v)))
        .filter(|&(_, s)| s > SCORE_FLOOR)
        .collect();
    if cands.is_empty() {
        return Err(ClusterError::NoSources(reference));
    }
    cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    cands.dedup_by_key(|c| c.0);
    Ok(cands.into_iter().take(k).map(|(v, _)| v).collect())
}

/// `cluster <id>: <view ids...>`, one line per cluster.
pub fn format_clusters(clusters: &[Cluster]) -> String {
    let mut s = String::new();
    for c in clusters {
        let _ = write!(s, "cluster {}:", c.id);
        for m in &c.members {
            let _ = write!(s, " {m}");
        }
        s.push('\n');
    }
    s
}

/// Parses [`format_clusters`] output and restores borrowed views and isolation flags from `graph`.
pub fn parse_clusters(text: &str, graph: &OverlapGraph) -> Result<Vec<Cluster>, ClusterError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let err = |m: &str| ClusterError::Parse { line: n + 1, message: m.to_string() };
        let rest = t.strip_prefix("cluster ").ok_or_else(|| err("expected `cluster <id>: ...`"))?;
        let (id, ids) = rest.split_once(':').ok_or_else(|| err("missing ':'"))?;
        let id: usize = id.trim().parse().map_err(|_| err("bad cluster id"))?;
        let mut members = ids
            .split_whitespace()
            .map(|s| s.parse::<u32>().map_err(|_| err("bad view id")))
            .collect::<Result<Vec<_>, _>>()?;
        if members.is_empty() {
            return Err(err("empty cluster"));
        }
        members.sort_unstable();
        let borrowed = graph
            .ids()
            .iter()
            .copied()
            .filter(|o| !members.contains(o) && members.iter().any(|&m| graph.score(m, *o) > SCORE_FLOOR))
            .collect();
        let isolated = members.len() == 1 && graph.neighbors(members[0]).is_empty();
        out.push(Cluster { id, members, borrowed, isolated });
    }
    Ok(out)
}

//! How the views of a model relate to the native images they were cut from.
//!
//! A recaptured model directory carries `subimages.txt` next to the COLMAP
//! files, one line per sub-image:
//!
//! ```text
//! SUB_IMAGE_ID PARENT_IMAGE_ID PARENT_CAMERA_ID I J ORIGIN_X ORIGIN_Y WIDTH HEIGHT PARENT_NAME
//! ```
//!
//! `PARENT_CAMERA_ID` names the native camera, kept in `cameras.txt`, so the
//! full frame of every sub-image can be rebuilt exactly. Without the file,
//! every view is its own single-tile parent.

use super::resample::{downsampled_size, resample_area, scale_camera};
use super::PipelineError;
use crate::geometry::Camera;
use crate::model_io::{read_image, read_sparse_model, write_image, write_sparse_model, SceneModel, SparsePoint, View};
use crate::recapture::{recapture_grid, split_image_for, GridSpec, SubImageRef};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub const SUBIMAGES_FILE: &str = "subimages.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubImageRecord {
    pub sub_id: u32,
    pub parent_id: u32,
    pub parent_camera_id: u32,
    pub i: u32,
    pub j: u32,
    pub origin_x: u32,
    pub origin_y: u32,
    pub width: u32,
    pub height: u32,
    pub parent_name: String,
}

pub fn format_subimages(records: &[SubImageRecord]) -> String {
    let mut s = String::from("# SUB_IMAGE_ID PARENT_IMAGE_ID PARENT_CAMERA_ID I J ORIGIN_X ORIGIN_Y WIDTH HEIGHT PARENT_NAME\n");
    for r in records {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {} {} {}",
            r.sub_id, r.parent_id, r.parent_camera_id, r.i, r.j, r.origin_x, r.origin_y, r.width, r.height, r.parent_name
        );
    }
    s
}

pub fn parse_subimages(path: &Path, text: &str) -> Result<Vec<SubImageRecord>, PipelineError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        let bad = || PipelineError::Data(format!("{}:{}: expected 10 fields", path.display(), n + 1));
        if f.len() != 10 {
            return Err(bad());
        }
        let num = |k: usize| f[k].parse::<u32>().map_err(|_| bad());
        out.push(SubImageRecord {
            sub_id: num(0)?,
            parent_id: num(1)?,
            parent_camera_id: num(2)?,
            i: num(3)?,
            j: num(4)?,
            origin_x: num(5)?,
            origin_y: num(6)?,
            width: num(7)?,
            height: num(8)?,
            parent_name: f[9].to_string(),
        });
    }
    Ok(out)
}

/// A native image and how it is tiled.
#[derive(Debug, Clone)]
pub struct Parent {
    /// Image id in the native model.
    pub key: u32,
    pub name: String,
    /// Camera of the full native frame.
    pub frame: Camera,
    /// `(start, length)` of every tile column and row.
    pub col_spans: Vec<(u32, u32)>,
    pub row_spans: Vec<(u32, u32)>,
    /// View id of every tile, row-major.
    pub tiles: Vec<u32>,
}

impl Parent {
    pub fn tile(&self, col: usize, row: usize) -> u32 {
        self.tiles[row * self.col_spans.len() + col]
    }
}

#[derive(Debug, Clone)]
pub struct LayoutView {
    pub id: u32,
    /// Image file name.
    pub name: String,
    pub parent: usize,
    pub cell: (u32, u32),
    pub origin: (u32, u32),
    pub size: (u32, u32),
    /// Camera of the view itself.
    pub camera: Camera,
}

impl LayoutView {
    pub fn stem(&self) -> &str {
        match self.name.rfind('.') {
            Some(i) if i > 0 => &self.name[..i],
            _ => &self.name,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub model: SceneModel,
    pub parents: Vec<Parent>,
    /// Sorted by id.
    pub views: Vec<LayoutView>,
}

impl Layout {
    pub fn load(model_dir: &Path) -> Result<Self, PipelineError> {
        let model = read_sparse_model(model_dir)?;
        let sub_path = model_dir.join(SUBIMAGES_FILE);
        let records = match std::fs::read_to_string(&sub_path) {
            Ok(text) => Some(parse_subimages(&sub_path, &text)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(PipelineError::io(&sub_path, e)),
        };
        Self::from_model(model, records)
    }

    pub fn from_model(model: SceneModel, records: Option<Vec<SubImageRecord>>) -> Result<Self, PipelineError> {
        let camera = |id: u32| model.view_camera(id).ok_or_else(|| PipelineError::Data(format!("image {id} has no camera")));
        let mut parents = Vec::new();
        let mut views = Vec::new();
        match records {
            None => {
                for (&id, v) in &model.views {
                    let cam = camera(id)?;
                    views.push(LayoutView { id, name: v.name.clone(), parent: parents.len(), cell: (0, 0), origin: (0, 0), size: (cam.width, cam.height), camera: cam });
                    parents.push(Parent {
                        key: id,
                        name: v.stem().to_string(),
                        frame: cam,
                        col_spans: vec![(0, cam.width)],
                        row_spans: vec![(0, cam.height)],
                        tiles: vec![id],
                    });
                }
            }
            Some(records) => {
                let mut by_parent: BTreeMap<u32, Vec<&SubImageRecord>> = BTreeMap::new();
                for r in &records {
                    if !model.views.contains_key(&r.sub_id) {
                        return Err(PipelineError::Data(format!("sub-image {} is not in the model", r.sub_id)));
                    }
                    by_parent.entry(r.parent_id).or_default().push(r);
                }
                if records.len() != model.views.len() {
                    return Err(PipelineError::Data("subimages.txt does not list every image".into()));
                }
                for (key, recs) in by_parent {
                    let first = recs[0];
                    let native = *model
                        .cameras
                        .get(&first.parent_camera_id)
                        .ok_or_else(|| PipelineError::Data(format!("missing parent camera {}", first.parent_camera_id)))?;
                    let mut frame = native;
                    frame.extrinsics = model.views[&first.sub_id].extrinsics;
                    let cols = recs.iter().map(|r| r.i).max().unwrap_or(0) as usize + 1;
                    let rows = recs.iter().map(|r| r.j).max().unwrap_or(0) as usize + 1;
                    let mut col_spans = vec![None; cols];
                    let mut row_spans = vec![None; rows];
                    let mut tiles = vec![None; cols * rows];
                    for r in &recs {
                        let (i, j) = (r.i as usize, r.j as usize);
                        let c = *col_spans[i].get_or_insert((r.origin_x, r.width));
                        let rw = *row_spans[j].get_or_insert((r.origin_y, r.height));
                        if c != (r.origin_x, r.width) || rw != (r.origin_y, r.height) || tiles[j * cols + i].replace(r.sub_id).is_some() {
                            return Err(PipelineError::Data(format!("inconsistent tiling of parent {key}")));
                        }
                        let cam = camera(r.sub_id)?;
                        if (cam.width, cam.height) != (r.width, r.height) {
                            return Err(PipelineError::Data(format!("sub-image {} size disagrees with its camera", r.sub_id)));
                        }
                        views.push(LayoutView {
                            id: r.sub_id,
                            name: model.views[&r.sub_id].name.clone(),
                            parent: parents.len(),
                            cell: (r.i, r.j),
                            origin: (r.origin_x, r.origin_y),
                            size: (r.width, r.height),
                            camera: cam,
                        });
                    }
                    let incomplete = || PipelineError::Data(format!("incomplete tiling of parent {key}"));
                    parents.push(Parent {
                        key,
                        name: first.parent_name.clone(),
                        frame,
                        col_spans: col_spans.into_iter().collect::<Option<_>>().ok_or_else(incomplete)?,
                        row_spans: row_spans.into_iter().collect::<Option<_>>().ok_or_else(incomplete)?,
                        tiles: tiles.into_iter().collect::<Option<_>>().ok_or_else(incomplete)?,
                    });
                }
            }
        }
        views.sort_by_key(|v| v.id);
        Ok(Self { model, parents, views })
    }

    pub fn view(&self, id: u32) -> Option<&LayoutView> {
        self.views.binary_search_by_key(&id, |v| v.id).ok().map(|i| &self.views[i])
    }

    pub fn cameras(&self) -> Vec<(u32, Camera)> {
        self.views.iter().map(|v| (v.id, v.camera)).collect()
    }
}

/// Splits every image of a native model into `grid` tiles and writes the
/// recaptured model, tiles and `subimages.txt`. Images are processed one at a time.
///
/// With a 1x1 grid the ids, names and cameras of the input are kept.
pub fn write_recaptured(model_dir: &Path, image_dir: &Path, grid: GridSpec, out_model: &Path, out_images: &Path) -> Result<(), PipelineError> {
    let native = read_sparse_model(model_dir)?;
    let identity = grid == GridSpec::single();
    let mut out = SceneModel { cameras: native.cameras.clone(), ..Default::default() };
    let cam_base = native.cameras.keys().max().copied().unwrap_or(0);
    let mut records = Vec::new();
    // Native view id to its tiles: (sub id, origin, size).
    let mut tiles_of: BTreeMap<u32, Vec<(u32, SubImageRef)>> = BTreeMap::new();
    let mut next_id = 1u32;
    std::fs::create_dir_all(out_images).map_err(|e| PipelineError::io(out_images, e))?;
    for (&id, view) in &native.views {
        let cam = native.view_camera(id).ok_or_else(|| PipelineError::Data(format!("image {id} has no camera")))?;
        let src = image_dir.join(&view.name);
        let image = read_image(&src)?;
        let ext = Path::new(&view.name).extension().and_then(|e| e.to_str()).unwrap_or("ppm").to_string();
        let set = recapture_grid(&cam, view.stem(), grid)?;
        let tiles = split_image_for(&cam, &image, view.stem(), grid)?;
        for ((r, sub_cam), (_, tile)) in set.iter().zip(&tiles) {
            let (sub_id, name, camera_id) = if identity {
                (id, view.name.clone(), view.camera_id)
            } else {
                let sid = next_id;
                next_id += 1;
                out.cameras.insert(cam_base + sid, *sub_cam);
                (sid, format!("{}.{ext}", r.name()), cam_base + sid)
            };
            write_image(&out_images.join(&name), tile)?;
            out.views.insert(sub_id, View { camera_id, name, extrinsics: view.extrinsics });
            let (i, j) = r.index.unwrap_or((0, 0));
            records.push(SubImageRecord {
                sub_id,
                parent_id: id,
                parent_camera_id: view.camera_id,
                i,
                j,
                origin_x: r.origin_x,
                origin_y: r.origin_y,
                width: r.width,
                height: r.height,
                parent_name: view.stem().to_string(),
            });
            tiles_of.entry(id).or_default().push((sub_id, r.clone()));
        }
    }
    for p in &native.sparse_points {
        let mut obs = Vec::new();
        for &v in &p.observations {
            let Some(cam) = native.view_camera(v) else { continue };
            let Ok(px) = cam.project(&p.position) else { continue };
            if !cam.contains(px) {
                continue;
            }
            let (x, y) = (px.u.floor() as u32, px.v.floor() as u32);
            if let Some((sid, _)) = tiles_of.get(&v).and_then(|ts| ts.iter().find(|(_, r)| r.contains_native(x, y))) {
                obs.push(*sid);
            }
        }
        if !obs.is_empty() {
            out.sparse_points.push(SparsePoint { observations: obs, ..p.clone() });
        }
    }
    write_sparse_model(&out, out_model)?;
    let sub_path = out_model.join(SUBIMAGES_FILE);
    std::fs::write(&sub_path, format_subimages(&records)).map_err(|e| PipelineError::io(&sub_path, e))?;
    Ok(())
}

/// Writes a copy of a native model and its images shrunk so that no side
/// exceeds `max_size`. Returns the per-view scale factors `(sx, sy)`.
pub fn write_downsampled(model_dir: &Path, image_dir: &Path, max_size: u32, out_model: &Path, out_images: &Path) -> Result<BTreeMap<u32, (f64, f64)>, PipelineError> {
    let native = read_sparse_model(model_dir)?;
    let mut out = native.clone();
    for (id, cam) in out.cameras.iter_mut() {
        let (w, h) = downsampled_size(cam.width, cam.height, max_size);
        *cam = scale_camera(&native.cameras[id], w, h);
    }
    let mut scales = BTreeMap::new();
    std::fs::create_dir_all(out_images).map_err(|e| PipelineError::io(out_images, e))?;
    for (&id, view) in &native.views {
        let before = native.cameras[&view.camera_id];
        let after = out.cameras[&view.camera_id];
        let image = read_image(&image_dir.join(&view.name))?;
        if (image.width(), image.height()) != (before.width, before.height) {
            return Err(PipelineError::Data(format!("image {} does not match its camera size", view.name)));
        }
        write_image(&out_images.join(&view.name), &resample_area(&image, after.width, after.height))?;
        scales.insert(id, (after.width as f64 / before.width as f64, after.height as f64 / before.height as f64));
    }
    write_sparse_model(&out, out_model)?;
    Ok(scales)
}

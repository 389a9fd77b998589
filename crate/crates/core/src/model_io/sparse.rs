//! COLMAP-compatible text sparse models (`cameras.txt`, `images.txt`, `points3D.txt`).
//!
//! Floats are written with Rust's shortest round-trip formatting, which never
//! needs more than 17 significant digits and reads back bit-exactly.

use super::{write_atomic, ModelIoError};
use crate::geometry::{Camera, Extrinsics, Intrinsics};
use nalgebra::Vector3;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// One registered image.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub camera_id: u32,
    pub name: String,
    pub extrinsics: Extrinsics,
}

impl View {
    /// File name without extension; used as the image's string identifier.
    pub fn stem(&self) -> &str {
        match self.name.rfind('.') {
            Some(i) if i > 0 => &self.name[..i],
            _ => &self.name,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsePoint {
    pub id: u64,
    pub position: Vector3<f64>,
    pub color: [u8; 3],
    pub error: f64,
    /// Ids of the views observing this point.
    pub observations: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneModel {
    pub cameras: BTreeMap<u32, Camera>,
    pub views: BTreeMap<u32, View>,
    pub sparse_points: Vec<SparsePoint>,
}

impl SceneModel {
    /// Full camera of a view: its intrinsics and size with its own pose.
    pub fn view_camera(&self, view_id: u32) -> Option<Camera> {
        let view = self.views.get(&view_id)?;
        let mut cam = *self.cameras.get(&view.camera_id)?;
        cam.extrinsics = view.extrinsics;
        Some(cam)
    }

    pub fn validate(&self) -> Result<(), ModelIoError> {
        for (id, v) in &self.views {
            if !self.cameras.contains_key(&v.camera_id) {
                return Err(ModelIoError::InvalidModel(format!("image {id} references missing camera {}", v.camera_id)));
            }
        }
        for p in &self.sparse_points {
            if let Some(v) = p.observations.iter().find(|v| !self.views.contains_key(v)) {
                return Err(ModelIoError::InvalidModel(format!("point {} observed by missing image {v}", p.id)));
            }
        }
        Ok(())
    }

    pub fn view_by_name(&self, name: &str) -> Option<(u32, &View)> {
        self.views.iter().find(|(_, v)| v.name == name || v.stem() == name).map(|(id, v)| (*id, v))
    }
}

pub fn read_sparse_model(dir: &Path) -> Result<SceneModel, ModelIoError> {
    let cameras_path = dir.join("cameras.txt");
    let images_path = dir.join("images.txt");
    let points_path = dir.join("points3D.txt");
    let cameras = parse_cameras(&cameras_path, &read_text(&cameras_path)?)?;
    let views = parse_images(&images_path, &read_text(&images_path)?)?;
    let sparse_points = match std::fs::read_to_string(&points_path) {
        Ok(text) => parse_points(&points_path, &text)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(ModelIoError::io(&points_path, e)),
    };
    let model = SceneModel { cameras, views, sparse_points };
    model.validate()?;
    Ok(model)
}

fn read_text(path: &Path) -> Result<String, ModelIoError> {
    std::fs::read_to_string(path).map_err(|e| ModelIoError::io(path, e))
}

fn fields(line: &str) -> Vec<&str> {
    line.split_whitespace().collect()
}

fn parse_num<T: std::str::FromStr>(file: &Path, line: usize, tok: &str, what: &str) -> Result<T, ModelIoError> {
    tok.parse::<T>().map_err(|_| ModelIoError::parse(file, line, format!("invalid {what} {tok:?}")))
}

fn parse_cameras(file: &Path, text: &str) -> Result<BTreeMap<u32, Camera>, ModelIoError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let f = fields(t);
        if f.len() < 4 {
            return Err(ModelIoError::parse(file, line, "expected CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]"));
        }
        let id: u32 = parse_num(file, line, f[0], "camera id")?;
        let kind = f[1];
        let width: u32 = parse_num(file, line, f[2], "width")?;
        let height: u32 = parse_num(file, line, f[3], "height")?;
        let params = f[4..]
            .iter()
            .map(|s| parse_num::<f64>(file, line, s, "parameter"))
            .collect::<Result<Vec<_>, _>>()?;
        let expect = |n: usize| -> Result<(), ModelIoError> {
            if params.len() == n {
                Ok(())
            } else {
                Err(ModelIoError::parse(file, line, format!("{kind} takes {n} parameters, found {}", params.len())))
            }
        };
        let (fx, fy, cx, cy, k1, k2) = match kind {
            "SIMPLE_PINHOLE" => {
                expect(3)?;
                (params[0], params[0], params[1], params[2], 0.0, 0.0)
            }
            "PINHOLE" => {
                expect(4)?;
                (params[0], params[1], params[2], params[3], 0.0, 0.0)
            }
            "SIMPLE_RADIAL" => {
                expect(4)?;
                (params[0], params[0], params[1], params[2], params[3], 0.0)
            }
            "RADIAL" => {
                expect(5)?;
                (params[0], params[0], params[1], params[2], params[3], params[4])
            }
            // Accepted only without tangential terms.
            "OPENCV" if params.len() == 8 && params[6] == 0.0 && params[7] == 0.0 => {
                (params[0], params[1], params[2], params[3], params[4], params[5])
            }
            _ => {
                return Err(ModelIoError::UnsupportedCameraKind {
                    file: file.to_path_buf(),
                    line,
                    kind: kind.to_string(),
                })
            }
        };
        let intr = Intrinsics::new(fx, fy, cx, cy, k1, k2).map_err(|e| ModelIoError::parse(file, line, e.to_string()))?;
        let cam = Camera::new(intr, Extrinsics::identity(), width, height)
            .map_err(|e| ModelIoError::parse(file, line, e.to_string()))?;
        if out.insert(id, cam).is_some() {
            return Err(ModelIoError::parse(file, line, format!("duplicate camera id {id}")));
        }
    }
    Ok(out)
}

fn parse_images(file: &Path, text: &str) -> Result<BTreeMap<u32, View>, ModelIoError> {
    let mut out = BTreeMap::new();
    // Every image occupies two lines; the second (2D observations) may be empty,
    // so blank lines are only skipped while looking for the next header line.
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim_start().starts_with('#'));
    while let Some((n, raw)) = lines.next() {
        let line = n + 1;
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        let f = fields(t);
        if f.len() < 10 {
            return Err(ModelIoError::parse(file, line, "expected IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME"));
        }
        let id: u32 = parse_num(file, line, f[0], "image id")?;
        let mut q = [0.0; 4];
        for (k, slot) in q.iter_mut().enumerate() {
            *slot = parse_num(file, line, f[1 + k], "quaternion component")?;
        }
        let mut t3 = [0.0; 3];
        for (k, slot) in t3.iter_mut().enumerate() {
            *slot = parse_num(file, line, f[5 + k], "translation component")?;
        }
        let camera_id: u32 = parse_num(file, line, f[8], "camera id")?;
        let name = f[9..].join(" ");
        let extrinsics = Extrinsics::from_quaternion(q, Vector3::from(t3))
            .map_err(|e| ModelIoError::parse(file, line, e.to_string()))?;
        if let Some((n2, obs)) = lines.next() {
            let count = obs.split_whitespace().count();
            if count % 3 != 0 {
                return Err(ModelIoError::parse(file, n2 + 1, "2D observations must be X Y POINT3D_ID triples"));
            }
        }
        if out.insert(id, View { camera_id, name, extrinsics }).is_some() {
            return Err(ModelIoError::parse(file, line, format!("duplicate image id {id}")));
        }
    }
    Ok(out)
}

fn parse_points(file: &Path, text: &str) -> Result<Vec<SparsePoint>, ModelIoError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let f = fields(t);
        if f.len() < 8 || (f.len() - 8) % 2 != 0 {
            return Err(ModelIoError::parse(file, line, "expected POINT3D_ID X Y Z R G B ERROR TRACK[]"));
        }
        let id: u64 = parse_num(file, line, f[0], "point id")?;
        let position = Vector3::new(
            parse_num(file, line, f[1], "coordinate")?,
            parse_num(file, line, f[2], "coordinate")?,
            parse_num(file, line, f[3], "coordinate")?,
        );
        let color = [
            parse_num(file, line, f[4], "color")?,
            parse_num(file, line, f[5], "color")?,
            parse_num(file, line, f[6], "color")?,
        ];
        let error: f64 = parse_num(file, line, f[7], "error")?;
        let mut observations: Vec<u32> = Vec::with_capacity((f.len() - 8) / 2);
        for pair in f[8..].chunks_exact(2) {
            let image: u32 = parse_num(file, line, pair[0], "track image id")?;
            let _: i64 = parse_num(file, line, pair[1], "track point2D index")?;
            if !observations.contains(&image) {
                observations.push(image);
            }
        }
        out.push(SparsePoint { id, position, color, error, observations });
    }
    Ok(out)
}

fn camera_line(id: u32, cam: &Camera) -> String {
    let i = &cam.intrinsics;
    let (w, h) = (cam.width, cam.height);
    if !i.has_distortion() {
        format!("{id} PINHOLE {w} {h} {} {} {} {}", i.fx, i.fy, i.cx, i.cy)
    } else if i.fx == i.fy {
        format!("{id} RADIAL {w} {h} {} {} {} {} {}", i.fx, i.cx, i.cy, i.k1, i.k2)
    } else {
        format!("{id} OPENCV {w} {h} {} {} {} {} {} {} 0 0", i.fx, i.fy, i.cx, i.cy, i.k1, i.k2)
    }
}

pub fn write_sparse_model(model: &SceneModel, dir: &Path) -> Result<(), ModelIoError> {
    model.validate()?;

    let mut cams = String::new();
    cams.push_str("# Camera list with one line of data per camera:\n");
    cams.push_str("#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n");
    let _ = writeln!(cams, "# Number of cameras: {}", model.cameras.len());
    for (id, cam) in &model.cameras {
        cams.push_str(&camera_line(*id, cam));
        cams.push('\n');
    }

    // 2D observation lists: each point gets the next index in every image observing it.
    let mut obs_per_view: BTreeMap<u32, Vec<(f64, f64, u64)>> = BTreeMap::new();
    let mut track_index: Vec<Vec<(u32, usize)>> = Vec::with_capacity(model.sparse_points.len());
    for p in &model.sparse_points {
        let mut track = Vec::with_capacity(p.observations.len());
        for &v in &p.observations {
            let (u, w) = model
                .view_camera(v)
                .and_then(|c| c.project(&p.position).ok())
                .map(|px| (px.u, px.v))
                .unwrap_or((-1.0, -1.0));
            let list = obs_per_view.entry(v).or_default();
            track.push((v, list.len()));
            list.push((u, w, p.id));
        }
        track_index.push(track);
    }

    let mut imgs = String::new();
    imgs.push_str("# Image list with two lines of data per image:\n");
    imgs.push_str("#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n");
    imgs.push_str("#   POINTS2D[] as (X, Y, POINT3D_ID)\n");
    let _ = writeln!(imgs, "# Number of images: {}", model.views.len());
    for (id, v) in &model.views {
        let [qw, qx, qy, qz] = v.extrinsics.quaternion();
        let t = v.extrinsics.translation();
        let _ = writeln!(imgs, "{id} {qw} {qx} {qy} {qz} {} {} {} {} {}", t.x, t.y, t.z, v.camera_id, v.name);
        if let Some(list) = obs_per_view.get(id) {
            let line: Vec<String> = list.iter().map(|(x, y, pid)| format!("{x} {y} {pid}")).collect();
            imgs.push_str(&line.join(" "));
        }
        imgs.push('\n');
    }

    let mut pts = String::new();
    pts.push_str("# 3D point list with one line of data per point:\n");
    pts.push_str("#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n");
    let _ = writeln!(pts, "# Number of points: {}", model.sparse_points.len());
    for (p, track) in model.sparse_points.iter().zip(&track_index) {
        let [r, g, b] = p.color;
        let _ = write!(pts, "{} {} {} {} {r} {g} {b} {}", p.id, p.position.x, p.position.y, p.position.z, p.error);
        for (v, idx) in track {
            let _ = write!(pts, " {v} {idx}");
        }
        pts.push('\n');
    }

    std::fs::create_dir_all(dir).map_err(|e| ModelIoError::io(dir, e))?;
    write_atomic(&dir.join("cameras.txt"), cams.as_bytes())?;
    write_atomic(&dir.join("images.txt"), imgs.as_bytes())?;
    write_atomic(&dir.join("points3D.txt"), pts.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pinhole_line() {
        let cams = parse_cameras(Path::new("cameras.txt"), "# c\n1 PINHOLE 1000 1000 1000.0 1000.0 500.0 500.0\n").unwrap();
        let c = cams[&1];
        assert_eq!((c.width, c.height), (1000, 1000));
        let i = c.intrinsics;
        assert_eq!((i.fx, i.fy, i.cx, i.cy, i.k1, i.k2), (1000.0, 1000.0, 500.0, 500.0, 0.0, 0.0));
    }

    #[test]
    fn parses_radial_line() {
        let cams = parse_cameras(Path::new("cameras.txt"), "7 RADIAL 640 480 500 -320.5 240 0.01 -0.002\n").unwrap();
        let i = cams[&7].intrinsics;
        assert_eq!((i.fx, i.fy, i.cx, i.cy, i.k1, i.k2), (500.0, 500.0, -320.5, 240.0, 0.01, -0.002));
    }

    #[test]
    fn rejects_unknown_kind() {
        let e = parse_cameras(Path::new("cameras.txt"), "1 FISHEYE 10 10 1 2 3 4\n").unwrap_err();
        assert!(matches!(e, ModelIoError::UnsupportedCameraKind { line: 1, .. }));
        let e = parse_cameras(Path::new("cameras.txt"), "1 OPENCV 10 10 1 1 5 5 0 0 0.1 0\n").unwrap_err();
        assert!(matches!(e, ModelIoError::UnsupportedCameraKind { .. }));
    }

    #[test]
    fn reports_line_numbers() {
        let e = parse_cameras(Path::new("cameras.txt"), "# header\n\n1 PINHOLE 10 10 1 1 abc 5\n").unwrap_err();
        match e {
            ModelIoError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identity_pose_and_empty_observations() {
        let text = "# images\n1 1 0 0 0 0 0 0 3 a.ppm\n\n2 1 0 0 0 1 2 3 3 b.ppm\n1.0 2.0 5\n";
        let views = parse_images(Path::new("images.txt"), text).unwrap();
        assert_eq!(views.len(), 2);
        assert_eq!(views[&1].extrinsics, Extrinsics::identity());
        assert_eq!(views[&2].extrinsics.translation(), &Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(views[&2].stem(), "b");
    }

    #[test]
    fn empty_points_file() {
        assert!(parse_points(Path::new("points3D.txt"), "").unwrap().is_empty());
        assert!(parse_points(Path::new("points3D.txt"), "# only comments\n").unwrap().is_empty());
    }

    #[test]
    fn parses_point_track() {
        let pts = parse_points(Path::new("p"), "5 1 2 3 10 20 30 0.5 1 0 2 4 1 1\n").unwrap();
        assert_eq!(pts[0].observations, vec![1, 2]);
        assert_eq!(pts[0].color, [10, 20, 30]);
        assert!(parse_points(Path::new("p"), "5 1 2 3 10 20 30 0.5 1\n").is_err());
    }
}

//! ASCII PLY point clouds.

use super::{write_atomic, ModelIoError};
use nalgebra::Vector3;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct CloudPoint {
    pub position: Vector3<f64>,
    pub color: [u8; 3],
    /// Number of views that agreed on this point.
    pub support: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_ply(&self) -> String {
        let mut s = String::with_capacity(200 + self.points.len() * 48);
        s.push_str("ply\nformat ascii 1.0\n");
        let _ = writeln!(s, "element vertex {}", self.points.len());
        s.push_str(
            "property double x\nproperty double y\nproperty double z\n\
             property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        );
        for p in &self.points {
            let [r, g, b] = p.color;
            let _ = writeln!(s, "{} {} {} {r} {g} {b}", p.position.x, p.position.y, p.position.z);
        }
        s
    }
}

pub fn write_point_cloud(path: &Path, cloud: &PointCloud) -> Result<(), ModelIoError> {
    write_atomic(path, cloud.to_ply().as_bytes())
}

/// Minimal reader for the vertex layout written by [`write_point_cloud`].
/// Support counts are not stored in the file and come back as 1.
pub fn parse_ply_vertices(text: &str) -> Result<Vec<CloudPoint>, ModelIoError> {
    let file = Path::new("<ply>");
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(ModelIoError::parse(file, 1, "missing ply magic")),
    }
    let mut count = None;
    for (n, line) in lines.by_ref() {
        let line = line.trim();
        if line == "end_header" {
            break;
        }
        if let Some(rest) = line.strip_prefix("element vertex ") {
            count = Some(rest.trim().parse::<usize>().map_err(|_| ModelIoError::parse(file, n + 1, "bad vertex count"))?);
        } else if line.starts_with("format") && line != "format ascii 1.0" {
            return Err(ModelIoError::UnsupportedFormat(line.to_string()));
        }
    }
    let count = count.ok_or_else(|| ModelIoError::parse(file, 1, "no vertex element"))?;
    let mut points = Vec::with_capacity(count);
    for (n, line) in lines.take(count) {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(ModelIoError::parse(file, n + 1, "expected 6 vertex fields"));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| ModelIoError::parse(file, n + 1, "bad coordinate"));
        let byte = |i: usize| f[i].parse::<u8>().map_err(|_| ModelIoError::parse(file, n + 1, "bad color"));
        points.push(CloudPoint {
            position: Vector3::new(num(0)?, num(1)?, num(2)?),
            color: [byte(3)?, byte(4)?, byte(5)?],
            support: 1,
        });
    }
    if points.len() != count {
        return Err(ModelIoError::parse(file, 1, format!("expected {count} vertices, found {}", points.len())));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cloud_header() {
        let ply = PointCloud::default().to_ply();
        assert!(ply.contains("element vertex 0\n"));
        assert!(ply.ends_with("end_header\n"));
        assert!(parse_ply_vertices(&ply).unwrap().is_empty());
    }

    #[test]
    fn single_white_point() {
        let cloud = PointCloud {
            points: vec![CloudPoint { position: Vector3::new(1.0, 2.0, 3.0), color: [255; 3], support: 1 }],
        };
        let ply = cloud.to_ply();
        assert!(ply.ends_with("end_header\n1 2 3 255 255 255\n"));
    }

    #[test]
    fn rejects_short_body() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nend_header\n1 2 3 0 0 0\n";
        assert!(parse_ply_vertices(text).is_err());
    }
}

//! SIRD depth maps: `b"SIRD"`, little-endian `u32` width and height, then
//! row-major little-endian `f32` depths with 0 marking invalid pixels.

use super::{write_atomic, ModelIoError};
use std::path::Path;

pub const SIRD_MAGIC: &[u8; 4] = b"SIRD";

/// Per-pixel camera-frame depth of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub view_id: String,
    pub width: u32,
    pub height: u32,
    depth: Vec<f32>,
    valid: Vec<bool>,
}

impl DepthMap {
    pub fn invalid(view_id: impl Into<String>, width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self { view_id: view_id.into(), width, height, depth: vec![0.0; n], valid: vec![false; n] }
    }

    /// Builds a map from raw depths; anything not strictly positive and finite becomes invalid.
    pub fn from_depths(view_id: impl Into<String>, width: u32, height: u32, depths: Vec<f32>) -> Self {
        assert_eq!(depths.len(), width as usize * height as usize, "depth buffer size mismatch");
        let mut map = Self::invalid(view_id, width, height);
        for (i, d) in depths.into_iter().enumerate() {
            map.set(i, d);
        }
        map
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Option<f32> {
        let i = self.index(x, y);
        self.valid[i].then(|| self.depth[i])
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> Option<f32> {
        self.valid[i].then(|| self.depth[i])
    }

    #[inline]
    pub fn set(&mut self, i: usize, depth: f32) {
        if depth.is_finite() && depth > 0.0 {
            self.depth[i] = depth;
            self.valid[i] = true;
        } else {
            self.invalidate(i);
        }
    }

    #[inline]
    pub fn invalidate(&mut self, i: usize) {
        self.depth[i] = 0.0;
        self.valid[i] = false;
    }

    pub fn depths(&self) -> &[f32] {
        &self.depth
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }
}

pub fn encode_sird(map: &DepthMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + map.len() * 4);
    out.extend_from_slice(SIRD_MAGIC);
    out.extend_from_slice(&map.width.to_le_bytes());
    out.extend_from_slice(&map.height.to_le_bytes());
    for &d in &map.depth {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out
}

pub fn decode_sird(view_id: &str, bytes: &[u8]) -> Result<DepthMap, ModelIoError> {
    let file = Path::new("<sird>");
    if bytes.len() < 12 || &bytes[..4] != SIRD_MAGIC {
        return Err(ModelIoError::parse(file, 1, "missing SIRD header"));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let n = (width as usize)
        .checked_mul(height as usize)
        .ok_or_else(|| ModelIoError::parse(file, 1, "dimensions overflow"))?;
    let expected = n.checked_mul(4).and_then(|v| v.checked_add(12));
    if expected != Some(bytes.len()) {
        return Err(ModelIoError::parse(file, 1, format!("expected {n} depth samples for {width}x{height}, file has {} bytes", bytes.len())));
    }
    let depths = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DepthMap::from_depths(view_id, width, height, depths))
}

pub fn write_depth_map(path: &Path, map: &DepthMap) -> Result<(), ModelIoError> {
    write_atomic(path, &encode_sird(map))
}

/// Reads a SIRD file; the view id is the file stem.
pub fn read_depth_map(path: &Path) -> Result<DepthMap, ModelIoError> {
    let bytes = std::fs::read(path).map_err(|e| ModelIoError::io(path, e))?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    decode_sird(&id, &bytes).map_err(|e| match e {
        ModelIoError::Parse { line, message, .. } => ModelIoError::Parse { file: path.to_path_buf(), line, message },
        other => other,
    })
}

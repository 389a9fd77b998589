//! Readers and writers for the on-disk formats the pipeline exchanges:
//! COLMAP-style text sparse models, binary 8-bit pixmaps, SIRD depth maps and
//! ASCII PLY point clouds.

mod pixmap;
mod ply;
mod sird;
mod sparse;

pub use pixmap::{decode_pixmap, encode_pixmap, read_image, write_image};
pub use ply::{parse_ply_vertices, write_point_cloud, CloudPoint, PointCloud};
pub use sird::{decode_sird, encode_sird, read_depth_map, write_depth_map, DepthMap, SIRD_MAGIC};
pub use sparse::{read_sparse_model, write_sparse_model, SceneModel, SparsePoint, View};

use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("{}:{line}: {message}", file.display())]
    Parse { file: PathBuf, line: usize, message: String },
    #[error("{}:{line}: unsupported camera model {kind:?}", file.display())]
    UnsupportedCameraKind { file: PathBuf, line: usize, kind: String },
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("inconsistent model: {0}")]
    InvalidModel(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ModelIoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            ModelIoError::MissingFile(path.to_path_buf())
        } else {
            ModelIoError::Io { path: path.to_path_buf(), source }
        }
    }

    pub(crate) fn parse(file: &Path, line: usize, message: impl Into<String>) -> Self {
        ModelIoError::Parse { file: file.to_path_buf(), line, message: message.into() }
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ModelIoError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| ModelIoError::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| ModelIoError::io(path, e))
}

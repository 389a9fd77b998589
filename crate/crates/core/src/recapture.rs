//! Sub-image recapture.
//!
//! A rectangular region of a native image becomes a full image of its own by
//! pairing it with a synthesized camera that differs from the native camera
//! only in its principal point, shifted by the region origin:
//!
//! ```text
//! (cx', cy') = (cx - x_o, cy - y_o)
//! ```
//!
//! Focal lengths, distortion and the pose are copied unchanged, so every world
//! point projects into the sub-image exactly where it projected into the
//! native image, minus the origin.

use crate::geometry::{Camera, PixelCoord};
use crate::image::Image;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecaptureError {
    #[error("region origin ({x}, {y}) size {w}x{h} exceeds native image {native_w}x{native_h}")]
    OutOfBounds { x: u32, y: u32, w: u32, h: u32, native_w: u32, native_h: u32 },
    #[error("grid {cols}x{rows} has more cells than the {width}x{height} image has pixels along an axis")]
    GridTooFine { cols: u32, rows: u32, width: u32, height: u32 },
    #[error("grid dimensions must be at least 1x1")]
    EmptyGrid,
    #[error("image is {actual_w}x{actual_h} but the camera expects {expected_w}x{expected_h}")]
    DimensionMismatch { expected_w: u32, expected_h: u32, actual_w: u32, actual_h: u32 },
}

/// Number of sub-images along each axis (`cols` horizontally, `rows` vertically).
/// Serialized as the string `"IxJ"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GridSpec {
    pub cols: u32,
    pub rows: u32,
}

impl GridSpec {
    pub fn new(cols: u32, rows: u32) -> Result<Self, RecaptureError> {
        if cols == 0 || rows == 0 {
            return Err(RecaptureError::EmptyGrid);
        }
        Ok(Self { cols, rows })
    }

    pub const fn single() -> Self {
        Self { cols: 1, rows: 1 }
    }

    pub fn cell_count(&self) -> u32 {
        self.cols * self.rows
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.cols, self.rows)
    }
}

impl From<GridSpec> for String {
    fn from(g: GridSpec) -> String {
        g.to_string()
    }
}

impl TryFrom<String> for GridSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected IxJ, got {s:?}"))?;
        let cols = a.trim().parse().map_err(|_| format!("bad column count in {s:?}"))?;
        let rows = b.trim().parse().map_err(|_| format!("bad row count in {s:?}"))?;
        GridSpec::new(cols, rows).map_err(|e| e.to_string())
    }
}

/// Identity and placement of a sub-image inside its native image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubImageRef {
    pub parent_id: String,
    /// Grid position `(i, j)`; `None` for free-form regions.
    pub index: Option<(u32, u32)>,
    pub origin_x: u32,
    pub origin_y: u32,
    pub width: u32,
    pub height: u32,
}

impl SubImageRef {
    /// File-name stem: `{parent}_s{i}_{j}` for grid cells,
    /// `{parent}_r{x}_{y}_{w}x{h}` for free regions.
    pub fn name(&self) -> String {
        match self.index {
            Some((i, j)) => format!("{}_s{}_{}", self.parent_id, i, j),
            None => format!(
                "{}_r{}_{}_{}x{}",
                self.parent_id, self.origin_x, self.origin_y, self.width, self.height
            ),
        }
    }

    pub fn contains_native(&self, x: u32, y: u32) -> bool {
        x >= self.origin_x && y >= self.origin_y && x - self.origin_x < self.width && y - self.origin_y < self.height
    }
}

#[derive(Debug, Clone)]
pub struct RecaptureSet {
    pub native_camera: Camera,
    pub refs: Vec<SubImageRef>,
    pub cameras: Vec<Camera>,
}

impl RecaptureSet {
    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SubImageRef, &Camera)> {
        self.refs.iter().zip(self.cameras.iter())
    }
}

/// Camera of the native region with top-left corner `origin` and extent `size`.
pub fn recapture_region(
    camera: &Camera,
    parent_id: &str,
    origin: (u32, u32),
    size: (u32, u32),
) -> Result<(SubImageRef, Camera), RecaptureError> {
    recapture_cell(camera, parent_id, None, origin, size)
}

fn recapture_cell(
    camera: &Camera,
    parent_id: &str,
    index: Option<(u32, u32)>,
    (x, y): (u32, u32),
    (w, h): (u32, u32),
) -> Result<(SubImageRef, Camera), RecaptureError> {
    let fits = w >= 1
        && h >= 1
        && (x as u64 + w as u64) <= camera.width as u64
        && (y as u64 + h as u64) <= camera.height as u64;
    if !fits {
        return Err(RecaptureError::OutOfBounds {
            x,
            y,
            w,
            h,
            native_w: camera.width,
            native_h: camera.height,
        });
    }
    let mut sub = *camera;
    sub.intrinsics.cx = camera.intrinsics.cx - x as f64;
    sub.intrinsics.cy = camera.intrinsics.cy - y as f64;
    sub.width = w;
    sub.height = h;
    let r = SubImageRef {
        parent_id: parent_id.to_string(),
        index,
        origin_x: x,
        origin_y: y,
        width: w,
        height: h,
    };
    Ok((r, sub))
}

/// Splits `len` pixels into `count` spans of `floor(len / count)` pixels; the
/// last span absorbs the remainder. Returns `(start, length)` pairs.
pub fn tile_spans(len: u32, count: u32) -> Vec<(u32, u32)> {
    let step = len / count;
    (0..count)
        .map(|k| {
            let start = k * step;
            let end = if k + 1 == count { len } else { start + step };
            (start, end - start)
        })
        .collect()
}

/// Largest tile extent along an axis, `ceil(len / count)` for divisible
/// sizes and at most that plus the remainder otherwise.
pub fn max_tile_extent(len: u32, count: u32) -> u32 {
    tile_spans(len, count).into_iter().map(|(_, l)| l).max().unwrap_or(0)
}

/// Recaptures every cell of an `I x J` grid, row-major with `j` outer.
pub fn recapture_grid(camera: &Camera, parent_id: &str, grid: GridSpec) -> Result<RecaptureSet, RecaptureError> {
    if grid.cols == 0 || grid.rows == 0 {
        return Err(RecaptureError::EmptyGrid);
    }
    if grid.cols > camera.width || grid.rows > camera.height {
        return Err(RecaptureError::GridTooFine {
            cols: grid.cols,
            rows: grid.rows,
            width: camera.width,
            height: camera.height,
        });
    }
    let xs = tile_spans(camera.width, grid.cols);
    let ys = tile_spans(camera.height, grid.rows);
    let mut refs = Vec::with_capacity(grid.cell_count() as usize);
    let mut cameras = Vec::with_capacity(grid.cell_count() as usize);
    for (j, &(y, h)) in ys.iter().enumerate() {
        for (i, &(x, w)) in xs.iter().enumerate() {
            let (r, c) = recapture_cell(camera, parent_id, Some((i as u32, j as u32)), (x, y), (w, h))?;
            refs.push(r);
            cameras.push(c);
        }
    }
    Ok(RecaptureSet { native_camera: *camera, refs, cameras })
}

/// Cuts an image into grid tiles, bit-exact, in the same order as [`recapture_grid`].
pub fn split_image(image: &Image, parent_id: &str, grid: GridSpec) -> Result<Vec<(SubImageRef, Image)>, RecaptureError> {
    if grid.cols == 0 || grid.rows == 0 {
        return Err(RecaptureError::EmptyGrid);
    }
    if grid.cols > image.width() || grid.rows > image.height() {
        return Err(RecaptureError::GridTooFine {
            cols: grid.cols,
            rows: grid.rows,
            width: image.width(),
            height: image.height(),
        });
    }
    let xs = tile_spans(image.width(), grid.cols);
    let ys = tile_spans(image.height(), grid.rows);
    let mut out = Vec::with_capacity(grid.cell_count() as usize);
    for (j, &(y, h)) in ys.iter().enumerate() {
        for (i, &(x, w)) in xs.iter().enumerate() {
            let r = SubImageRef {
                parent_id: parent_id.to_string(),
                index: Some((i as u32, j as u32)),
                origin_x: x,
                origin_y: y,
                width: w,
                height: h,
            };
            out.push((r, image.crop(x, y, w, h)));
        }
    }
    Ok(out)
}

/// [`split_image`] with a check that the image matches the camera it was captured with.
pub fn split_image_for(camera: &Camera, image: &Image, parent_id: &str, grid: GridSpec) -> Result<Vec<(SubImageRef, Image)>, RecaptureError> {
    if camera.width != image.width() || camera.height != image.height() {
        return Err(RecaptureError::DimensionMismatch {
            expected_w: camera.width,
            expected_h: camera.height,
            actual_w: image.width(),
            actual_h: image.height(),
        });
    }
    split_image(image, parent_id, grid)
}

/// Pastes tiles back into a native-size image.
pub fn assemble_tiles(width: u32, height: u32, tiles: &[(SubImageRef, Image)]) -> Result<Image, RecaptureError> {
    let channels = tiles.first().map(|(_, t)| t.channels()).unwrap_or(1);
    let mut out = Image::new(width, height, channels);
    for (r, t) in tiles {
        if r.origin_x + t.width() > width || r.origin_y + t.height() > height {
            return Err(RecaptureError::OutOfBounds {
                x: r.origin_x,
                y: r.origin_y,
                w: t.width(),
                h: t.height(),
                native_w: width,
                native_h: height,
            });
        }
        out.blit(t, r.origin_x, r.origin_y);
    }
    Ok(out)
}

pub fn map_sub_to_native(r: &SubImageRef, pixel: PixelCoord) -> PixelCoord {
    PixelCoord::new(pixel.u + r.origin_x as f64, pixel.v + r.origin_y as f64)
}

pub fn map_native_to_sub(r: &SubImageRef, pixel: PixelCoord) -> PixelCoord {
    PixelCoord::new(pixel.u - r.origin_x as f64, pixel.v - r.origin_y as f64)
}

//! C ABI over the sub-image recapture geometry.
//!
//! Every fallible function returns a [`SirStatus`]. On failure a description
//! is kept per thread and can be read with [`sir_last_error_message`].
//! Handles returned through out-parameters are owned by the caller and must
//! be released with the matching `*_free` function.

use nalgebra::Vector3;
use sir_core::geometry::GeometryError;
use sir_core::memory::{image_bytes, MemoryError};
use sir_core::recapture::{recapture_grid, recapture_region, GridSpec, RecaptureError, RecaptureSet};
use sir_core::{Camera, Extrinsics, Intrinsics, PixelCoord};
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::ptr;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SirStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The point or pixel cannot be mapped, e.g. it lies behind the camera.
    Geometry = 3,
    OutOfRange = 4,
    Overflow = 5,
    /// An internal failure was caught at the boundary.
    Internal = 6,
}

/// Pinhole intrinsics with two radial distortion coefficients.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub k1: f64,
    pub k2: f64,
}

/// Placement of a sub-image in its native image. `grid_col` and `grid_row`
/// are -1 for free-form regions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SirSubImage {
    pub origin_x: u32,
    pub origin_y: u32,
    pub width: u32,
    pub height: u32,
    pub grid_col: i32,
    pub grid_row: i32,
}

/// Opaque camera handle.
pub struct SirCamera(Camera);

/// Opaque handle to the cameras of a grid recapture.
pub struct SirRecaptureSet(RecaptureSet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SirStatus, String);

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        let status = match e {
            GeometryError::Behind | GeometryError::NoConverge => SirStatus::Geometry,
            _ => SirStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<RecaptureError> for Failure {
    fn from(e: RecaptureError) -> Self {
        Failure(SirStatus::InvalidArgument, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SirStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure and converts it to a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure> + UnwindSafe) -> SirStatus {
    match catch_unwind(f) {
        Ok(Ok(())) => SirStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SirStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(p: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

fn boxed_camera(camera: Camera) -> *mut SirCamera {
    Box::into_raw(Box::new(SirCamera(camera)))
}

/// Message of the last failed call on this thread, or null if none failed.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sir_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a camera from intrinsics, a world-to-camera rotation quaternion
/// `(w, x, y, z)`, a translation and an image size.
///
/// # Safety
/// `intrinsics`, `quaternion` (4 doubles), `translation` (3 doubles) and
/// `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sir_camera_new(
    intrinsics: *const SirIntrinsics,
    quaternion: *const f64,
    translation: *const f64,
    width: u32,
    height: u32,
    out: *mut *mut SirCamera,
) -> SirStatus {
    guard(|| {
        let k = deref(intrinsics, "intrinsics")?;
        let q = deref(quaternion as *const [f64; 4], "quaternion")?;
        let t = deref(translation as *const [f64; 3], "translation")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let intr = Intrinsics::new(k.fx, k.fy, k.cx, k.cy, k.k1, k.k2)?;
        let ext = Extrinsics::from_quaternion(*q, Vector3::from(*t))?;
        let camera = Camera::new(intr, ext, width, height)?;
        write(out, boxed_camera(camera), "out")
    })
}

/// Releases a camera. Null is ignored.
///
/// # Safety
/// `camera` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sir_camera_free(camera: *mut SirCamera) {
    if !camera.is_null() {
        drop(Box::from_raw(camera));
    }
}

/// Reads intrinsics and image size of a camera.
///
/// # Safety
/// `camera` must be a live handle; `intrinsics`, `width` and `height` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sir_camera_describe(camera: *const SirCamera, intrinsics: *mut SirIntrinsics, width: *mut u32, height: *mut u32) -> SirStatus {
    guard(|| {
        let c = &deref(camera, "camera")?.0;
        let k = c.intrinsics;
        write(intrinsics, SirIntrinsics { fx: k.fx, fy: k.fy, cx: k.cx, cy: k.cy, k1: k.k1, k2: k.k2 }, "intrinsics")?;
        write(width, c.width, "width")?;
        write(height, c.height, "height")
    })
}

/// Projects a world point to continuous pixel coordinates.
///
/// # Safety
/// `camera` must be a live handle; `point` three doubles; `u` and `v` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sir_camera_project(camera: *const SirCamera, point: *const f64, u: *mut f64, v: *mut f64) -> SirStatus {
    guard(|| {
        let c = &deref(camera, "camera")?.0;
        let p = deref(point as *const [f64; 3], "point")?;
        let px = c.project(&Vector3::from(*p))?;
        write(u, px.u, "u")?;
        write(v, px.v, "v")
    })
}

/// Back-projects pixel `(u, v)` at `depth` along the optical axis to a world point.
///
/// # Safety
/// `camera` must be a live handle and `point` room for three doubles.
#[no_mangle]
pub unsafe extern "C" fn sir_camera_unproject(camera: *const SirCamera, u: f64, v: f64, depth: f64, point: *mut f64) -> SirStatus {
    guard(|| {
        let c = &deref(camera, "camera")?.0;
        let p = c.unproject(PixelCoord::new(u, v), depth)?;
        write(point as *mut [f64; 3], [p.x, p.y, p.z], "point")
    })
}

/// Camera of the native region with the given origin and size.
///
/// # Safety
/// `camera` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sir_recapture_region(
    camera: *const SirCamera,
    origin_x: u32,
    origin_y: u32,
    width: u32,
    height: u32,
    out: *mut *mut SirCamera,
) -> SirStatus {
    guard(|| {
        let c = &deref(camera, "camera")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let (_, sub) = recapture_region(c, "native", (origin_x, origin_y), (width, height))?;
        write(out, boxed_camera(sub), "out")
    })
}

/// Splits a camera into a `cols` x `rows` grid of sub-image cameras.
///
/// # Safety
/// `camera` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sir_recapture_grid(camera: *const SirCamera, cols: u32, rows: u32, out: *mut *mut SirRecaptureSet) -> SirStatus {
    guard(|| {
        let c = &deref(camera, "camera")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let set = recapture_grid(c, "native", GridSpec::new(cols, rows)?)?;
        write(out, Box::into_raw(Box::new(SirRecaptureSet(set))), "out")
    })
}

/// Number of sub-images in a set, or 0 for null.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sir_recapture_set_len(set: *const SirRecaptureSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// Placement and a new camera handle for sub-image `index` (row-major).
/// Either output may be null when not wanted.
///
/// # Safety
/// `set` must be a live handle; non-null outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sir_recapture_set_get(set: *const SirRecaptureSet, index: usize, info: *mut SirSubImage, camera: *mut *mut SirCamera) -> SirStatus {
    guard(|| {
        let s = &deref(set, "set")?.0;
        let (r, c) = s
            .iter()
            .nth(index)
            .ok_or_else(|| Failure(SirStatus::OutOfRange, format!("index {index} out of range for {} sub-images", s.len())))?;
        if !info.is_null() {
            let (col, row) = r.index.map_or((-1, -1), |(i, j)| (i as i32, j as i32));
            info.write(SirSubImage { origin_x: r.origin_x, origin_y: r.origin_y, width: r.width, height: r.height, grid_col: col, grid_row: row });
        }
        if !camera.is_null() {
            camera.write(boxed_camera(*c));
        }
        Ok(())
    })
}

/// Releases a recapture set. Null is ignored.
///
/// # Safety
/// `set` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sir_recapture_set_free(set: *mut SirRecaptureSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Bytes of an uncompressed image buffer.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sir_image_bytes(width: u64, height: u64, channels: u64, bytes_per_sample: u64, out: *mut u64) -> SirStatus {
    guard(|| {
        let n = image_bytes(width, height, channels, bytes_per_sample).map_err(|e| {
            let status = match e {
                MemoryError::Overflow => SirStatus::Overflow,
                MemoryError::Zero(_) => SirStatus::InvalidArgument,
            };
            Failure(status, e.to_string())
        })?;
        write(out, n, "out")
    })
}

//! Sub-image recapture (SIR) for memory-bounded multi-view stereo.
//!
//! Large images are cut into sub-images, each paired with a synthesized
//! camera whose principal point is shifted by the sub-image origin. The
//! sub-views are then reconstructed by a plane-sweep stereo pipeline as if
//! they were ordinary photographs.

pub mod clustering;
pub mod geometry;
pub mod image;
pub mod memory;
pub mod model_io;
pub mod mvs;
pub mod oracle;
pub mod pipeline;
pub mod recapture;

pub use geometry::{Camera, Extrinsics, GeometryError, Intrinsics, PixelCoord};
pub use image::{GrayImage, Image};
pub use recapture::{GridSpec, RecaptureSet, SubImageRef};

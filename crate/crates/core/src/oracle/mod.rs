//! Synthetic aerial scene with exact ground truth.
//!
//! A height field `z = h(x, y)` textured with an albedo map, both built from
//! seeded value noise. Views are rendered by ray casting so every valid pixel
//! carries its exact camera-frame depth.

pub mod noise;
mod render;
mod rig;

pub use render::{render_view, GroundTruthView};
pub use rig::{make_aerial_cameras, sample_sparse_points, RigSpec};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("scene extent is empty")]
    EmptyExtent,
    #[error("height amplitude must be finite and non-negative")]
    BadAmplitude,
    #[error("octave counts must be at least 1")]
    NoOctaves,
    #[error("wavelengths must be positive")]
    BadWavelength,
    #[error("invalid rig: {0}")]
    BadRig(String),
}

/// Axis-aligned ground rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Extent {
    pub fn center(&self) -> (f64, f64) {
        ((self.min_x + self.max_x) / 2.0, (self.min_y + self.max_y) / 2.0)
    }
}

fn default_height_wavelength() -> f64 {
    20.0
}
fn default_height_octaves() -> u32 {
    3
}
fn default_texture_wavelength() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub seed: u64,
    pub extent: Extent,
    pub height_amplitude: f64,
    /// Octaves of the albedo texture.
    pub texture_octaves: u32,
    #[serde(default = "default_texture_wavelength")]
    pub texture_wavelength: f64,
    #[serde(default = "default_height_wavelength")]
    pub height_wavelength: f64,
    #[serde(default = "default_height_octaves")]
    pub height_octaves: u32,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            extent: Extent { min_x: 0.0, min_y: 0.0, max_x: 100.0, max_y: 100.0 },
            height_amplitude: 4.0,
            texture_octaves: 5,
            texture_wavelength: default_texture_wavelength(),
            height_wavelength: default_height_wavelength(),
            height_octaves: default_height_octaves(),
        }
    }
}

const HEIGHT_SALT: u64 = 0x4845_4947;
const ALBEDO_SALT: u64 = 0x414C_4245;

/// Light direction used for Lambertian shading (normalized at use).
const LIGHT: [f64; 3] = [0.35, 0.25, 1.0];

#[derive(Debug, Clone)]
pub struct Scene {
    spec: SceneSpec,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SceneError> {
    let e = &spec.extent;
    if !(e.max_x > e.min_x && e.max_y > e.min_y) {
        return Err(SceneError::EmptyExtent);
    }
    if !(spec.height_amplitude.is_finite() && spec.height_amplitude >= 0.0) {
        return Err(SceneError::BadAmplitude);
    }
    if spec.texture_octaves == 0 || spec.height_octaves == 0 {
        return Err(SceneError::NoOctaves);
    }
    if !(spec.texture_wavelength > 0.0 && spec.height_wavelength > 0.0) {
        return Err(SceneError::BadWavelength);
    }
    Ok(Scene { spec: spec.clone() })
}

impl Scene {
    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    #[inline]
    pub fn height(&self, x: f64, y: f64) -> f64 {
        if self.spec.height_amplitude == 0.0 {
            return 0.0;
        }
        self.spec.height_amplitude
            * noise::fbm(self.spec.seed, HEIGHT_SALT, x, y, self.spec.height_wavelength, self.spec.height_octaves)
    }

    /// Albedo in `[0.05, 0.95]`.
    pub fn albedo(&self, x: f64, y: f64) -> f64 {
        let n = noise::fbm(self.spec.seed, ALBEDO_SALT, x, y, self.spec.texture_wavelength, self.spec.texture_octaves);
        0.5 + 0.45 * n
    }

    pub fn normal(&self, x: f64, y: f64) -> Vector3<f64> {
        let h = 1e-4 * self.min_height_wavelength();
        let dx = (self.height(x + h, y) - self.height(x - h, y)) / (2.0 * h);
        let dy = (self.height(x, y + h) - self.height(x, y - h)) / (2.0 * h);
        Vector3::new(-dx, -dy, 1.0).normalize()
    }

    pub fn min_height_wavelength(&self) -> f64 {
        self.spec.height_wavelength / 2f64.powi(self.spec.height_octaves as i32 - 1)
    }

    /// Distance from `p` to the surface, approximated to first order along the local normal.
    pub fn surface_distance(&self, p: &Vector3<f64>) -> f64 {
        let dz = p.z - self.height(p.x, p.y);
        dz.abs() * self.normal(p.x, p.y).z
    }

    /// Linear RGB radiance at a surface point.
    pub fn shade(&self, x: f64, y: f64) -> [f64; 3] {
        let light = Vector3::from(LIGHT).normalize();
        let lambert = self.normal(x, y).dot(&light).max(0.0);
        let s = self.albedo(x, y) * (0.25 + 0.75 * lambert);
        [s, s * 0.92 + 0.02, s * 0.8 + 0.05]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_when_amplitude_zero() {
        let scene = generate_scene(&SceneSpec { height_amplitude: 0.0, ..Default::default() }).unwrap();
        for k in 0..100 {
            assert_eq!(scene.height(k as f64 * 0.7, k as f64 * -1.3), 0.0);
        }
    }

    #[test]
    fn deterministic_heights() {
        let a = generate_scene(&SceneSpec::default()).unwrap();
        let b = generate_scene(&SceneSpec::default()).unwrap();
        for k in 0..500 {
            let (x, y) = (k as f64 * 0.37, k as f64 * 0.11);
            assert_eq!(a.height(x, y).to_bits(), b.height(x, y).to_bits());
        }
    }

    #[test]
    fn seeds_change_the_terrain() {
        let a = generate_scene(&SceneSpec { seed: 1, ..Default::default() }).unwrap();
        let b = generate_scene(&SceneSpec { seed: 2, ..Default::default() }).unwrap();
        let mut differ = 0;
        let n = 10_000;
        for k in 0..n {
            let x = noise::unit_f64(noise::mix64(k)) * 100.0;
            let y = noise::unit_f64(noise::mix64(k + 7_777_777)) * 100.0;
            if (a.height(x, y) - b.height(x, y)).abs() > 1e-9 {
                differ += 1;
            }
        }
        assert!(differ * 2 > n, "only {differ} of {n} samples differ");
    }

    #[test]
    fn rejects_bad_specs() {
        let bad_extent = Extent { min_x: 1.0, min_y: 0.0, max_x: 1.0, max_y: 5.0 };
        assert_eq!(generate_scene(&SceneSpec { extent: bad_extent, ..Default::default() }).unwrap_err(), SceneError::EmptyExtent);
        assert_eq!(generate_scene(&SceneSpec { height_amplitude: -1.0, ..Default::default() }).unwrap_err(), SceneError::BadAmplitude);
        assert_eq!(generate_scene(&SceneSpec { texture_octaves: 0, ..Default::default() }).unwrap_err(), SceneError::NoOctaves);
    }

    #[test]
    fn heights_within_amplitude() {
        let scene = generate_scene(&SceneSpec::default()).unwrap();
        for k in 0..1000 {
            let h = scene.height(k as f64 * 0.093, 50.0 - k as f64 * 0.041);
            assert!(h.abs() <= 4.0);
        }
    }
}

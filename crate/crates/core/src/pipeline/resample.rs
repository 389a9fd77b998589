use crate::geometry::Camera;
use crate::image::Image;

/// Output size for shrinking `(width, height)` so the longer side is at
/// most `max_size`. Never enlarges.
pub fn downsampled_size(width: u32, height: u32, max_size: u32) -> (u32, u32) {
    let longest = width.max(height);
    if longest <= max_size {
        return (width, height);
    }
    let s = max_size as f64 / longest as f64;
    let scale = |v: u32| ((v as f64 * s).round() as u32).clamp(1, max_size);
    (scale(width), scale(height))
}

/// Camera of an image resampled to `(width, height)`. Focal lengths and the
/// principal point scale per axis; radial coefficients act on normalized
/// coordinates and stay as they are.
pub fn scale_camera(camera: &Camera, width: u32, height: u32) -> Camera {
    let sx = width as f64 / camera.width as f64;
    let sy = height as f64 / camera.height as f64;
    let mut c = *camera;
    c.intrinsics.fx *= sx;
    c.intrinsics.fy *= sy;
    c.intrinsics.cx *= sx;
    c.intrinsics.cy *= sy;
    c.width = width;
    c.height = height;
    c
}

/// Per output sample: first input index and the weights of the inputs it covers.
fn area_weights(src: u32, dst: u32) -> Vec<(usize, Vec<f64>)> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let a = o as f64 * ratio;
            let b = (o + 1) as f64 * ratio;
            let first = a.floor() as usize;
            let last = ((b.ceil() as usize).min(src as usize)).max(first + 1);
            let weights = (first..last)
                .map(|i| {
                    let lo = a.max(i as f64);
                    let hi = b.min((i + 1) as f64);
                    (hi - lo).max(0.0) / ratio
                })
                .collect();
            (first, weights)
        })
        .collect()
}

/// Area-averaging resample, separable, rounding to the nearest 8-bit value.
pub fn resample_area(image: &Image, width: u32, height: u32) -> Image {
    let (sw, sh, ch) = (image.width() as usize, image.height() as usize, image.channels() as usize);
    if (width as usize, height as usize) == (sw, sh) {
        return image.clone();
    }
    let wx = area_weights(sw as u32, width);
    let wy = area_weights(sh as u32, height);
    let src = image.data();
    let mut horiz = vec![0.0f64; width as usize * sh * ch];
    for y in 0..sh {
        for (ox, (first, ws)) in wx.iter().enumerate() {
            for c in 0..ch {
                let mut acc = 0.0;
                for (k, w) in ws.iter().enumerate() {
                    acc += w * src[(y * sw + first + k) * ch + c] as f64;
                }
                horiz[(y * width as usize + ox) * ch + c] = acc;
            }
        }
    }
    let mut out = Image::new(width, height, image.channels());
    let data = out.data_mut();
    for (oy, (first, ws)) in wy.iter().enumerate() {
        for ox in 0..width as usize {
            for c in 0..ch {
                let mut acc = 0.0;
                for (k, w) in ws.iter().enumerate() {
                    acc += w * horiz[((first + k) * width as usize + ox) * ch + c];
                }
                data[(oy * width as usize + ox) * ch + c] = acc.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Extrinsics, Intrinsics};
    use nalgebra::Vector3;

    #[test]
    fn longest_side_is_capped() {
        assert_eq!(downsampled_size(4000, 3000, 2304), (2304, 1728));
        assert_eq!(downsampled_size(3000, 4000, 2304), (1728, 2304));
        assert_eq!(downsampled_size(1280, 960, 640), (640, 480));
        assert_eq!(downsampled_size(100, 50, 2304), (100, 50));
    }

    #[test]
    fn camera_scales_with_image() {
        let intr = Intrinsics::new(3000.0, 3000.0, 2000.0, 1500.0, 0.01, -0.002).unwrap();
        let cam = Camera::new(intr, Extrinsics::identity(), 4000, 3000).unwrap();
        let small = scale_camera(&cam, 2304, 1728);
        assert!((small.intrinsics.fx - 1728.0).abs() < 1e-9);
        assert_eq!(small.intrinsics.k1, 0.01);
        // A point's pixel scales with the image.
        let p = Vector3::new(0.3, -0.2, 2.0);
        let a = cam.project(&p).unwrap();
        let b = small.project(&p).unwrap();
        assert!((b.u - a.u * 0.576).abs() < 1e-9 && (b.v - a.v * 0.576).abs() < 1e-9);
    }

    #[test]
    fn area_average_of_blocks() {
        let data: Vec<u8> = (0..16).map(|i| (i * 10) as u8).collect();
        let img = Image::from_raw(4, 4, 1, data).unwrap();
        let half = resample_area(&img, 2, 2);
        // Top-left block holds 0, 10, 40, 50.
        assert_eq!(half.data(), &[25, 45, 105, 125]);
        let flat = Image::from_raw(5, 3, 3, vec![77; 45]).unwrap();
        assert!(resample_area(&flat, 3, 2).data().iter().all(|&v| v == 77));
    }
}

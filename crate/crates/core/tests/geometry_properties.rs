mod common;

use common::{camera, point_in_front};
use proptest::prelude::*;
use sir_core::geometry::PixelCoord;
use sir_core::image::Image;
use sir_core::recapture::{assemble_tiles, map_sub_to_native, recapture_grid, recapture_region, split_image, GridSpec};

fn grid() -> impl Strategy<Value = GridSpec> {
    (1u32..=8, 1u32..=8).prop_map(|(c, r)| GridSpec::new(c, r).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn unproject_inverts_project(cam in camera(true), x in -0.4f64..0.4, y in -0.4f64..0.4, depth in 0.5f64..50.0) {
        let p = point_in_front(&cam, x, y, depth);
        let (pixel, d) = cam.project_with_depth(&p).unwrap();
        let back = cam.unproject(pixel, d).unwrap();
        prop_assert!((back - p).norm() < 1e-8, "error {}", (back - p).norm());
    }

    #[test]
    fn principal_point_shift_moves_projection(cam in camera(true), x in -0.6f64..0.6, y in -0.6f64..0.6, depth in 0.5f64..50.0, dx in -5000i32..5000, dy in -5000i32..5000) {
        let p = point_in_front(&cam, x, y, depth);
        let mut shifted = cam;
        shifted.intrinsics.cx += dx as f64;
        shifted.intrinsics.cy += dy as f64;
        let a = cam.project(&p).unwrap();
        let b = shifted.project(&p).unwrap();
        prop_assert!((b.u - a.u - dx as f64).abs() < 1e-9);
        prop_assert!((b.v - a.v - dy as f64).abs() < 1e-9);
    }

    #[test]
    fn sub_image_projection_matches_native(cam in camera(true), grid in grid(), x in -0.8f64..0.8, y in -0.8f64..0.8, depth in 0.5f64..200.0) {
        prop_assume!(cam.width >= grid.cols && cam.height >= grid.rows);
        let p = point_in_front(&cam, x, y, depth);
        let native = cam.project(&p).unwrap();
        let set = recapture_grid(&cam, "v", grid).unwrap();
        for (r, sub) in set.iter() {
            prop_assert!(sub.extrinsics.bitwise_eq(&cam.extrinsics));
            let back = map_sub_to_native(r, sub.project(&p).unwrap());
            prop_assert!((back.u - native.u).abs() < 1e-9 && (back.v - native.v).abs() < 1e-9);
            let (_, region) = recapture_region(&cam, "v", (r.origin_x, r.origin_y), (r.width, r.height)).unwrap();
            prop_assert_eq!(region, *sub);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_tiles_partition_and_reassemble(w in 1u32..96, h in 1u32..96, cols in 1u32..6, rows in 1u32..6, channels in prop::sample::select(vec![1u8, 3]), seed in any::<u64>()) {
        prop_assume!(w >= cols && h >= rows);
        let mut state = seed;
        let data: Vec<u8> = (0..w as usize * h as usize * channels as usize)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 56) as u8
            })
            .collect();
        let image = Image::from_raw(w, h, channels, data).unwrap();
        let tiles = split_image(&image, "v", GridSpec::new(cols, rows).unwrap()).unwrap();
        let pixels: u64 = tiles.iter().map(|(r, _)| r.width as u64 * r.height as u64).sum();
        prop_assert_eq!(pixels, w as u64 * h as u64);
        // Every tile except the last column and row fits the ceil bound; those absorb the remainder.
        let bound = (w.div_ceil(cols) * h.div_ceil(rows)) as usize * channels as usize;
        for (r, t) in &tiles {
            let (i, j) = r.index.unwrap();
            if i + 1 < cols && j + 1 < rows {
                prop_assert!(t.byte_len() <= bound);
            }
            if i + 1 == cols {
                prop_assert_eq!(r.width, w / cols + w % cols);
            }
            if j + 1 == rows {
                prop_assert_eq!(r.height, h / rows + h % rows);
            }
        }
        prop_assert_eq!(assemble_tiles(w, h, &tiles).unwrap(), image);
    }
}

#[test]
fn divisible_tiles_hold_an_exact_share() {
    let image = Image::new(120, 90, 3);
    let tiles = split_image(&image, "v", GridSpec::new(4, 3).unwrap()).unwrap();
    assert!(tiles.iter().all(|(_, t)| t.byte_len() * 12 == image.byte_len()));
}

#[test]
fn pixel_center_convention() {
    assert_eq!(PixelCoord::center_of(0, 0), PixelCoord::new(0.5, 0.5));
}

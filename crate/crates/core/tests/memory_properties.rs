use proptest::prelude::*;
use sir_core::memory::{estimate_peak, image_bytes, ImageDims};
use sir_core::recapture::GridSpec;

fn peak(w: u64, h: u64, c: u64, b: u64, cols: u32, rows: u32, sources: u64, n: u64) -> u64 {
    let dims = ImageDims { width: w, height: h, channels: c, bytes_per_sample: b };
    estimate_peak(dims, GridSpec::new(cols, rows).unwrap(), sources, n).unwrap().peak_bytes
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn peak_is_monotone(w in 1u64..20_000, h in 1u64..20_000, c in 1u64..5, b in 1u64..9, cols in 1u32..12, rows in 1u32..12, s in 0u64..40, n in 1u64..512) {
        let base = peak(w, h, c, b, cols, rows, s, n);
        prop_assert!(peak(w + 1, h, c, b, cols, rows, s, n) >= base);
        prop_assert!(peak(w, h + 1, c, b, cols, rows, s, n) >= base);
        prop_assert!(peak(w, h, c + 1, b, cols, rows, s, n) >= base);
        prop_assert!(peak(w, h, c, b + 1, cols, rows, s, n) >= base);
        prop_assert!(peak(w, h, c, b, cols, rows, s + 1, n) >= base);
        prop_assert!(peak(w, h, c, b, cols, rows, s, n + 1) >= base);
        prop_assert!(peak(w, h, c, b, cols + 1, rows, s, n) <= base);
        prop_assert!(peak(w, h, c, b, cols, rows + 1, s, n) <= base);
    }

    #[test]
    fn divisible_grids_divide_the_image_term(tw in 1u64..2000, th in 1u64..2000, cols in 1u32..10, rows in 1u32..10, s in 0u64..30) {
        let dims = ImageDims::rgb_f32(tw * cols as u64, th * rows as u64);
        let one = estimate_peak(dims, GridSpec::single(), s, 128).unwrap();
        let many = estimate_peak(dims, GridSpec::new(cols, rows).unwrap(), s, 128).unwrap();
        prop_assert_eq!(many.image_buffer_bytes * (cols as u64 * rows as u64), one.image_buffer_bytes);
        prop_assert_eq!(many.tile_bytes, image_bytes(tw, th, 3, 4).unwrap());
    }
}

#[test]
fn overflow_is_reported() {
    assert!(image_bytes(u64::MAX, 2, 1, 1).is_err());
    let dims = ImageDims::rgb_f32(u64::MAX / 4, 4);
    assert!(estimate_peak(dims, GridSpec::single(), 3, 128).is_err());
}

//! Seeded value noise built on a fixed 64-bit integer mix, so fixtures are
//! reproducible on every platform and from any language.

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn hash2(seed: u64, salt: u64, ix: i64, iy: i64) -> u64 {
    let a = mix64(seed ^ salt.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    let b = mix64(a ^ (ix as u64).wrapping_mul(0xA076_1D64_78BD_642F));
    mix64(b ^ (iy as u64).wrapping_mul(0xE703_7ED1_A0B4_28DB))
}

/// Uniform value in `[0, 1)` from the top 53 bits of a hash.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn lattice(seed: u64, salt: u64, ix: i64, iy: i64) -> f64 {
    unit_f64(hash2(seed, salt, ix, iy)) * 2.0 - 1.0
}

#[inline]
fn quintic(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Smoothly interpolated lattice noise in `[-1, 1]` with unit lattice spacing.
pub fn value_noise(seed: u64, salt: u64, x: f64, y: f64) -> f64 {
    let fx = x.floor();
    let fy = y.floor();
    let (ix, iy) = (fx as i64, fy as i64);
    let (sx, sy) = (quintic(x - fx), quintic(y - fy));
    let v00 = lattice(seed, salt, ix, iy);
    let v10 = lattice(seed, salt, ix + 1, iy);
    let v01 = lattice(seed, salt, ix, iy + 1);
    let v11 = lattice(seed, salt, ix + 1, iy + 1);
    let a = v00 + (v10 - v00) * sx;
    let b = v01 + (v11 - v01) * sx;
    a + (b - a) * sy
}

/// Fractal sum of `octaves` noise layers starting at `wavelength`, each layer
/// half the wavelength and half the amplitude of the previous. Normalized to `[-1, 1]`.
pub fn fbm(seed: u64, salt: u64, x: f64, y: f64, wavelength: f64, octaves: u32) -> f64 {
    let mut sum = 0.0;
    let mut norm = 0.0;
    let mut amp = 1.0;
    let mut freq = 1.0 / wavelength;
    for o in 0..octaves {
        sum += amp * value_noise(seed, salt.wrapping_add(o as u64), x * freq, y * freq);
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    if norm > 0.0 {
        sum / norm
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_bounded_and_continuous_at_lattice() {
        for k in 0..200 {
            let x = k as f64 * 0.173 - 17.0;
            let y = k as f64 * -0.311 + 4.0;
            let v = value_noise(9, 1, x, y);
            assert!((-1.0..=1.0).contains(&v));
        }
        // Lattice points reproduce the hashed value exactly.
        assert_eq!(value_noise(3, 2, 5.0, -7.0), lattice(3, 2, 5, -7));
        let a = value_noise(3, 2, 5.0 - 1e-12, 1.5);
        let b = value_noise(3, 2, 5.0, 1.5);
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn hash_is_fixed() {
        // Guards against accidental changes to the fixture generator.
        assert_eq!(mix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(hash2(1, 2, 3, 4), hash2(1, 2, 3, 4));
        assert_ne!(hash2(1, 2, 3, 4), hash2(1, 2, 4, 3));
    }
}

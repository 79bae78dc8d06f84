//! Small deterministic mixing helpers: stateless hash-to-uniform used for
//! reproducible start vectors and jitter draws. SplitMix64 finalizer.

/// Mix a 64-bit value through the SplitMix64 finalizer.
pub(crate) fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Uniform draw in [0, 1) keyed by an arbitrary tuple of integers.
pub(crate) fn unit_from(parts: &[u64]) -> f64 {
    let mut h = 0x243f6a8885a308d3_u64; // arbitrary nonzero start
    for &p in parts {
        h = mix64(h ^ p);
    }
    (h >> 11) as f64 / (1u64 << 53) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        for a in 0..50_u64 {
            for b in 0..4_u64 {
                let x = unit_from(&[a, b]);
                assert_eq!(x, unit_from(&[a, b]));
                assert!((0.0..1.0).contains(&x));
            }
        }
        assert_ne!(unit_from(&[1, 2]), unit_from(&[2, 1]));
    }
}

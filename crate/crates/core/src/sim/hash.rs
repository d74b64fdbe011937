//! Public pseudorandom hash shared by every node.
//!
//! Points on the unit circle are `u64` fixed-point fractions: `x` stands for
//! `x / 2^64`. Halving a label is then an exact shift.

/// Domain tags keep the different uses of the hash independent.
pub mod tag {
    pub const LABEL: u8 = 1;
    pub const SKEAP_POS: u8 = 2;
    pub const PLUS_STORE: u8 = 3;
    pub const PLUS_POS: u8 = 4;
    pub const KSEL_POS: u8 = 5;
    pub const KSEL_PAIR: u8 = 6;
    pub const KSEL_SAMPLE: u8 = 7;
    pub const WORKLOAD: u8 = 8;
    pub const PLACEMENT: u8 = 9;
    pub const DHT_TEST: u8 = 10;
}

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn hash64(tag: u8, inputs: &[u64], seed: u64) -> u64 {
    let mut h = mix64(seed ^ ((tag as u64) << 56) ^ (inputs.len() as u64));
    for &x in inputs {
        h = mix64(h ^ x);
    }
    h
}

/// Uniform point in `[0, 1)` as a fixed-point fraction.
pub fn hash_point(tag: u8, inputs: &[u64], seed: u64) -> u64 {
    hash64(tag, inputs, seed)
}

/// Uniform real in `[0, 1)` with 53 bits of precision.
pub fn hash_unit(tag: u8, inputs: &[u64], seed: u64) -> f64 {
    (hash64(tag, inputs, seed) >> 11) as f64 / (1u64 << 53) as f64
}

/// Symmetric pair hash: `(i, j)` and `(j, i)` map to the same point.
pub fn hash_point_sym(tag: u8, i: u64, j: u64, seed: u64) -> u64 {
    hash64(tag, &[i.min(j), i.max(j)], seed)
}

pub fn hash_unit_sym(tag: u8, i: u64, j: u64, seed: u64) -> f64 {
    hash_unit(tag, &[i.min(j), i.max(j)], seed)
}

pub fn point_to_f64(x: u64) -> f64 {
    x as f64 / 18_446_744_073_709_551_616.0
}

/// Nearest fixed-point fraction to `x` in `[0, 1)`.
pub fn f64_to_point(x: f64) -> u64 {
    assert!((0.0..1.0).contains(&x), "point {x} outside [0,1)");
    let v = x * 18_446_744_073_709_551_616.0;
    if v >= 18_446_744_073_709_551_615.0 {
        u64::MAX
    } else {
        v as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric() {
        assert_eq!(hash_unit_sym(6, 3, 7, 11), hash_unit_sym(6, 7, 3, 11));
        assert_eq!(hash_point_sym(6, 3, 7, 11), hash_point_sym(6, 7, 3, 11));
    }

    #[test]
    fn deterministic_and_tag_separated() {
        assert_eq!(hash64(1, &[5, 6], 9), hash64(1, &[5, 6], 9));
        assert_ne!(hash64(1, &[5, 6], 9), hash64(2, &[5, 6], 9));
        assert_ne!(hash64(1, &[5, 6], 9), hash64(1, &[6, 5], 9));
        assert_ne!(hash64(1, &[5], 9), hash64(1, &[5, 0], 9));
    }

    #[test]
    fn unit_mean() {
        let n = 100_000u64;
        let mean: f64 = (0..n).map(|i| hash_unit(3, &[i], 42)).sum::<f64>() / n as f64;
        assert!((0.49..=0.51).contains(&mean), "mean {mean}");
        assert!((0..n).all(|i| (0.0..1.0).contains(&hash_unit(3, &[i], 42))));
    }

    #[test]
    fn point_roundtrip() {
        assert_eq!(f64_to_point(0.5), 1u64 << 63);
        assert_eq!(point_to_f64(1u64 << 62), 0.25);
    }
}

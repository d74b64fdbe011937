//! Bit accounting for modeled message sizes.
//!
//! A natural `v` costs `ceil(log2(max(v,2)+1))` bits. A point on the unit
//! circle (label, key) costs `3*ceil(log2 n) + 8` bits, which is enough
//! precision to keep the `3n` labels apart w.h.p.

#[derive(Clone, Copy, Debug)]
pub struct BitSizer {
    n: usize,
    log_n: u32,
}

/// Per-message variant tag.
pub const TAG_BITS: u32 = 4;

impl BitSizer {
    pub fn new(n: usize) -> Self {
        BitSizer { n, log_n: ceil_log2(n as u64) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nat(&self, v: u64) -> u32 {
        64 - v.max(2).leading_zeros()
    }

    pub fn interval(&self, a: u64, b: u64) -> u32 {
        self.nat(a) + self.nat(b)
    }

    pub fn point(&self) -> u32 {
        3 * self.log_n + 8
    }

    /// A virtual node address: owner id plus two bits for the kind.
    pub fn vid(&self) -> u32 {
        self.nat(self.n as u64) + 2
    }

    pub fn flag(&self) -> u32 {
        1
    }
}

pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sim::BitSizer;

/// A heap element. Ordered by `(priority, origin, seq)`; `payload` is opaque
/// and never compared.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Element {
    pub priority: u64,
    pub origin: u32,
    pub seq: u64,
    pub payload: u32,
}

impl Element {
    pub fn new(priority: u64, origin: u32, seq: u64) -> Self {
        Element { priority, origin, seq, payload: 0 }
    }

    pub fn key(&self) -> (u64, u32, u64) {
        (self.priority, self.origin, self.seq)
    }

    pub fn size_bits(&self, s: &BitSizer) -> u32 {
        s.nat(self.priority) + s.nat(self.origin as u64) + s.nat(self.seq)
    }
}

impl PartialEq for Element {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Element {}

impl PartialOrd for Element {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Element {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl std::hash::Hash for Element {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e(p={}, {}#{})", self.priority, self.origin, self.seq)
    }
}

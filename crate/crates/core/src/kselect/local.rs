use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::element::Element;
use crate::sim::BitSizer;

/// An element extended with infinities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Ext {
    NegInf,
    Fin(Element),
    PosInf,
}

impl Ext {
    pub fn size_bits(&self, s: &BitSizer) -> u32 {
        2 + match self {
            Ext::Fin(e) => e.size_bits(s),
            _ => 0,
        }
    }

    pub fn cmp_elem(&self, e: &Element) -> Ordering {
        match self {
            Ext::NegInf => Ordering::Less,
            Ext::PosInf => Ordering::Greater,
            Ext::Fin(x) => x.cmp(e),
        }
    }
}

/// `floor(k/parts)`-th smallest of the sorted `c`. No lower cut when the
/// index is 0; neutral (`+inf`) when `c` is too short.
pub fn lower_stat(c: &[Element], k: u64, parts: u64) -> Ext {
    let idx = (k / parts) as usize;
    if c.is_empty() {
        Ext::PosInf
    } else if idx == 0 {
        Ext::NegInf
    } else if c.len() >= idx {
        Ext::Fin(c[idx - 1])
    } else {
        Ext::PosInf
    }
}

/// `ceil(k/parts)`-th smallest of the sorted `c`; `+inf` (no upper cut) when
/// `c` is too short and `-inf` (neutral) when empty.
pub fn upper_stat(c: &[Element], k: u64, parts: u64) -> Ext {
    let idx = k.div_ceil(parts) as usize;
    if c.is_empty() {
        Ext::NegInf
    } else if c.len() >= idx {
        Ext::Fin(c[idx - 1])
    } else {
        Ext::PosInf
    }
}

/// Global `(P_min, P_max)` for candidate sets, computed directly.
pub fn phase1_bounds(sets: &[Vec<Element>], k: u64) -> (Ext, Ext) {
    let parts = sets.iter().filter(|c| !c.is_empty()).count().max(1) as u64;
    let lo = sets.iter().map(|c| lower_stat(c, k, parts)).min().unwrap_or(Ext::PosInf);
    let hi = sets.iter().map(|c| upper_stat(c, k, parts)).max().unwrap_or(Ext::NegInf);
    (lo, hi)
}

/// Number of elements of the sorted `c` strictly below `lo` and strictly above `hi`.
pub fn prune_counts(c: &[Element], lo: Ext, hi: Ext) -> (u64, u64) {
    let below = c.partition_point(|e| lo.cmp_elem(e) == Ordering::Greater);
    let not_above = c.partition_point(|e| hi.cmp_elem(e) != Ordering::Less);
    (below as u64, (c.len() - not_above) as u64)
}

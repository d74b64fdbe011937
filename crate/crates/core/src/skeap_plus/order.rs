use std::collections::BTreeSet;

use serde::Serialize;

use crate::consistency::{OpKind, OperationRecord};
use crate::element::Element;

/// Serial order for a finished run: per epoch, inserts by serial index, then
/// deletes by returned element, then deletes that returned bottom.
pub fn constructed_order(history: &[OperationRecord]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..history.len()).collect();
    idx.sort_by_key(|&i| {
        let r = &history[i];
        let (class, elem) = match (r.kind, r.returned) {
            (OpKind::Insert(_), _) => (0, None),
            (OpKind::DeleteMin, Some(e)) => (1, Some(e)),
            (OpKind::DeleteMin, None) => (2, None),
        };
        (r.epoch, class, elem, r.serial_index)
    });
    idx
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseOutcome {
    pub epoch: u32,
    pub k_star: u64,
    pub returned: Vec<Element>,
    /// The `k*` smallest elements held after the epoch's inserts.
    pub expected: Vec<Element>,
}

impl PhaseOutcome {
    pub fn matches(&self) -> bool {
        self.returned == self.expected
    }
}

/// Replays the epochs against a sorted multiset and lists, per deletemin
/// phase, what was returned next to the `k*` smallest elements.
pub fn phase_outcomes(history: &[OperationRecord]) -> Vec<PhaseOutcome> {
    let mut heap: BTreeSet<Element> = BTreeSet::new();
    let mut out = Vec::new();
    let Some(last) = history.iter().map(|r| r.epoch).max() else {
        return out;
    };
    for epoch in 0..=last {
        let recs = history.iter().filter(|r| r.epoch == epoch);
        let mut deletes = 0u64;
        let mut returned = Vec::new();
        for r in recs {
            match r.kind {
                OpKind::Insert(e) => {
                    heap.insert(e);
                }
                OpKind::DeleteMin => {
                    deletes += 1;
                    returned.extend(r.returned);
                }
            }
        }
        let k_star = deletes.min(heap.len() as u64);
        let expected: Vec<Element> = heap.iter().take(k_star as usize).copied().collect();
        for e in &expected {
            heap.remove(e);
        }
        returned.sort();
        out.push(PhaseOutcome { epoch, k_star, returned, expected });
    }
    out
}

use std::collections::BTreeSet;

use super::record::{OpKind, OperationRecord};
use crate::element::Element;

/// Result of replaying a history in a given order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleRun {
    /// Per record index; `None` for inserts and for bottom.
    pub returns: Vec<Option<Element>>,
    /// `(insert index, delete index)` pairs.
    pub matching: Vec<(usize, usize)>,
}

/// Replays `order` against a `(priority, tiebreaker)` min-heap. The
/// `returned` fields of the input are ignored.
pub fn sequential_oracle(history: &[OperationRecord], order: &[usize]) -> OracleRun {
    let mut heap: BTreeSet<(Element, usize)> = BTreeSet::new();
    let mut run = OracleRun { returns: vec![None; history.len()], matching: Vec::new() };
    for &i in order {
        match history[i].kind {
            OpKind::Insert(e) => {
                heap.insert((e, i));
            }
            OpKind::DeleteMin => {
                if let Some((e, j)) = heap.pop_first() {
                    run.returns[i] = Some(e);
                    run.matching.push((j, i));
                }
            }
        }
    }
    run
}

/// Copies the oracle's returns into the history.
pub fn apply(history: &mut [OperationRecord], run: &OracleRun) {
    for (r, ret) in history.iter_mut().zip(&run.returns) {
        if !r.is_insert() {
            r.returned = *ret;
        }
    }
}

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use super::record::{OpKind, OperationRecord};
use crate::element::Element;
use crate::sim::NodeId;

/// Which element a delete may legally return.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TieRule {
    /// Exactly the `(priority, tiebreaker)` minimum.
    Strict,
    /// Any element of minimal priority.
    PriorityOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HeapProperty {
    InsertBeforeDelete,
    NoSpuriousBottom,
    MinimalPriority,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    /// Replay disagrees at `record` (an index into the history).
    Replay { record: usize, expected: Option<Element>, got: Option<Element> },
    DuplicateElement { record: usize },
    UnknownElement { record: usize },
    OrderNotPermutation,
    Local { node: NodeId, earlier_seq: u64, later_seq: u64 },
    Heap { property: HeapProperty, insert: usize, delete: usize, witness: Option<usize> },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub serializable: bool,
    pub locally_consistent: bool,
    pub heap_consistent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<Violation>,
}

fn positions(n: usize, order: &[usize]) -> Option<Vec<usize>> {
    if order.len() != n {
        return None;
    }
    let mut pos = vec![usize::MAX; n];
    for (k, &i) in order.iter().enumerate() {
        if i >= n || pos[i] != usize::MAX {
            return None;
        }
        pos[i] = k;
    }
    Some(pos)
}

/// Replays `order` and compares each delete's recorded return with what a
/// sequential heap allows under `rule`.
pub fn check_serializable(history: &[OperationRecord], order: &[usize], rule: TieRule) -> Result<(), Violation> {
    if positions(history.len(), order).is_none() {
        return Err(Violation::OrderNotPermutation);
    }
    let mut live: BTreeSet<Element> = BTreeSet::new();
    let mut inserted: BTreeSet<Element> = BTreeSet::new();
    for &i in order {
        let r = &history[i];
        match r.kind {
            OpKind::Insert(e) => {
                if !inserted.insert(e) {
                    return Err(Violation::DuplicateElement { record: i });
                }
                live.insert(e);
            }
            OpKind::DeleteMin => {
                let min = live.first().copied();
                let ok = match (min, r.returned) {
                    (None, None) => true,
                    (Some(_), None) | (None, Some(_)) => false,
                    (Some(m), Some(g)) => match rule {
                        TieRule::Strict => m == g,
                        TieRule::PriorityOnly => g.priority == m.priority && live.contains(&g),
                    },
                };
                if !ok {
                    return Err(Violation::Replay { record: i, expected: min, got: r.returned });
                }
                if let Some(g) = r.returned {
                    live.remove(&g);
                }
            }
        }
    }
    Ok(())
}

/// Per node, positions in `order` must increase with `seq`.
pub fn check_local_consistency(history: &[OperationRecord], order: &[usize]) -> Result<(), Violation> {
    if positions(history.len(), order).is_none() {
        return Err(Violation::OrderNotPermutation);
    }
    let mut last: HashMap<NodeId, u64> = HashMap::new();
    for &i in order {
        let r = &history[i];
        if let Some(&prev) = last.get(&r.node) {
            if prev >= r.seq {
                return Err(Violation::Local { node: r.node, earlier_seq: prev, later_seq: r.seq });
            }
        }
        last.insert(r.node, r.seq);
    }
    Ok(())
}

/// Pairs each delete with the insert of the element it returned.
pub fn matching_from_history(history: &[OperationRecord]) -> Result<Vec<(usize, usize)>, Violation> {
    let mut by_elem: HashMap<Element, usize> = HashMap::new();
    for (i, r) in history.iter().enumerate() {
        if let OpKind::Insert(e) = r.kind {
            if by_elem.insert(e, i).is_some() {
                return Err(Violation::DuplicateElement { record: i });
            }
        }
    }
    let mut used = vec![false; history.len()];
    let mut m = Vec::new();
    for (i, r) in history.iter().enumerate() {
        if let (OpKind::DeleteMin, Some(e)) = (r.kind, r.returned) {
            let Some(&j) = by_elem.get(&e) else {
                return Err(Violation::UnknownElement { record: i });
            };
            if std::mem::replace(&mut used[j], true) {
                return Err(Violation::DuplicateElement { record: i });
            }
            m.push((j, i));
        }
    }
    Ok(m)
}

/// The three matching properties, checked literally. Reports the violation
/// whose delete comes earliest in `order`.
pub fn check_heap_consistency(
    history: &[OperationRecord],
    order: &[usize],
    matching: &[(usize, usize)],
) -> Result<(), Violation> {
    let Some(pos) = positions(history.len(), order) else {
        return Err(Violation::OrderNotPermutation);
    };
    let mut matched = vec![false; history.len()];
    for &(a, b) in matching {
        matched[a] = true;
        matched[b] = true;
    }
    // prefix[k]: unmatched deletes among order[..k]
    let mut prefix = vec![0usize; order.len() + 1];
    // first_unmatched_del_after[k]: witness lookup for property 2
    let mut unmatched_dels = Vec::new();
    // best unmatched insert (lowest priority) among order[..k]
    let mut min_ins: Vec<Option<usize>> = vec![None; order.len() + 1];
    for (k, &i) in order.iter().enumerate() {
        let r = &history[i];
        let um_del = !r.is_insert() && !matched[i];
        prefix[k + 1] = prefix[k] + usize::from(um_del);
        if um_del {
            unmatched_dels.push(k);
        }
        min_ins[k + 1] = min_ins[k];
        if let (OpKind::Insert(e), false) = (r.kind, matched[i]) {
            let better = min_ins[k].is_none_or(|j| e.priority < history[j].element().unwrap().priority);
            if better {
                min_ins[k + 1] = Some(i);
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = matching.to_vec();
    pairs.sort_by_key(|&(_, d)| pos[d]);
    for (ins, del) in pairs {
        let (pi, pd) = (pos[ins], pos[del]);
        if pi > pd {
            return Err(Violation::Heap { property: HeapProperty::InsertBeforeDelete, insert: ins, delete: del, witness: None });
        }
        if prefix[pd] > prefix[pi + 1] {
            let k = unmatched_dels[unmatched_dels.partition_point(|&k| k <= pi)];
            return Err(Violation::Heap {
                property: HeapProperty::NoSpuriousBottom,
                insert: ins,
                delete: del,
                witness: Some(order[k]),
            });
        }
        let p = history[ins].element().map(|e| e.priority).unwrap_or(0);
        if let Some(w) = min_ins[pd] {
            if history[w].element().unwrap().priority < p {
                return Err(Violation::Heap { property: HeapProperty::MinimalPriority, insert: ins, delete: del, witness: Some(w) });
            }
        }
    }
    Ok(())
}

/// Runs every check and folds the results into a [`Verdict`].
pub fn verdict(history: &[OperationRecord], order: &[usize], rule: TieRule) -> Verdict {
    let ser = check_serializable(history, order, rule);
    let local = check_local_consistency(history, order);
    let heap = matching_from_history(history).and_then(|m| check_heap_consistency(history, order, &m));
    Verdict {
        serializable: ser.is_ok(),
        locally_consistent: local.is_ok(),
        heap_consistent: heap.is_ok(),
        violation: ser.err().or(heap.err()).or(local.err()),
    }
}

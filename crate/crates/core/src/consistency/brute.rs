use std::collections::{BTreeSet, HashSet};

use super::checks::{check_local_consistency, check_serializable, matching_from_history, check_heap_consistency, TieRule};
use super::record::{OpKind, OperationRecord};
use crate::element::Element;

/// Depth-first search for an order under which every check passes. The
/// heap contents depend only on the set of records already placed, so
/// failed sets are memoized.
pub fn brute_force_order(history: &[OperationRecord], rule: TieRule, require_local: bool) -> Option<Vec<usize>> {
    assert!(history.len() <= 24, "brute force is for tiny histories");
    let matching = matching_from_history(history).ok()?;
    let mut s = Search { h: history, rule, local: require_local, dead: HashSet::new(), live: BTreeSet::new(), order: Vec::new() };
    if !s.go(0) {
        return None;
    }
    let order = s.order;
    let ok = check_serializable(history, &order, rule).is_ok()
        && check_heap_consistency(history, &order, &matching).is_ok()
        && (!require_local || check_local_consistency(history, &order).is_ok());
    ok.then_some(order)
}

struct Search<'a> {
    h: &'a [OperationRecord],
    rule: TieRule,
    local: bool,
    dead: HashSet<u32>,
    live: BTreeSet<Element>,
    order: Vec<usize>,
}

impl Search<'_> {
    fn go(&mut self, used: u32) -> bool {
        if self.order.len() == self.h.len() {
            return true;
        }
        if self.dead.contains(&used) {
            return false;
        }
        for i in 0..self.h.len() {
            if used & (1 << i) != 0 || !self.ready(used, i) {
                continue;
            }
            let r = &self.h[i];
            match r.kind {
                OpKind::Insert(e) => {
                    self.live.insert(e);
                    self.order.push(i);
                    if self.go(used | 1 << i) {
                        return true;
                    }
                    self.order.pop();
                    self.live.remove(&e);
                }
                OpKind::DeleteMin => {
                    let min = self.live.first().copied();
                    let ok = match (min, r.returned) {
                        (None, None) => true,
                        (Some(m), Some(g)) => match self.rule {
                            TieRule::Strict => m == g,
                            TieRule::PriorityOnly => m.priority == g.priority && self.live.contains(&g),
                        },
                        _ => false,
                    };
                    if !ok {
                        continue;
                    }
                    if let Some(g) = r.returned {
                        self.live.remove(&g);
                    }
                    self.order.push(i);
                    if self.go(used | 1 << i) {
                        return true;
                    }
                    self.order.pop();
                    if let Some(g) = r.returned {
                        self.live.insert(g);
                    }
                }
            }
        }
        self.dead.insert(used);
        false
    }

    fn ready(&self, used: u32, i: usize) -> bool {
        if !self.local {
            return true;
        }
        let r = &self.h[i];
        self.h
            .iter()
            .enumerate()
            .all(|(j, o)| j == i || o.node != r.node || o.seq > r.seq || used & (1 << j) != 0)
    }
}

/// Enumerates every permutation and asks [`check_serializable`]. Exponential;
/// an independent reference for the search above.
pub fn exists_serial_order_naive(history: &[OperationRecord], rule: TieRule, require_local: bool) -> bool {
    let n = history.len();
    assert!(n <= 9, "naive enumeration is for tiny histories");
    let mut perm: Vec<usize> = (0..n).collect();
    let accept = |p: &[usize]| {
        check_serializable(history, p, rule).is_ok()
            && (!require_local || check_local_consistency(history, p).is_ok())
    };
    if accept(&perm) {
        return true;
    }
    // Heap's algorithm, iterative.
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            if accept(&perm) {
                return true;
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    false
}

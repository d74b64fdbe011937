//! Batches, the anchor's interval assignment and its decomposition.
//!
//! Priorities are `1..=P`; vectors are indexed by `priority - 1`.
//! Intervals are inclusive `(first, last)` pairs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sim::BitSizer;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub ins: Vec<u64>,
    pub del: u64,
}

impl Entry {
    pub fn zero(p: usize) -> Self {
        Entry { ins: vec![0; p], del: 0 }
    }

    pub fn inserts(&self) -> u64 {
        self.ins.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.del == 0 && self.ins.iter().all(|&x| x == 0)
    }
}

/// `(i_1, d_1, ..., i_k, d_k)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub priorities: usize,
    pub entries: Vec<Entry>,
}

/// What a snapshot sees of one buffered request.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReqKind {
    Insert(u64),
    Delete,
}

impl Batch {
    pub fn empty(priorities: usize) -> Self {
        Batch { priorities, entries: Vec::new() }
    }

    /// Encodes requests in issue order; an insert after a delete opens a new entry.
    pub fn snapshot(priorities: usize, reqs: impl IntoIterator<Item = ReqKind>) -> Self {
        let mut b = Batch::empty(priorities);
        for r in reqs {
            match r {
                ReqKind::Insert(p) => {
                    assert!((1..=priorities as u64).contains(&p), "priority {p} out of range");
                    if b.entries.last().is_none_or(|e| e.del > 0) {
                        b.entries.push(Entry::zero(priorities));
                    }
                    b.entries.last_mut().unwrap().ins[p as usize - 1] += 1;
                }
                ReqKind::Delete => {
                    if b.entries.is_empty() {
                        b.entries.push(Entry::zero(priorities));
                    }
                    b.entries.last_mut().unwrap().del += 1;
                }
            }
        }
        b
    }

    pub fn from_entries(priorities: usize, entries: &[(&[u64], u64)]) -> Self {
        Batch {
            priorities,
            entries: entries
                .iter()
                .map(|(i, d)| {
                    assert_eq!(i.len(), priorities);
                    Entry { ins: i.to_vec(), del: *d }
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn requests(&self) -> u64 {
        self.entries.iter().map(|e| e.inserts() + e.del).sum()
    }

    /// Entrywise sum after padding the shorter batch with zeros.
    pub fn combine(&self, other: &Batch) -> Batch {
        assert_eq!(self.priorities, other.priorities);
        let len = self.len().max(other.len());
        let zero = Entry::zero(self.priorities);
        let entries = (0..len)
            .map(|j| {
                let a = self.entries.get(j).unwrap_or(&zero);
                let b = other.entries.get(j).unwrap_or(&zero);
                Entry {
                    ins: a.ins.iter().zip(&b.ins).map(|(x, y)| x + y).collect(),
                    del: a.del + b.del,
                }
            })
            .collect();
        Batch { priorities: self.priorities, entries }
    }

    pub fn combine_all<'a>(priorities: usize, parts: impl IntoIterator<Item = &'a Batch>) -> Batch {
        parts.into_iter().fold(Batch::empty(priorities), |acc, b| acc.combine(b))
    }

    fn entry(&self, j: usize) -> Option<&Entry> {
        self.entries.get(j)
    }

    pub fn size_bits(&self, s: &BitSizer) -> u32 {
        s.nat(self.entries.len() as u64)
            + self
                .entries
                .iter()
                .map(|e| e.ins.iter().map(|&x| s.nat(x)).sum::<u32>() + s.nat(e.del))
                .sum::<u32>()
    }
}

impl fmt::Display for Batch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|e| {
                let v: Vec<String> = e.ins.iter().map(u64::to_string).collect();
                format!("({}),{}", v.join(","), e.del)
            })
            .collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Anchor bookkeeping: `[first_p, last_p]` are the occupied positions of
/// priority `p`; `count` is the next serial index to hand out.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorState {
    pub first: Vec<u64>,
    pub last: Vec<u64>,
    pub count: u64,
}

impl AnchorState {
    pub fn new(priorities: usize) -> Self {
        AnchorState { first: vec![1; priorities], last: vec![0; priorities], count: 1 }
    }

    pub fn size(&self, p: usize) -> u64 {
        self.last[p] + 1 - self.first[p]
    }

    pub fn total(&self) -> u64 {
        (0..self.first.len()).map(|p| self.size(p)).sum()
    }

    pub fn invariant_holds(&self) -> bool {
        self.first.iter().zip(&self.last).all(|(f, l)| *f <= l + 1)
    }
}

type Interval = Option<(u64, u64)>;

fn card(i: Interval) -> u64 {
    i.map_or(0, |(a, b)| b + 1 - a)
}

/// Intervals for one batch entry, plus the serial bases of its insert and
/// delete runs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryAssignment {
    pub ins: Vec<Interval>,
    pub del: Vec<Interval>,
    pub bottom: u64,
    pub ins_serial: u64,
    pub del_serial: u64,
}

impl EntryAssignment {
    pub fn empty(p: usize) -> Self {
        EntryAssignment { ins: vec![None; p], del: vec![None; p], bottom: 0, ins_serial: 0, del_serial: 0 }
    }

    pub fn inserts(&self) -> u64 {
        self.ins.iter().map(|&i| card(i)).sum()
    }

    pub fn matched(&self) -> u64 {
        self.del.iter().map(|&i| card(i)).sum()
    }

    pub fn deletes(&self) -> u64 {
        self.matched() + self.bottom
    }

    /// Matched delete positions in consumption order.
    pub fn del_positions(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.del
            .iter()
            .enumerate()
            .flat_map(|(p, i)| i.iter().flat_map(move |&(a, b)| (a..=b).map(move |x| (p as u64 + 1, x))))
    }

    pub fn size_bits(&self, s: &BitSizer) -> u32 {
        let iv = |i: &Interval| i.map_or(s.flag(), |(a, b)| s.flag() + s.interval(a, b));
        self.ins.iter().map(iv).sum::<u32>()
            + self.del.iter().map(iv).sum::<u32>()
            + s.nat(self.bottom)
            + s.nat(self.ins_serial)
            + s.nat(self.del_serial)
    }
}

pub type Assignment = Vec<EntryAssignment>;

pub fn assignment_bits(a: &Assignment, s: &BitSizer) -> u32 {
    s.nat(a.len() as u64) + a.iter().map(|e| e.size_bits(s)).sum::<u32>()
}

/// Compact rendering `((I_1..),(D_1..))` per entry, `∅` for empty.
pub fn format_assignment(a: &Assignment) -> String {
    let iv = |i: &Interval| match i {
        Some((a, b)) => format!("[{a},{b}]"),
        None => "∅".to_string(),
    };
    let parts: Vec<String> = a
        .iter()
        .map(|e| {
            let i: Vec<String> = e.ins.iter().map(iv).collect();
            let d: Vec<String> = e.del.iter().map(iv).collect();
            format!("(({}),({}))", i.join(","), d.join(","))
        })
        .collect();
    parts.join(",")
}

/// Processes entries left to right. Deletes drain the most prioritized
/// non-empty priority first; whatever cannot be matched becomes `bottom`.
pub fn anchor_assign(state: &mut AnchorState, b: &Batch) -> Assignment {
    let p = b.priorities;
    assert_eq!(state.first.len(), p);
    let mut out = Vec::with_capacity(b.len());
    for e in &b.entries {
        let mut a = EntryAssignment::empty(p);
        a.ins_serial = state.count;
        for q in 0..p {
            if e.ins[q] > 0 {
                a.ins[q] = Some((state.last[q] + 1, state.last[q] + e.ins[q]));
                state.last[q] += e.ins[q];
            }
        }
        state.count += e.inserts();
        a.del_serial = state.count;
        let mut rem = e.del;
        for q in 0..p {
            if rem == 0 {
                break;
            }
            let avail = state.size(q);
            if avail == 0 {
                continue;
            }
            let take = rem.min(avail);
            a.del[q] = Some((state.first[q], state.first[q] + take - 1));
            state.first[q] += take;
            rem -= take;
        }
        a.bottom = rem;
        state.count += e.del;
        debug_assert!(state.invariant_holds());
        out.push(a);
    }
    out
}

/// Splits a share over `parts` (own batch first, then children by label).
/// Positions and serials are consumed in that order; within a delete run
/// matched positions go before `bottom`.
pub fn decompose(share: &Assignment, parts: &[&Batch]) -> Result<Vec<Assignment>, String> {
    let p = parts.first().map_or(0, |b| b.priorities);
    let mut out: Vec<Assignment> = parts.iter().map(|b| Vec::with_capacity(b.len())).collect();
    let len = parts.iter().map(|b| b.len()).max().unwrap_or(0);
    if share.len() != len {
        return Err(format!("share has {} entries, sub-batches have {}", share.len(), len));
    }
    for (j, sa) in share.iter().enumerate() {
        // Insert positions, per priority.
        let mut next_ins: Vec<u64> = sa.ins.iter().map(|i| i.map_or(0, |(a, _)| a)).collect();
        let mut ins_serial = sa.ins_serial;
        let mut del_serial = sa.del_serial;
        let mut matched: Vec<(usize, u64)> = sa
            .del_positions()
            .map(|(q, x)| (q as usize - 1, x))
            .collect::<Vec<_>>();
        matched.reverse();
        let mut bottom_left = sa.bottom;
        let mut used_ins = vec![0u64; p];
        for (k, b) in parts.iter().enumerate() {
            let Some(e) = b.entry(j) else {
                continue;
            };
            let mut a = EntryAssignment::empty(p);
            for q in 0..p {
                let c = e.ins[q];
                if c > 0 {
                    a.ins[q] = Some((next_ins[q], next_ins[q] + c - 1));
                    next_ins[q] += c;
                    used_ins[q] += c;
                }
            }
            a.ins_serial = ins_serial;
            ins_serial += e.inserts();
            a.del_serial = del_serial;
            del_serial += e.del;
            for _ in 0..e.del {
                if let Some((q, x)) = matched.pop() {
                    a.del[q] = Some(match a.del[q] {
                        None => (x, x),
                        Some((s, t)) if t + 1 == x => (s, x),
                        Some(_) => return Err("non-contiguous delete share".into()),
                    });
                } else if bottom_left > 0 {
                    bottom_left -= 1;
                    a.bottom += 1;
                } else {
                    return Err(format!("entry {j}: deletes exceed the share"));
                }
            }
            out[k].push(a);
        }
        for (q, (&used, &iv)) in used_ins.iter().zip(&sa.ins).enumerate() {
            if used != card(iv) {
                return Err(format!("entry {j}: priority {} inserts do not match the share", q + 1));
            }
        }
        if !matched.is_empty() || bottom_left > 0 {
            return Err(format!("entry {j}: share has unconsumed deletes"));
        }
    }
    // Sub-batches shorter than the share receive nothing for missing entries.
    Ok(out)
}

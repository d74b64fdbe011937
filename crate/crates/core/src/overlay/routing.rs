//! De Bruijn emulation on the linear cycle.
//!
//! After `j` virtual-edge hops the waypoint holds the top `j` bits of the
//! target followed by the start label. Between hops the message walks to
//! the node responsible for the waypoint, then to the nearest middle node
//! below it (above it when the waypoint precedes every label), whose left
//! or right sibling is the emulated de Bruijn neighbour.

use serde::{Deserialize, Serialize};

use super::{Kind, Topology, VirtualId};
use crate::sim::{ceil_log2, BitSizer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Seek,
    ToMiddle,
    /// Like `ToMiddle`, but walking up because the waypoint precedes the
    /// current label.
    Climb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteState {
    pub target: u64,
    pub waypoint: u64,
    pub bits_left: u8,
    pub stage: Stage,
}

impl RouteState {
    /// Full route with `d = ceil(log2 n) + 2` emulated hops.
    pub fn new(topo: &Topology, start: VirtualId, target: u64) -> Self {
        RouteState {
            target,
            waypoint: topo.label(start),
            bits_left: (ceil_log2(topo.n() as u64) + 2) as u8,
            stage: Stage::ToMiddle,
        }
    }

    /// One de Bruijn step from the node holding point `from` to the node
    /// holding `(from >> 1) | bit << 63`, where `bit` is the top bit of `target`.
    pub fn single_step(from: u64, target: u64) -> Self {
        RouteState { target, waypoint: from, bits_left: 1, stage: Stage::Seek }
    }

    pub fn size_bits(&self, s: &BitSizer) -> u32 {
        2 * s.point() + s.nat(self.bits_left as u64) + s.flag()
    }

    /// The next virtual node on the path, or `None` once `cur` is
    /// responsible for the target.
    pub fn next_hop(&mut self, topo: &Topology, cur: VirtualId) -> Option<VirtualId> {
        if topo.is_responsible(cur, self.target) {
            return None;
        }
        if self.bits_left == 0 {
            return Some(seek(topo, cur, self.target));
        }
        if self.stage == Stage::Seek {
            if !topo.is_responsible(cur, self.waypoint) {
                return Some(seek(topo, cur, self.waypoint));
            }
            self.stage = Stage::ToMiddle;
        }
        if self.stage == Stage::ToMiddle && topo.label(cur) > self.waypoint {
            self.stage = Stage::Climb;
        }
        if cur.kind != Kind::Middle {
            return Some(if self.stage == Stage::Climb { topo.succ(cur) } else { topo.pred(cur) });
        }
        let bit = (self.target >> (64 - self.bits_left as u32)) & 1;
        self.waypoint = (self.waypoint >> 1) | (bit << 63);
        self.bits_left -= 1;
        self.stage = Stage::Seek;
        Some(if bit == 0 { VirtualId::left(cur.owner) } else { VirtualId::right(cur.owner) })
    }
}

fn seek(topo: &Topology, cur: VirtualId, x: u64) -> VirtualId {
    if x < topo.label(cur) {
        topo.pred(cur)
    } else {
        topo.succ(cur)
    }
}

/// Full path from `start` to the node responsible for `key`, including both
/// endpoints. Hop count is `len - 1`.
pub fn route(topo: &Topology, start: VirtualId, key: u64) -> Vec<VirtualId> {
    let mut st = RouteState::new(topo, start, key);
    let mut path = vec![start];
    let mut cur = start;
    let cap = 16 * topo.virtual_count() + 1024;
    while let Some(next) = st.next_hop(topo, cur) {
        path.push(next);
        cur = next;
        assert!(path.len() <= cap, "route did not converge");
    }
    path
}

//! Linearized de Bruijn overlay: each real node emulates a left, middle and
//! right virtual node with labels `m/2`, `m` and `(m+1)/2` on a sorted cycle.

mod aggregation;
mod dht;
mod routing;
mod topology;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sim::{Address, NodeId};

pub use aggregation::{
    aggregate_direct, split_counts, AggregationSim, CountInterval, TreeMsg, Wave,
};
pub use dht::{max_real_load, real_loads, DhtError, DhtMsg, DhtOp, DhtSim, DhtStore, Parked};
pub use routing::{route, RouteState, Stage};
pub use topology::{Topology, TopologyError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Left = 0,
    Middle = 1,
    Right = 2,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VirtualId {
    pub owner: NodeId,
    pub kind: Kind,
}

impl VirtualId {
    pub fn new(owner: NodeId, kind: Kind) -> Self {
        VirtualId { owner, kind }
    }

    pub fn left(owner: NodeId) -> Self {
        VirtualId::new(owner, Kind::Left)
    }

    pub fn middle(owner: NodeId) -> Self {
        VirtualId::new(owner, Kind::Middle)
    }

    pub fn right(owner: NodeId) -> Self {
        VirtualId::new(owner, Kind::Right)
    }

    /// Dense index `3*owner + kind`.
    pub fn index(&self) -> usize {
        self.owner as usize * 3 + self.kind as usize
    }

    pub fn from_index(i: usize) -> Self {
        let kind = match i % 3 {
            0 => Kind::Left,
            1 => Kind::Middle,
            _ => Kind::Right,
        };
        VirtualId::new((i / 3) as NodeId, kind)
    }
}

impl fmt::Debug for VirtualId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            Kind::Left => 'l',
            Kind::Middle => 'm',
            Kind::Right => 'r',
        };
        write!(f, "{k}({})", self.owner)
    }
}

impl Address for VirtualId {
    fn owner(&self) -> NodeId {
        self.owner
    }
    fn code(&self) -> u64 {
        self.index() as u64
    }
}

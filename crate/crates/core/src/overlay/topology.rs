use serde::Serialize;

use super::{Kind, VirtualId};
use crate::sim::hash::{f64_to_point, hash_point, point_to_f64, tag};
use crate::sim::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TopologyError {
    #[error("need at least 2 nodes, got {0}")]
    TooSmall(usize),
    #[error("virtual labels collide at {0:#x}")]
    Collision(u64),
}

/// The sorted cycle of `3n` virtual nodes and the aggregation tree on it.
#[derive(Clone, Debug)]
pub struct Topology {
    n: usize,
    labels: Vec<u64>,
    order: Vec<VirtualId>,
    sorted: Vec<u64>,
    rank: Vec<u32>,
    parent: Vec<Option<VirtualId>>,
    children: Vec<Vec<VirtualId>>,
    depth: Vec<u32>,
}

fn virtual_labels(m: u64) -> [u64; 3] {
    [m >> 1, m, (m >> 1) | (1 << 63)]
}

impl Topology {
    /// Middle labels come from the public hash; a node whose labels collide
    /// with an earlier node's re-draws with the next attempt counter.
    pub fn build(n: usize, seed: u64) -> Result<Self, TopologyError> {
        if n < 2 {
            return Err(TopologyError::TooSmall(n));
        }
        let mut seen = std::collections::HashSet::with_capacity(3 * n);
        let mut middles = Vec::with_capacity(n);
        for v in 0..n as u64 {
            let mut attempt = 0u64;
            loop {
                let m = hash_point(tag::LABEL, &[v, attempt], seed);
                let ls = virtual_labels(m);
                if ls.iter().all(|l| !seen.contains(l)) && ls[0] != ls[1] && ls[1] != ls[2] {
                    seen.extend(ls);
                    middles.push(m);
                    break;
                }
                attempt += 1;
            }
        }
        Self::from_middle_labels(&middles)
    }

    pub fn from_middle_labels(middles: &[u64]) -> Result<Self, TopologyError> {
        let n = middles.len();
        if n < 2 {
            return Err(TopologyError::TooSmall(n));
        }
        let mut labels = Vec::with_capacity(3 * n);
        for &m in middles {
            labels.extend(virtual_labels(m));
        }
        let mut order: Vec<VirtualId> = (0..3 * n).map(VirtualId::from_index).collect();
        order.sort_by_key(|v| labels[v.index()]);
        for w in order.windows(2) {
            if labels[w[0].index()] == labels[w[1].index()] {
                return Err(TopologyError::Collision(labels[w[0].index()]));
            }
        }
        let sorted: Vec<u64> = order.iter().map(|v| labels[v.index()]).collect();
        let mut rank = vec![0u32; 3 * n];
        for (i, v) in order.iter().enumerate() {
            rank[v.index()] = i as u32;
        }
        let mut t = Topology {
            n,
            labels,
            order,
            sorted,
            rank,
            parent: vec![None; 3 * n],
            children: vec![Vec::new(); 3 * n],
            depth: vec![0; 3 * n],
        };
        t.derive_tree();
        Ok(t)
    }

    pub fn from_middle_f64(middles: &[f64]) -> Result<Self, TopologyError> {
        let m: Vec<u64> = middles.iter().map(|&x| f64_to_point(x)).collect();
        Self::from_middle_labels(&m)
    }

    /// `p(m(v)) = l(v)`, `p(r(v)) = m(v)`, `p(l(v)) = pred(l(v))`, except at
    /// the minimum label, whose wrap-around parent is dropped.
    fn derive_tree(&mut self) {
        let root = self.order[0];
        for i in 0..3 * self.n {
            let v = VirtualId::from_index(i);
            let p = match v.kind {
                Kind::Middle => Some(VirtualId::left(v.owner)),
                Kind::Right => Some(VirtualId::middle(v.owner)),
                Kind::Left if v == root => None,
                Kind::Left => Some(self.pred(v)),
            };
            self.parent[i] = p;
            if let Some(p) = p {
                self.children[p.index()].push(v);
            }
        }
        for c in &mut self.children {
            c.sort_by_key(|w| self.rank[w.index()]);
        }
        // Parents always carry smaller labels, so label order is a topological order.
        for i in 0..self.order.len() {
            let v = self.order[i];
            self.depth[v.index()] = match self.parent[v.index()] {
                Some(p) => self.depth[p.index()] + 1,
                None => 0,
            };
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn virtual_count(&self) -> usize {
        3 * self.n
    }

    pub fn label(&self, v: VirtualId) -> u64 {
        self.labels[v.index()]
    }

    pub fn label_f64(&self, v: VirtualId) -> f64 {
        point_to_f64(self.label(v))
    }

    pub fn middle_label(&self, v: NodeId) -> u64 {
        self.label(VirtualId::middle(v))
    }

    /// Virtual nodes in ascending label order.
    pub fn order(&self) -> &[VirtualId] {
        &self.order
    }

    pub fn rank(&self, v: VirtualId) -> usize {
        self.rank[v.index()] as usize
    }

    pub fn pred(&self, v: VirtualId) -> VirtualId {
        let r = self.rank(v);
        self.order[if r == 0 { self.order.len() - 1 } else { r - 1 }]
    }

    pub fn succ(&self, v: VirtualId) -> VirtualId {
        let r = self.rank(v);
        self.order[if r + 1 == self.order.len() { 0 } else { r + 1 }]
    }

    /// The unique `v` with `v <= key < succ(v)`, cyclically.
    pub fn responsible(&self, key: u64) -> VirtualId {
        let i = self.sorted.partition_point(|&l| l <= key);
        self.order[if i == 0 { self.order.len() - 1 } else { i - 1 }]
    }

    pub fn is_responsible(&self, v: VirtualId, key: u64) -> bool {
        let lo = self.label(v);
        let hi = self.label(self.succ(v));
        if lo < hi {
            lo <= key && key < hi
        } else {
            key >= lo || key < hi
        }
    }

    pub fn root(&self) -> VirtualId {
        self.order[0]
    }

    pub fn parent(&self, v: VirtualId) -> Option<VirtualId> {
        self.parent[v.index()]
    }

    /// Children in ascending label order.
    pub fn children(&self, v: VirtualId) -> &[VirtualId] {
        &self.children[v.index()]
    }

    pub fn depth(&self, v: VirtualId) -> u32 {
        self.depth[v.index()]
    }

    pub fn height(&self) -> u32 {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Height counting only edges between different real nodes.
    pub fn owner_height(&self) -> u32 {
        let mut d = vec![0u32; 3 * self.n];
        for &v in &self.order {
            if let Some(p) = self.parent(v) {
                d[v.index()] = d[p.index()] + u32::from(p.owner != v.owner);
            }
        }
        d.into_iter().max().unwrap_or(0)
    }

    pub fn dump(&self) -> TopologyDump {
        TopologyDump {
            n: self.n,
            root: self.root(),
            nodes: self
                .order
                .iter()
                .map(|&v| DumpNode { id: v, label: self.label_f64(v), parent: self.parent(v) })
                .collect(),
        }
    }
}

#[derive(Serialize)]
pub struct DumpNode {
    pub id: VirtualId,
    pub label: f64,
    pub parent: Option<VirtualId>,
}

#[derive(Serialize)]
pub struct TopologyDump {
    pub n: usize,
    pub root: VirtualId,
    pub nodes: Vec<DumpNode>,
}

impl TopologyDump {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dump serialize")
    }
}

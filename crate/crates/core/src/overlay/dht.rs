//! Key/value store kept by each virtual node, plus a small routed put/get
//! protocol used to exercise it end to end.

use std::collections::HashMap;

use super::{RouteState, Topology, VirtualId};
use crate::element::Element;
use crate::sim::{BitSizer, Envelope, Fault, NodeId, Outbox, Payload, Protocol, TAG_BITS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DhtError {
    #[error("key {0:#x} already occupied")]
    Occupied(u64),
    #[error("second get parked on key {0:#x}")]
    DoubleGet(u64),
}

/// A get that arrived before its put.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parked<R> {
    pub key: u64,
    pub requester: R,
}

#[derive(Clone, Debug)]
pub struct DhtStore<V, R> {
    items: HashMap<u64, V>,
    waiting: HashMap<u64, R>,
}

impl<V, R> Default for DhtStore<V, R> {
    fn default() -> Self {
        DhtStore { items: HashMap::new(), waiting: HashMap::new() }
    }
}

impl<V, R> DhtStore<V, R> {
    /// Stores `value`, or hands it straight to a parked requester.
    pub fn put(&mut self, key: u64, value: V) -> Result<Option<(R, V)>, DhtError> {
        if let Some(r) = self.waiting.remove(&key) {
            return Ok(Some((r, value)));
        }
        if self.items.contains_key(&key) {
            return Err(DhtError::Occupied(key));
        }
        self.items.insert(key, value);
        Ok(None)
    }

    /// Removes and returns the value, or parks the requester until the put.
    pub fn get(&mut self, key: u64, requester: R) -> Result<Option<V>, DhtError> {
        if let Some(v) = self.items.remove(&key) {
            return Ok(Some(v));
        }
        if self.waiting.contains_key(&key) {
            return Err(DhtError::DoubleGet(key));
        }
        self.waiting.insert(key, requester);
        Ok(None)
    }

    pub fn peek(&self, key: u64) -> Option<&V> {
        self.items.get(&key)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn parked(&self) -> usize {
        self.waiting.len()
    }

    pub fn values(&self) -> impl Iterator<Item = &V> {
        self.items.values()
    }

    pub fn keys(&self) -> impl Iterator<Item = u64> + '_ {
        self.items.keys().copied()
    }

    /// Removes every stored value matching `pred`.
    pub fn take_where(&mut self, mut pred: impl FnMut(&V) -> bool) -> Vec<(u64, V)> {
        self.items.extract_if(|_, v| pred(v)).collect()
    }

    pub fn drain(&mut self) -> impl Iterator<Item = (u64, V)> + '_ {
        self.items.drain()
    }
}

/// Number of keys each real node is responsible for.
pub fn real_loads(topo: &Topology, keys: impl IntoIterator<Item = u64>) -> Vec<usize> {
    let mut load = vec![0usize; topo.n()];
    for k in keys {
        load[topo.responsible(k).owner as usize] += 1;
    }
    load
}

pub fn max_real_load(topo: &Topology, keys: impl IntoIterator<Item = u64>) -> usize {
    real_loads(topo, keys).into_iter().max().unwrap_or(0)
}

#[derive(Clone, Debug)]
pub enum DhtMsg {
    Put { route: RouteState, key: u64, elem: Element, from: VirtualId },
    Get { route: RouteState, key: u64, from: VirtualId },
    Ack { key: u64 },
    Reply { key: u64, elem: Element },
}

impl Payload for DhtMsg {
    fn size_bits(&self, s: &BitSizer) -> u32 {
        TAG_BITS
            + match self {
                DhtMsg::Put { route, elem, .. } => {
                    route.size_bits(s) + s.point() + elem.size_bits(s) + s.vid()
                }
                DhtMsg::Get { route, .. } => route.size_bits(s) + s.point() + s.vid(),
                DhtMsg::Ack { .. } => s.point(),
                DhtMsg::Reply { elem, .. } => s.point() + elem.size_bits(s),
            }
    }

    fn kind(&self) -> &'static str {
        match self {
            DhtMsg::Put { .. } => "dht_put",
            DhtMsg::Get { .. } => "dht_get",
            DhtMsg::Ack { .. } => "dht_ack",
            DhtMsg::Reply { .. } => "dht_reply",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum DhtOp {
    Put(u64, Element),
    Get(u64),
}

/// Routed put/get driver: each real node issues one scripted operation per
/// activation from its middle virtual node.
pub struct DhtSim {
    topo: Topology,
    stores: Vec<DhtStore<Element, VirtualId>>,
    script: Vec<std::collections::VecDeque<DhtOp>>,
    pub acks: Vec<Vec<u64>>,
    pub replies: Vec<Vec<(u64, Element)>>,
    outstanding: usize,
}

impl DhtSim {
    pub fn new(topo: Topology) -> Self {
        let n = topo.n();
        DhtSim {
            stores: vec![DhtStore::default(); 3 * n],
            script: vec![Default::default(); n],
            acks: vec![Vec::new(); n],
            replies: vec![Vec::new(); n],
            outstanding: 0,
            topo,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn push(&mut self, node: NodeId, op: DhtOp) {
        self.script[node as usize].push_back(op);
        self.outstanding += 1;
    }

    pub fn store(&self, v: VirtualId) -> &DhtStore<Element, VirtualId> {
        &self.stores[v.index()]
    }

    pub fn stored(&self) -> usize {
        self.stores.iter().map(|s| s.len()).sum()
    }

    pub fn parked(&self) -> usize {
        self.stores.iter().map(|s| s.parked()).sum()
    }

    fn forward(&self, at: VirtualId, msg: DhtMsg, out: &mut Outbox<VirtualId, DhtMsg>) -> Option<DhtMsg> {
        let mut msg = msg;
        let route = match &mut msg {
            DhtMsg::Put { route, .. } | DhtMsg::Get { route, .. } => route,
            _ => return Some(msg),
        };
        match route.next_hop(&self.topo, at) {
            Some(next) => {
                out.send(at, next, msg);
                None
            }
            None => Some(msg),
        }
    }
}

impl Protocol for DhtSim {
    type Addr = VirtualId;
    type Msg = DhtMsg;

    fn node_count(&self) -> usize {
        self.topo.n()
    }

    fn on_activate(&mut self, node: NodeId, out: &mut Outbox<VirtualId, DhtMsg>) -> Result<(), Fault> {
        let Some(op) = self.script[node as usize].pop_front() else {
            return Ok(());
        };
        let from = VirtualId::middle(node);
        let msg = match op {
            DhtOp::Put(key, elem) => {
                DhtMsg::Put { route: RouteState::new(&self.topo, from, key), key, elem, from }
            }
            DhtOp::Get(key) => DhtMsg::Get { route: RouteState::new(&self.topo, from, key), key, from },
        };
        // Deliver locally first if already responsible.
        if let Some(m) = self.forward(from, msg, out) {
            out.send(from, from, m);
        }
        Ok(())
    }

    fn on_message(
        &mut self,
        env: Envelope<VirtualId, DhtMsg>,
        out: &mut Outbox<VirtualId, DhtMsg>,
    ) -> Result<(), Fault> {
        let at = env.dst;
        let Some(msg) = self.forward(at, env.payload, out) else {
            return Ok(());
        };
        let store = &mut self.stores[at.index()];
        match msg {
            DhtMsg::Put { key, elem, from, .. } => {
                let hit = store.put(key, elem).map_err(|e| Fault::protocol(e.to_string()))?;
                out.send(at, from, DhtMsg::Ack { key });
                if let Some((req, e)) = hit {
                    out.send(at, req, DhtMsg::Reply { key, elem: e });
                }
            }
            DhtMsg::Get { key, from, .. } => {
                if let Some(e) = store.get(key, from).map_err(|e| Fault::protocol(e.to_string()))? {
                    out.send(at, from, DhtMsg::Reply { key, elem: e });
                }
            }
            DhtMsg::Ack { key } => {
                self.acks[at.owner as usize].push(key);
                self.outstanding -= 1;
            }
            DhtMsg::Reply { key, elem } => {
                self.replies[at.owner as usize].push((key, elem));
                self.outstanding -= 1;
            }
        }
        Ok(())
    }

    fn is_done(&self) -> bool {
        self.outstanding == 0
    }
}

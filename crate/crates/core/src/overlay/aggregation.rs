//! Convergecast to the anchor and the matching top-down broadcast.
//!
//! Contributions are always ordered own value first, then children in
//! ascending label order. A broadcast splits its share in the same order.

use std::fmt::Debug;

use super::{Topology, VirtualId};
use crate::sim::{BitSizer, Envelope, Fault, NodeId, Outbox, Payload, Protocol, TAG_BITS};

/// One aggregation phase, optionally followed by a broadcast.
pub trait Wave {
    type Up: Clone + Debug;
    type Down: Clone + Debug;

    fn own(&self, v: VirtualId) -> Self::Up;
    /// `parts[0]` is the node's own value, the rest are its children's.
    fn combine(&self, parts: &[Self::Up]) -> Self::Up;
    /// Share handed to the anchor for the broadcast, or `None` to stop
    /// after aggregating.
    fn root_share(&self, total: &Self::Up) -> Option<Self::Down>;
    /// Splits a share into one share per entry of `parts`.
    fn split(&self, share: &Self::Down, parts: &[Self::Up]) -> Result<Vec<Self::Down>, String>;
    fn up_bits(&self, u: &Self::Up, s: &BitSizer) -> u32;
    fn down_bits(&self, d: &Self::Down, s: &BitSizer) -> u32;
}

#[derive(Clone, Debug)]
pub enum TreeMsg<U, D> {
    Up { value: U, bits: u32 },
    Down { share: D, bits: u32 },
}

impl<U: Clone + Debug, D: Clone + Debug> Payload for TreeMsg<U, D> {
    fn size_bits(&self, _: &BitSizer) -> u32 {
        TAG_BITS
            + match self {
                TreeMsg::Up { bits, .. } | TreeMsg::Down { bits, .. } => *bits,
            }
    }

    fn kind(&self) -> &'static str {
        match self {
            TreeMsg::Up { .. } => "aggregate",
            TreeMsg::Down { .. } => "broadcast",
        }
    }
}

struct Slot<U, D> {
    parts: Vec<Option<U>>,
    sent: bool,
    share: Option<D>,
}

/// Runs one [`Wave`] over the tree. Nodes forward their combined value on
/// activation once every child has reported.
pub struct AggregationSim<W: Wave> {
    topo: Topology,
    wave: W,
    sizer: BitSizer,
    slots: Vec<Slot<W::Up, W::Down>>,
    total: Option<W::Up>,
    shares_left: usize,
}

impl<W: Wave> AggregationSim<W> {
    pub fn new(topo: Topology, wave: W) -> Self {
        let slots = (0..topo.virtual_count())
            .map(|i| {
                let v = VirtualId::from_index(i);
                let mut parts = vec![None; 1 + topo.children(v).len()];
                parts[0] = Some(wave.own(v));
                Slot { parts, sent: false, share: None }
            })
            .collect();
        let shares_left = topo.virtual_count();
        AggregationSim { sizer: BitSizer::new(topo.n()), topo, wave, slots, total: None, shares_left }
    }

    pub fn total(&self) -> Option<&W::Up> {
        self.total.as_ref()
    }

    pub fn share(&self, v: VirtualId) -> Option<&W::Down> {
        self.slots[v.index()].share.as_ref()
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    fn parts(&self, v: VirtualId) -> Vec<W::Up> {
        self.slots[v.index()].parts.iter().map(|p| p.clone().expect("complete")).collect()
    }

    fn deliver_share(
        &mut self,
        v: VirtualId,
        share: W::Down,
        out: &mut Outbox<VirtualId, TreeMsg<W::Up, W::Down>>,
    ) -> Result<(), Fault> {
        let parts = self.parts(v);
        let split = self.wave.split(&share, &parts).map_err(Fault::Protocol)?;
        if split.len() != parts.len() {
            return Err(Fault::protocol("split arity mismatch"));
        }
        let mut it = split.into_iter();
        self.slots[v.index()].share = it.next();
        self.shares_left -= 1;
        for (&c, s) in self.topo.children(v).iter().zip(it) {
            let bits = self.wave.down_bits(&s, &self.sizer);
            out.send(v, c, TreeMsg::Down { share: s, bits });
        }
        Ok(())
    }
}

impl<W: Wave> Protocol for AggregationSim<W> {
    type Addr = VirtualId;
    type Msg = TreeMsg<W::Up, W::Down>;

    fn node_count(&self) -> usize {
        self.topo.n()
    }

    fn on_activate(&mut self, node: NodeId, out: &mut Outbox<VirtualId, Self::Msg>) -> Result<(), Fault> {
        for v in [VirtualId::left(node), VirtualId::middle(node), VirtualId::right(node)] {
            let slot = &self.slots[v.index()];
            if slot.sent || slot.parts.iter().any(Option::is_none) {
                continue;
            }
            self.slots[v.index()].sent = true;
            let value = self.wave.combine(&self.parts(v));
            match self.topo.parent(v) {
                Some(p) => {
                    let bits = self.wave.up_bits(&value, &self.sizer);
                    out.send(v, p, TreeMsg::Up { value, bits });
                }
                None => {
                    let share = self.wave.root_share(&value);
                    self.total = Some(value);
                    match share {
                        Some(s) => self.deliver_share(v, s, out)?,
                        None => self.shares_left = 0,
                    }
                }
            }
        }
        Ok(())
    }

    fn on_message(
        &mut self,
        env: Envelope<VirtualId, Self::Msg>,
        out: &mut Outbox<VirtualId, Self::Msg>,
    ) -> Result<(), Fault> {
        let v = env.dst;
        match env.payload {
            TreeMsg::Up { value, .. } => {
                let i = self
                    .topo
                    .children(v)
                    .iter()
                    .position(|&c| c == env.src)
                    .ok_or_else(|| Fault::protocol(format!("{:?} is not a child of {v:?}", env.src)))?;
                self.slots[v.index()].parts[i + 1] = Some(value);
                Ok(())
            }
            TreeMsg::Down { share, .. } => self.deliver_share(v, share, out),
        }
    }

    fn is_done(&self) -> bool {
        self.total.is_some() && self.shares_left == 0
    }
}

/// Oracle: the anchor's value computed by direct recursion over the tree.
pub fn aggregate_direct<U: Clone>(
    topo: &Topology,
    own: impl Fn(VirtualId) -> U,
    combine: impl Fn(&[U]) -> U,
) -> U {
    let mut acc: Vec<Option<U>> = vec![None; topo.virtual_count()];
    for &v in topo.order().iter().rev() {
        let mut parts = vec![own(v)];
        parts.extend(topo.children(v).iter().map(|c| acc[c.index()].take().expect("child first")));
        acc[v.index()] = Some(combine(&parts));
    }
    acc[topo.root().index()].take().expect("root")
}

/// Splits the interval starting at `start` into consecutive runs of the given
/// lengths. Each run is `(first, len)`.
pub fn split_counts(start: u64, counts: &[u64]) -> Vec<(u64, u64)> {
    let mut next = start;
    counts
        .iter()
        .map(|&c| {
            let r = (next, c);
            next += c;
            r
        })
        .collect()
}

/// Counting aggregation followed by decomposition of `[1, total]`.
pub struct CountInterval<F: Fn(VirtualId) -> u64> {
    pub count: F,
}

impl<F: Fn(VirtualId) -> u64> Wave for CountInterval<F> {
    type Up = u64;
    /// `(first, len)`.
    type Down = (u64, u64);

    fn own(&self, v: VirtualId) -> u64 {
        (self.count)(v)
    }

    fn combine(&self, parts: &[u64]) -> u64 {
        parts.iter().sum()
    }

    fn root_share(&self, total: &u64) -> Option<(u64, u64)> {
        Some((1, *total))
    }

    fn split(&self, share: &(u64, u64), parts: &[u64]) -> Result<Vec<(u64, u64)>, String> {
        let sum: u64 = parts.iter().sum();
        if sum != share.1 {
            return Err(format!("share of {} positions for {} contributions", share.1, sum));
        }
        Ok(split_counts(share.0, parts))
    }

    fn up_bits(&self, u: &u64, s: &BitSizer) -> u32 {
        s.nat(*u)
    }

    fn down_bits(&self, d: &(u64, u64), s: &BitSizer) -> u32 {
        s.interval(d.0, d.0 + d.1)
    }
}

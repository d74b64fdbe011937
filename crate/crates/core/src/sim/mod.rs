//! Discrete-event engine.
//!
//! A [`Protocol`] owns the state of every node. The [`Engine`] owns the
//! channels and decides, per mode, when envelopes are delivered and when
//! nodes are activated.

mod bits;
mod engine;
pub mod hash;
mod metrics;
mod trace;

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

pub use bits::{ceil_log2, BitSizer, TAG_BITS};
pub use engine::{Engine, EngineConfig};
pub use metrics::{MetricsSummary, RoundMetrics, RoundSummary};
pub use trace::{Trace, TraceEvent};

/// Real node identifier, dense in `0..n`.
pub type NodeId = u32;

/// Anything a message can be addressed to. Congestion is charged to the
/// owning real node.
pub trait Address: Copy + Eq + Debug {
    fn owner(&self) -> NodeId;
    /// Stable integer used in traces.
    fn code(&self) -> u64;
}

impl Address for NodeId {
    fn owner(&self) -> NodeId {
        *self
    }
    fn code(&self) -> u64 {
        *self as u64
    }
}

pub trait Payload: Clone + Debug {
    fn size_bits(&self, s: &BitSizer) -> u32;
    fn kind(&self) -> &'static str;
}

#[derive(Clone, Debug)]
pub struct Envelope<A, M> {
    pub id: u64,
    pub src: A,
    pub dst: A,
    pub payload: M,
    pub size_bits: u32,
    pub enqueue_time: u64,
}

/// Sends produced by one handler invocation.
#[derive(Debug)]
pub struct Outbox<A, M> {
    items: Vec<(A, A, M)>,
}

impl<A, M> Default for Outbox<A, M> {
    fn default() -> Self {
        Outbox { items: Vec::new() }
    }
}

impl<A, M> Outbox<A, M> {
    pub fn send(&mut self, src: A, dst: A, payload: M) {
        self.items.push((src, dst, payload));
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub(crate) fn drain(&mut self) -> std::vec::Drain<'_, (A, A, M)> {
        self.items.drain(..)
    }
}

pub trait Protocol {
    type Addr: Address;
    type Msg: Payload;

    fn node_count(&self) -> usize;
    fn is_valid(&self, addr: &Self::Addr) -> bool {
        (addr.owner() as usize) < self.node_count()
    }
    fn on_activate(
        &mut self,
        node: NodeId,
        out: &mut Outbox<Self::Addr, Self::Msg>,
    ) -> Result<(), Fault>;
    fn on_message(
        &mut self,
        env: Envelope<Self::Addr, Self::Msg>,
        out: &mut Outbox<Self::Addr, Self::Msg>,
    ) -> Result<(), Fault>;
    /// True once the protocol has nothing left to do apart from draining.
    fn is_done(&self) -> bool;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Fault {
    #[error("unknown destination {0}")]
    UnknownDestination(String),
    #[error("message {0} modeled with zero bits")]
    ZeroSize(String),
    #[error("operation requires {0} mode")]
    WrongMode(&'static str),
    #[error("no quiescence after {0} scheduler steps")]
    StepLimit(u64),
    #[error("protocol fault: {0}")]
    Protocol(String),
}

impl Fault {
    pub fn protocol(msg: impl Into<String>) -> Self {
        Fault::Protocol(msg.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    Sync,
    Async,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    Skeap,
    SkeapPlus,
    Kselect,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub seed: u64,
    pub priority_count: u64,
    pub lambda: u32,
    pub mode: SimMode,
    pub async_delay_max: u64,
    pub protocol: ProtocolKind,
    pub epochs: u32,
    /// Retain every trace event, not just the digest.
    #[serde(default)]
    pub keep_trace: bool,
}

impl SimConfig {
    pub fn new(protocol: ProtocolKind, n: usize, seed: u64) -> Self {
        SimConfig {
            n,
            seed,
            priority_count: 2,
            lambda: 1,
            mode: SimMode::Sync,
            async_delay_max: 8,
            protocol,
            epochs: 4,
            keep_trace: false,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n < 2 {
            return Err(format!("n must be at least 2, got {}", self.n));
        }
        if self.async_delay_max < 1 {
            return Err("async_delay_max must be at least 1".into());
        }
        if self.priority_count < 1 {
            return Err("priority_count must be at least 1".into());
        }
        Ok(())
    }

    pub fn engine(&self) -> EngineConfig {
        EngineConfig {
            mode: self.mode,
            schedule_seed: self.seed ^ 0x5ced_u64.rotate_left(40),
            async_delay_max: self.async_delay_max,
            keep_trace: self.keep_trace,
            ..EngineConfig::default()
        }
    }
}

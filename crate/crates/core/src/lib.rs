//! Deterministic simulator for distributed heaps on a linearized de Bruijn overlay.
//!
//! The crate is organised bottom-up:
//!
//! - [`sim`] is the discrete-event engine (synchronous rounds and a seeded
//!   asynchronous adversary), the public hash and the bit-accounting model.
//! - [`overlay`] builds the virtual-node cycle, the aggregation tree, routing
//!   and the DHT store.
//! - [`skeap`] is the batch-based heap for a constant priority universe.
//! - [`kselect`] is distributed k-selection, used by [`skeap_plus`] for
//!   arbitrary priorities.
//! - [`consistency`] replays recorded histories against a sequential heap.
//! - [`experiment`] runs sweeps and fits scaling curves.

pub mod consistency;
pub mod element;
pub mod experiment;
pub mod kselect;
pub mod overlay;
pub mod sim;
pub mod skeap;
pub mod skeap_plus;

pub use element::Element;
pub use overlay::{Kind, Topology, VirtualId};
pub use sim::{NodeId, SimConfig, SimMode};

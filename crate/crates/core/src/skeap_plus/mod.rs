//! Priority queue for arbitrary priorities.
//!
//! Epochs alternate an insert phase, where elements are stored under random
//! DHT keys, with a deletemin phase, where KSelect finds the pivot
//! `e_{k*}`, every element up to the pivot moves to a position key
//! `hash(pos, epoch)`, and deletes fetch positions `1..=k*`.

mod order;
mod protocol;

pub use order::{constructed_order, phase_outcomes, PhaseOutcome};
pub use protocol::{run_skeap_plus, run_skeap_plus_with, EpochStats, PlusConfig, PlusMsg, PlusOutcome, SkeapPlusSim};

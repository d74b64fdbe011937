//! Distributed heap for a constant number of priorities.
//!
//! Each wave, every node snapshots its buffered requests into a [`Batch`],
//! batches are combined up the aggregation tree, the anchor turns the
//! combined batch into position intervals, the intervals are split back down
//! along the same tree, and every node finishes its requests with DHT
//! puts and gets keyed by `h(priority, position)`.

mod batch;
mod protocol;

pub use batch::{
    anchor_assign, assignment_bits, decompose, format_assignment, AnchorState, Assignment, Batch,
    Entry, EntryAssignment, ReqKind,
};
pub use protocol::{run_skeap, run_skeap_with, SkeapConfig, SkeapMsg, SkeapOutcome, SkeapSim};

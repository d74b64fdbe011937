//! Distributed k-selection.
//!
//! The anchor drives three phases with tree waves. Phase 1 prunes by
//! per-node order statistics, phase 2 samples candidates, sorts the sample
//! with copy trees and pairwise rendezvous, and keeps the band between two
//! sampled pivots, phase 3 sorts what is left exactly.
//!
//! Every virtual node is a participant, so `n` in the formulas is the
//! participant count `3 * real nodes` learned by the first wave.

mod local;
mod protocol;
mod sim;

pub use local::{lower_stat, phase1_bounds, prune_counts, upper_stat, Ext};
pub use protocol::{Cmd, Diagnostic, KMsg, KParams, KSelect, KSelectError, KStats, Phase, Rep, SortLoad};
pub use sim::{place_uniform, run_kselect, KSelectOutcome, KSelectSim};

//! History checking against a sequential heap.
//!
//! A history is a slice of [`OperationRecord`]s; an order is a permutation
//! of indices into it. Checks never search for an order except in
//! [`brute_force_order`], which is meant for tiny histories.

mod brute;
mod checks;
mod oracle;
mod record;

pub use brute::{brute_force_order, exists_serial_order_naive};
pub use checks::{
    check_heap_consistency, check_local_consistency, check_serializable, matching_from_history,
    verdict, HeapProperty, TieRule, Verdict, Violation,
};
pub use oracle::{apply as apply_oracle, sequential_oracle, OracleRun};
pub use record::{order_by_serial, write_records_jsonl, Assigned, OpKind, OperationRecord};

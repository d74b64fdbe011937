//! SKEAP+ with priorities from `1..=n^2`: per-epoch statistics and the
//! serializability checks.

use skeap::consistency::{check_heap_consistency, check_serializable, matching_from_history, TieRule};
use skeap::sim::{ProtocolKind, SimConfig};
use skeap::skeap_plus::{constructed_order, phase_outcomes, run_skeap_plus};

fn main() {
    let n = 16;
    let mut c = SimConfig::new(ProtocolKind::SkeapPlus, n, 5);
    c.priority_count = (n * n) as u64;
    c.lambda = 2;
    c.epochs = 5;
    let out = run_skeap_plus(&c).expect("run");
    for e in &out.epochs {
        println!(
            "epoch {}: {} inserts, {} deletes, k*={}, heap {} -> pivot {:?}",
            e.epoch,
            e.inserts,
            e.deletes,
            e.k_star,
            e.m,
            e.pivot.map(|p| p.priority)
        );
    }
    let h = &out.records;
    let o = constructed_order(h);
    println!("serializable: {:?}", check_serializable(h, &o, TieRule::Strict).is_ok());
    let m = matching_from_history(h).expect("matching");
    println!("heap consistent: {:?}", check_heap_consistency(h, &o, &m).is_ok());
    let phases = phase_outcomes(h);
    println!("phases returning the k* smallest: {}/{}", phases.iter().filter(|p| p.matches()).count(), phases.len());
    println!("{} rounds, max congestion {}, max message {} bits", out.time, out.metrics.max_congestion, out.metrics.max_message_bits);
}

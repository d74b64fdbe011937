//! Runs SKEAP under many asynchronous schedules and checks every recorded
//! history against a sequential heap.
//!
//! cargo run --release --example skeap_async_fuzz -- 200

use skeap::consistency::{order_by_serial, verdict, TieRule};
use skeap::sim::{ProtocolKind, SimConfig, SimMode};
use skeap::skeap::run_skeap;

fn main() {
    let runs: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100);
    let mut ok = 0;
    let mut ops = 0;
    for seed in 0..runs {
        let mut c = SimConfig::new(ProtocolKind::Skeap, [3, 4, 8][seed as usize % 3], seed);
        c.mode = SimMode::Async;
        c.priority_count = 2 + seed % 2;
        c.lambda = if seed % 2 == 0 { 1 } else { 4 };
        c.async_delay_max = 1 + seed % 16;
        let out = run_skeap(&c).expect("run");
        let h = &out.records;
        ops += h.len();
        let v = verdict(h, &order_by_serial(h), TieRule::PriorityOnly);
        if v.serializable && v.locally_consistent && v.heap_consistent {
            ok += 1;
        } else {
            println!("seed {seed}: {v:?}");
        }
    }
    println!("{ok}/{runs} schedules consistent, {ops} operations checked");
}

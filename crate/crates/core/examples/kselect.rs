//! Distributed k-selection over uniformly placed elements, compared with a
//! global sort.
//!
//! cargo run --release --example kselect -- 32 1024

use skeap::experiment::kselect_rank;
use skeap::kselect::{run_kselect, KParams};
use skeap::sim::{ProtocolKind, SimConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(32);
    let m: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(n * n);
    for seed in 0..5 {
        let mut c = SimConfig::new(ProtocolKind::Kselect, n, seed);
        c.priority_count = (m * m) as u64;
        let k = kselect_rank(n, seed, m as u64);
        let o = run_kselect(&c, m, k, KParams::default()).expect("run");
        println!(
            "seed {seed}: k={k:<6} {} rounds, N after phase 1 {:>6}, phase-2 iterations {}, retries {}, exact {}",
            o.time,
            o.stats.post_phase1_n,
            o.stats.phase2_iterations,
            o.stats.retries,
            o.matches_oracle()
        );
        if seed == 0 {
            for d in &o.diagnostics {
                println!("    {d:?}");
            }
        }
    }
}

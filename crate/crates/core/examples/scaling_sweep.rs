//! Sweeps n for one protocol, writes per-run metrics and prints the
//! fitted time against log2 n.
//!
//! cargo run --release --example scaling_sweep -- kselect /tmp/sweep

use std::path::PathBuf;

use skeap::experiment::{run_experiment, ExperimentSpec};
use skeap::sim::ProtocolKind;

fn main() {
    let mut args = std::env::args().skip(1);
    let protocol = match args.next().as_deref() {
        Some("skeap") => ProtocolKind::Skeap,
        Some("skeap-plus") => ProtocolKind::SkeapPlus,
        _ => ProtocolKind::Kselect,
    };
    let mut spec = ExperimentSpec::new(protocol, vec![4, 8, 16, 32, 64], 5);
    spec.out = args.next().map(PathBuf::from);
    let report = run_experiment(&spec).expect("experiment");
    for r in &report.runs {
        println!("n={:<3} seed={} time={:<5} congestion={:<4} bits={}", r.n, r.seed, r.time, r.max_congestion, r.max_message_bits);
    }
    if let Some(s) = &report.summary {
        println!("time ~ {:.2} log2 n + {:.2}, R^2 {:.3}", s.time_fit.slope, s.time_fit.intercept, s.time_fit.r2);
    }
    println!("all passed: {}", report.all_passed());
}

//! Counts per-node values up the aggregation tree and splits `[1, total]`
//! back down, in synchronous rounds and under the asynchronous scheduler.

use skeap::overlay::{aggregate_direct, AggregationSim, CountInterval};
use skeap::sim::{Engine, EngineConfig, SimMode};
use skeap::{Topology, VirtualId};

fn main() {
    let topo = Topology::build(16, 3).expect("topology");
    let count = |v: VirtualId| 1 + v.owner as u64 % 4;
    let direct = aggregate_direct(&topo, count, |p: &[u64]| p.iter().sum());
    println!("direct total {direct}, tree height {}", topo.height());

    for mode in [SimMode::Sync, SimMode::Async] {
        let sim = AggregationSim::new(topo.clone(), CountInterval { count });
        let mut eng = Engine::new(sim, EngineConfig { mode, schedule_seed: 7, ..EngineConfig::default() });
        let time = match mode {
            SimMode::Sync => eng.run_sync(),
            SimMode::Async => eng.run_async(7),
        }
        .expect("run");
        let unit = if mode == SimMode::Sync { "rounds" } else { "steps" };
        println!("{mode:?}: total {:?} after {time} {unit}", eng.proto.total());
        for &v in topo.order().iter().take(6) {
            println!("  {:?}{:<3} share {:?}", v.kind, v.owner, eng.proto.share(v));
        }
    }
}

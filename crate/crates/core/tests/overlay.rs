use proptest::prelude::*;

use skeap::overlay::{aggregate_direct, route, AggregationSim, CountInterval, DhtOp, DhtSim};
use skeap::sim::hash::{hash_point, tag};
use skeap::sim::{Engine, EngineConfig, SimMode};
use skeap::{Element, Kind, Topology, VirtualId};

fn engine_cfg(mode: SimMode, seed: u64) -> EngineConfig {
    EngineConfig { mode, schedule_seed: seed, ..EngineConfig::default() }
}

fn run<P: skeap::sim::Protocol>(eng: &mut Engine<P>, mode: SimMode, seed: u64) -> u64 {
    match mode {
        SimMode::Sync => eng.run_sync().unwrap(),
        SimMode::Async => eng.run_async(seed).unwrap(),
    }
}

#[test]
fn dht_put_then_get_returns_element() {
    for mode in [SimMode::Sync, SimMode::Async] {
        for seed in 0..10 {
            let topo = Topology::build(16, seed).unwrap();
            let mut d = DhtSim::new(topo);
            let keys: Vec<u64> = (0..16).map(|i| hash_point(tag::WORKLOAD, &[i], seed)).collect();
            for (i, &k) in keys.iter().enumerate() {
                d.push(i as u32, DhtOp::Put(k, Element::new(i as u64 + 1, i as u32, 0)));
            }
            for (i, &k) in keys.iter().enumerate() {
                d.push(((i + 5) % 16) as u32, DhtOp::Get(k));
            }
            let mut eng = Engine::new(d, engine_cfg(mode, seed));
            run(&mut eng, mode, seed);
            let d = &eng.proto;
            assert_eq!(d.acks.iter().map(Vec::len).sum::<usize>(), 16);
            for (i, &k) in keys.iter().enumerate() {
                let got = &d.replies[(i + 5) % 16];
                assert!(got.contains(&(k, Element::new(i as u64 + 1, i as u32, 0))));
            }
            assert_eq!((d.stored(), d.parked()), (0, 0));
        }
    }
}

#[test]
fn dht_get_before_put_parks_then_completes() {
    for mode in [SimMode::Sync, SimMode::Async] {
        for seed in 0..20 {
            let topo = Topology::build(8, seed).unwrap();
            let mut d = DhtSim::new(topo);
            let key = hash_point(tag::WORKLOAD, &[99], seed);
            // Node 0 asks on its first activation; node 5 stores on its third.
            d.push(0, DhtOp::Get(key));
            d.push(5, DhtOp::Put(key ^ 1, Element::new(1, 5, 0)));
            d.push(5, DhtOp::Put(key ^ 2, Element::new(1, 5, 1)));
            d.push(5, DhtOp::Put(key, Element::new(3, 5, 2)));
            let mut eng = Engine::new(d, engine_cfg(mode, seed));
            run(&mut eng, mode, seed);
            let d = &eng.proto;
            assert_eq!(d.replies[0], vec![(key, Element::new(3, 5, 2))]);
            assert_eq!((d.stored(), d.parked()), (2, 0));
        }
    }
}

#[test]
fn aggregation_matches_direct_oracle() {
    for n in [2usize, 3, 7, 16, 50] {
        for seed in 0..5 {
            let topo = Topology::build(n, seed).unwrap();
            let count = |v: VirtualId| (v.owner as u64 % 3) + u64::from(v.kind == Kind::Middle);
            let direct = aggregate_direct(&topo, count, |p: &[u64]| p.iter().sum());
            for mode in [SimMode::Sync, SimMode::Async] {
                let sim = AggregationSim::new(topo.clone(), CountInterval { count });
                let mut eng = Engine::new(sim, engine_cfg(mode, seed));
                let t = run(&mut eng, mode, seed);
                assert_eq!(eng.proto.total(), Some(&direct));
                // Shares tile [1, total] with one run per virtual node.
                let mut runs: Vec<(u64, u64)> = topo.order().iter().map(|&v| *eng.proto.share(v).unwrap()).collect();
                runs.sort();
                let mut next = 1;
                for (first, len) in runs.into_iter().filter(|r| r.1 > 0) {
                    assert_eq!(first, next);
                    next += len;
                }
                assert_eq!(next, direct + 1);
                if mode == SimMode::Sync {
                    assert!(t <= 2 * topo.height() as u64 + 4, "{t} rounds for height {}", topo.height());
                }
            }
        }
    }
}

#[test]
fn tree_contains_every_virtual_node_once() {
    for n in [2usize, 5, 64, 300] {
        let t = Topology::build(n, 11).unwrap();
        let mut seen = vec![false; t.virtual_count()];
        let mut stack = vec![t.root()];
        while let Some(v) = stack.pop() {
            assert!(!seen[v.index()]);
            seen[v.index()] = true;
            stack.extend(t.children(v));
        }
        assert!(seen.iter().all(|&s| s));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn labels_are_sorted_and_sibling_rules_hold(n in 2usize..200, seed in any::<u64>()) {
        let t = Topology::build(n, seed).unwrap();
        let labels: Vec<u64> = t.order().iter().map(|&v| t.label(v)).collect();
        prop_assert!(labels.windows(2).all(|w| w[0] < w[1]));
        for v in 0..n as u32 {
            let m = t.middle_label(v);
            prop_assert_eq!(t.label(VirtualId::left(v)), m >> 1);
            prop_assert_eq!(t.label(VirtualId::right(v)), (m >> 1) | 1 << 63);
        }
        prop_assert_eq!(t.parent(t.root()), None);
        for &v in t.order() {
            if v != t.root() {
                let p = t.parent(v).unwrap();
                prop_assert!(t.children(p).contains(&v));
            }
        }
    }

    #[test]
    fn routes_end_at_responsible_node(n in 2usize..64, seed in any::<u64>(), key in any::<u64>(), start in 0usize..192) {
        let t = Topology::build(n, seed).unwrap();
        let s = t.order()[start % t.virtual_count()];
        let p = route(&t, s, key);
        prop_assert_eq!(*p.last().unwrap(), t.responsible(key));
        prop_assert_eq!(t.order().iter().filter(|&&v| t.is_responsible(v, key)).count(), 1);
        for w in p.windows(2) {
            prop_assert_ne!(w[0], w[1]);
        }
    }
}

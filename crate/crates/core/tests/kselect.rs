use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skeap::kselect::{run_kselect, KParams, Phase};
use skeap::sim::{ProtocolKind, SimConfig, SimMode};

fn cfg(n: usize, seed: u64, mode: SimMode, pmax: u64) -> SimConfig {
    let mut c = SimConfig::new(ProtocolKind::Kselect, n, seed);
    c.mode = mode;
    c.priority_count = pmax;
    c
}

fn audited() -> KParams {
    KParams { audit: true, ..KParams::default() }
}

#[test]
fn sync_matches_sort_oracle() {
    for n in [4usize, 8, 16] {
        for m in [n, n * n, n * n * n] {
            for seed in 0..10u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n * m) as u64);
                let k = rng.gen_range(1..=m as u64);
                let o = run_kselect(&cfg(n, seed, SimMode::Sync, (m * m) as u64), m, k, audited()).unwrap();
                assert!(o.matches_oracle(), "n={n} m={m} seed={seed} k={k}: {:?} vs {:?}", o.result, o.expected);
                assert_eq!(o.stats.audit_failures, 0);
            }
        }
    }
}

#[test]
fn async_matches_sort_oracle() {
    for seed in 0..20u64 {
        let n = 8;
        let m = 200;
        let k = 1 + seed * 9;
        let o = run_kselect(&cfg(n, seed, SimMode::Async, 50), m, k, audited()).unwrap();
        assert!(o.matches_oracle(), "seed={seed}");
        assert_eq!(o.stats.audit_failures, 0);
    }
}

#[test]
fn extremes_and_out_of_range() {
    let c = cfg(8, 3, SimMode::Sync, 1000);
    for k in [1u64, 300] {
        let o = run_kselect(&c, 300, k, audited()).unwrap();
        assert!(o.matches_oracle());
    }
    let o = run_kselect(&c, 300, 301, KParams::default()).unwrap();
    assert!(o.result.is_err());
    let o = run_kselect(&c, 300, 0, KParams::default()).unwrap();
    assert!(o.result.is_err());
}

#[test]
fn three_elements_sort_by_rank() {
    // Elements 9, 2, 5 have ranks 3, 1, 2.
    use skeap::kselect::{KSelectSim, KParams as P};
    use skeap::sim::{Engine, EngineConfig};
    use skeap::{Element, Topology, VirtualId};
    let topo = Topology::build(3, 4).unwrap();
    let elems = [Element::new(9, 0, 0), Element::new(2, 1, 0), Element::new(5, 2, 0)];
    for (k, want) in [(1u64, 2u64), (2, 5), (3, 9)] {
        let mut sets = vec![Vec::new(); topo.virtual_count()];
        for e in elems {
            sets[VirtualId::middle(e.origin).index()].push(e);
        }
        let mut eng = Engine::new(KSelectSim::new(topo.clone(), sets, k, 4, P::default()), EngineConfig::default());
        eng.run_sync().unwrap();
        assert_eq!(eng.proto.ks.result().unwrap().as_ref().unwrap().priority, want);
    }
}

#[test]
fn copy_tree_load_is_constant_with_sqrt_sample() {
    // With sample factor 1 there are about sqrt(3n) trees of as many copies.
    let params = KParams { sample_factor: 1.0, max_phase2: 2, ..KParams::default() };
    for n in [16usize, 64] {
        let mut means = Vec::new();
        for seed in 0..10 {
            let o = run_kselect(&cfg(n, seed, SimMode::Sync, 1 << 40), n * n, 1 + seed * 7, params.clone()).unwrap();
            let p2: Vec<_> = o.stats.sorts.iter().filter(|l| l.phase == Phase::P2).collect();
            assert!(!p2.is_empty());
            means.extend(p2.iter().map(|l| l.mean_trees_per_node(n)));
        }
        let mean = means.iter().sum::<f64>() / means.len() as f64;
        assert!(mean <= 4.0, "n={n}: mean trees per node {mean:.2}");
    }
}

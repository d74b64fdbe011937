use skeap::consistency::{check_heap_consistency, check_serializable, matching_from_history, TieRule};
use skeap::sim::{ProtocolKind, SimConfig, SimMode};
use skeap::skeap_plus::{constructed_order, phase_outcomes, run_skeap_plus, run_skeap_plus_with, PlusConfig, SkeapPlusSim};
use skeap::Topology;

fn cfg(n: usize, seed: u64, mode: SimMode) -> SimConfig {
    let mut c = SimConfig::new(ProtocolKind::SkeapPlus, n, seed);
    c.mode = mode;
    c.epochs = 4;
    c.priority_count = (n * n) as u64;
    c.lambda = 2;
    c
}

fn check(out: &skeap::skeap_plus::PlusOutcome) {
    let h = &out.records;
    let o = constructed_order(h);
    check_serializable(h, &o, TieRule::Strict).unwrap();
    let m = matching_from_history(h).unwrap();
    check_heap_consistency(h, &o, &m).unwrap();
    for p in phase_outcomes(h) {
        assert!(p.matches(), "epoch {}: {:?} vs {:?}", p.epoch, p.returned, p.expected);
    }
    let ins = h.iter().filter(|r| r.is_insert()).count() as u64;
    let matched = h.iter().filter(|r| r.returned.is_some()).count() as u64;
    assert_eq!(out.heap_size, ins - matched);
}

#[test]
fn sync_runs_pass_checks() {
    for seed in 0..15 {
        let out = run_skeap_plus(&cfg(8, seed, SimMode::Sync)).unwrap();
        assert!(!out.records.is_empty());
        check(&out);
    }
}

#[test]
fn async_runs_pass_checks() {
    for seed in 0..30 {
        let out = run_skeap_plus(&cfg(4, seed, SimMode::Async)).unwrap();
        check(&out);
    }
}

#[test]
fn one_epoch_returns_smallest_two() {
    let sim = cfg(3, 7, SimMode::Sync);
    let topo = Topology::build(3, 7).unwrap();
    let mut pc = PlusConfig::from_sim(&sim);
    pc.epochs = 1;
    let mut p = SkeapPlusSim::new(topo, pc);
    p.preload(0, Some(5));
    p.preload(1, Some(1));
    p.preload(2, Some(3));
    p.preload(0, None);
    p.preload(2, None);
    let out = run_skeap_plus_with(p, &sim).unwrap();
    let mut got: Vec<u64> = out.records.iter().filter_map(|r| r.returned.map(|e| e.priority)).collect();
    got.sort();
    assert_eq!(got, vec![1, 3]);
    assert_eq!(out.heap_size, 1);
    check(&out);
}

#[test]
fn over_deletion_returns_bottom() {
    let sim = cfg(4, 2, SimMode::Sync);
    let mut pc = PlusConfig::from_sim(&sim);
    pc.epochs = 1;
    let mut p = SkeapPlusSim::new(Topology::build(4, 2).unwrap(), pc);
    p.preload(3, Some(9));
    for v in 0..4 {
        p.preload(v, None);
    }
    let out = run_skeap_plus_with(p, &sim).unwrap();
    let bottoms = out.records.iter().filter(|r| !r.is_insert() && r.returned.is_none()).count();
    assert_eq!(bottoms, 3);
    assert_eq!(out.epochs[0].k_star, 1);
    check(&out);
}

#[test]
fn no_deletes_skips_selection() {
    let sim = cfg(4, 5, SimMode::Sync);
    let mut pc = PlusConfig::from_sim(&sim);
    pc.epochs = 1;
    let mut p = SkeapPlusSim::new(Topology::build(4, 5).unwrap(), pc);
    p.preload(0, Some(2));
    p.preload(1, Some(7));
    let out = run_skeap_plus_with(p, &sim).unwrap();
    assert!(out.epochs[0].kselect.is_none());
    assert_eq!(out.heap_size, 2);
}

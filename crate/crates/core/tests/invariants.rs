use std::collections::{HashMap, HashSet};
use std::fs;

use proptest::prelude::*;

use skeap::consistency::{
    apply_oracle, brute_force_order, check_serializable, exists_serial_order_naive, order_by_serial, sequential_oracle,
    verdict, OperationRecord, TieRule,
};
use skeap::experiment::{run_experiment, ExperimentSpec};
use skeap::sim::{ProtocolKind, SimConfig, SimMode};
use skeap::skeap::{anchor_assign, decompose, run_skeap, AnchorState, Batch};
use skeap::skeap_plus::run_skeap_plus;
use skeap::Element;

fn skeap_cfg(n: usize, seed: u64, mode: SimMode, delay: u64) -> SimConfig {
    SimConfig { mode, async_delay_max: delay, priority_count: 3, lambda: 2, ..SimConfig::new(ProtocolKind::Skeap, n, seed) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_are_deterministic_and_conserve_messages(n in 2usize..10, seed in any::<u64>(), delay in 1u64..20, sync in any::<bool>()) {
        let mode = if sync { SimMode::Sync } else { SimMode::Async };
        let c = skeap_cfg(n, seed, mode, delay);
        let a = run_skeap(&c).unwrap();
        let b = run_skeap(&c).unwrap();
        prop_assert_eq!(a.trace_digest, b.trace_digest);
        prop_assert_eq!(a.metrics.to_json(), b.metrics.to_json());
        prop_assert_eq!(&a.records, &b.records);
        prop_assert_eq!(a.metrics.sent, a.metrics.delivered);
        if sync {
            let per_round: u64 = a.metrics.per_round.iter().map(|r| r.delivered).sum();
            prop_assert_eq!(per_round, a.metrics.delivered);
            for r in &a.metrics.per_round {
                prop_assert!(r.max_congestion as u64 <= r.delivered);
            }
        } else {
            prop_assert!(a.max_delay <= delay);
        }
    }

    #[test]
    fn skeap_serial_indices_follow_issue_order(n in 2usize..8, seed in any::<u64>(), delay in 1u64..16) {
        let out = run_skeap(&skeap_cfg(n, seed, SimMode::Async, delay)).unwrap();
        let mut last: HashMap<u32, (u64, u64)> = HashMap::new();
        let mut by_node: Vec<&OperationRecord> = out.records.iter().collect();
        by_node.sort_by_key(|r| (r.node, r.seq));
        for r in by_node {
            if let Some(&(seq, serial)) = last.get(&r.node) {
                prop_assert!(r.seq > seq && r.serial_index > serial);
            }
            last.insert(r.node, (r.seq, r.serial_index));
        }
        let serials: HashSet<u64> = out.records.iter().map(|r| r.serial_index).collect();
        prop_assert_eq!(serials.len(), out.records.len());
    }

    #[test]
    fn skeap_plus_conserves_elements(n in 2usize..6, seed in any::<u64>(), delay in 1u64..12) {
        let c = SimConfig {
            mode: SimMode::Async,
            async_delay_max: delay,
            priority_count: (n * n) as u64,
            epochs: 3,
            ..SimConfig::new(ProtocolKind::SkeapPlus, n, seed)
        };
        let out = run_skeap_plus(&c).unwrap();
        let ins = out.records.iter().filter(|r| r.is_insert()).count() as u64;
        let got = out.records.iter().filter(|r| r.returned.is_some()).count() as u64;
        prop_assert_eq!(out.heap_size, ins - got);
        prop_assert_eq!(out.stored_keys.len() as u64, out.heap_size);
        let mut heap = 0u64;
        for e in &out.epochs {
            let before = heap + e.inserts;
            prop_assert_eq!(e.k_star, e.deletes.min(before));
            heap = before - e.k_star;
            prop_assert_eq!(e.m, heap);
        }
    }

    #[test]
    fn anchor_positions_are_unique_and_matched_once(
        waves in prop::collection::vec(prop::collection::vec((prop::collection::vec(0u64..4, 3), 0u64..5), 1..4), 1..6),
        parts in 1usize..4,
    ) {
        let p = 3;
        let mut st = AnchorState::new(p);
        let mut ins_pos: HashSet<(usize, u64)> = HashSet::new();
        let mut del_pos: HashSet<(usize, u64)> = HashSet::new();
        for w in &waves {
            // Split one wave's entries round-robin into sub-batches.
            let subs: Vec<Batch> = (0..parts)
                .map(|k| {
                    let es: Vec<(&[u64], u64)> = w
                        .iter()
                        .enumerate()
                        .map(|(j, (ins, d))| if j % parts == k { (ins.as_slice(), *d) } else { (&[0, 0, 0][..], 0) })
                        .collect();
                    Batch::from_entries(p, &es)
                })
                .collect();
            let refs: Vec<&Batch> = subs.iter().collect();
            let all = Batch::combine_all(p, refs.iter().copied());
            let a = anchor_assign(&mut st, &all);
            prop_assert!(st.invariant_holds());
            let shares = decompose(&a, &refs).unwrap();
            // All inserts of a wave are placed before any of its deletes are checked.
            for (sub, share) in subs.iter().zip(&shares) {
                for (e, sa) in sub.entries.iter().zip(share) {
                    prop_assert_eq!(sa.inserts(), e.inserts());
                    prop_assert_eq!(sa.deletes(), e.del);
                    for (q, iv) in sa.ins.iter().enumerate() {
                        if let Some((x, y)) = *iv {
                            for pos in x..=y {
                                prop_assert!(ins_pos.insert((q, pos)));
                            }
                        }
                    }
                }
            }
            for share in &shares {
                for sa in share {
                    for (q, pos) in sa.del_positions() {
                        let key = (q as usize - 1, pos);
                        prop_assert!(ins_pos.contains(&key));
                        prop_assert!(del_pos.insert(key));
                    }
                }
            }
        }
        prop_assert_eq!(ins_pos.len() as u64 - del_pos.len() as u64, st.total());
    }

    #[test]
    fn oracle_output_passes_every_check(ops in prop::collection::vec((0u32..3, any::<bool>(), 1u64..6), 0..60)) {
        let mut seq = [0u64; 3];
        let mut h: Vec<OperationRecord> = ops
            .iter()
            .enumerate()
            .map(|(i, &(v, is_ins, p))| {
                let s = seq[v as usize];
                seq[v as usize] += 1;
                let mut r = if is_ins { OperationRecord::insert(v, s, Element::new(p, v, s)) } else { OperationRecord::delete(v, s, None) };
                r.serial_index = i as u64;
                r
            })
            .collect();
        let order = order_by_serial(&h);
        let run = sequential_oracle(&h, &order);
        apply_oracle(&mut h, &run);
        let v = verdict(&h, &order, TieRule::Strict);
        prop_assert!(v.serializable && v.locally_consistent && v.heap_consistent, "{:?}", v.violation);
    }

    #[test]
    fn brute_force_agrees_with_enumeration(
        ops in prop::collection::vec((0u32..2, any::<bool>(), 1u64..4), 1..7),
        returns in prop::collection::vec(0usize..8, 7),
    ) {
        let mut seq = [0u64; 2];
        let mut h: Vec<OperationRecord> = ops
            .iter()
            .map(|&(v, is_ins, p)| {
                let s = seq[v as usize];
                seq[v as usize] += 1;
                if is_ins { OperationRecord::insert(v, s, Element::new(p, v, s)) } else { OperationRecord::delete(v, s, None) }
            })
            .collect();
        // Arbitrary outcomes: index into the inserted elements, out of range is bottom.
        let ins: Vec<Element> = h.iter().filter_map(|r| r.element()).collect();
        for (r, &k) in h.iter_mut().zip(&returns) {
            if !r.is_insert() {
                r.returned = ins.get(k).copied();
            }
        }
        for local in [false, true] {
            let found = brute_force_order(&h, TieRule::Strict, local);
            prop_assert_eq!(found.is_some(), exists_serial_order_naive(&h, TieRule::Strict, local));
            if let Some(o) = found {
                prop_assert!(check_serializable(&h, &o, TieRule::Strict).is_ok());
            }
        }
    }
}

#[test]
fn experiment_reruns_are_byte_identical() {
    let base = std::env::temp_dir().join(format!("skeap-rerun-{}", std::process::id()));
    let dirs = [base.join("a"), base.join("b")];
    for d in &dirs {
        let mut spec = ExperimentSpec::new(ProtocolKind::Kselect, vec![4, 8, 16], 2);
        spec.out = Some(d.clone());
        run_experiment(&spec).unwrap();
    }
    let mut names: Vec<_> = fs::read_dir(dirs[0].join("metrics")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 6);
    for f in ["runs.jsonl", "verdicts.jsonl", "summary.json", "summary.csv"] {
        assert_eq!(fs::read(dirs[0].join(f)).unwrap(), fs::read(dirs[1].join(f)).unwrap(), "{f}");
    }
    for name in names {
        let p = |d: &std::path::PathBuf| d.join("metrics").join(&name);
        assert_eq!(fs::read(p(&dirs[0])).unwrap(), fs::read(p(&dirs[1])).unwrap());
    }
    fs::remove_dir_all(base).unwrap();
}

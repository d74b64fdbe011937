//! The three-node, two-priority example: sub-batches are combined, the
//! anchor assigns position intervals and they are decomposed back.

use skeap::sim::{ProtocolKind, SimConfig};
use skeap::skeap::{
    anchor_assign, decompose, format_assignment, run_skeap_with, AnchorState, Batch, ReqKind, SkeapConfig, SkeapSim,
};
use skeap::Topology;

fn main() {
    let own = Batch::from_entries(2, &[(&[1, 0], 0)]);
    let left = Batch::from_entries(2, &[(&[1, 0], 2)]);
    let right = Batch::from_entries(2, &[(&[2, 1], 1)]);
    let all = Batch::combine_all(2, [&own, &left, &right]);
    println!("sub-batches {own} {left} {right}, combined {all}");

    let mut anchor = AnchorState::new(2);
    let a = anchor_assign(&mut anchor, &all);
    println!("anchor assigns {}", format_assignment(&a));
    for (name, part) in ["own", "child 1", "child 2"].iter().zip(decompose(&a, &[&own, &left, &right]).expect("decompose")) {
        println!("  {name:<8}{}", format_assignment(&part));
    }
    println!("anchor state first {:?} last {:?}", anchor.first, anchor.last);

    // The same requests on a live 3-node overlay.
    let sim = SimConfig { epochs: 1, priority_count: 2, ..SimConfig::new(ProtocolKind::Skeap, 3, 1) };
    let mut p = SkeapSim::new(Topology::build(3, 1).expect("topology"), SkeapConfig::from_sim(&sim));
    for (node, req) in [
        (0, ReqKind::Insert(1)),
        (1, ReqKind::Insert(1)),
        (1, ReqKind::Delete),
        (1, ReqKind::Delete),
        (2, ReqKind::Insert(1)),
        (2, ReqKind::Insert(1)),
        (2, ReqKind::Insert(2)),
        (2, ReqKind::Delete),
    ] {
        p.preload(node, req);
    }
    let out = run_skeap_with(p, &sim).expect("run");
    for (b, a) in &out.anchor_log {
        println!("simulated wave: batch {b} -> {}", format_assignment(a));
    }
    for r in &out.records {
        let what = match (r.element(), r.returned) {
            (Some(e), _) => format!("insert p={}", e.priority),
            (None, Some(e)) => format!("deletemin -> {e}"),
            (None, None) => "deletemin -> bottom".to_string(),
        };
        println!("  node {} #{} serial {:>2}: {what}", r.node, r.seq, r.serial_index);
    }
}

//! Builds an overlay, prints its virtual nodes and routes a few keys.
//!
//! cargo run --example overlay_routing -- 8 42

use skeap::overlay::route;
use skeap::sim::hash::{hash_point, point_to_f64, tag};
use skeap::Topology;

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(8);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(42);
    let t = Topology::build(n, seed).expect("topology");

    println!("{} real nodes, {} virtual nodes, tree height {}", t.n(), t.virtual_count(), t.height());
    for &v in t.order() {
        let parent = t.parent(v).map_or("-".to_string(), |p| format!("{:?}{}", p.kind, p.owner));
        println!("  {:>8.5}  {:?}{:<4} parent {parent}", t.label_f64(v), v.kind, v.owner);
    }

    let start = t.order()[0];
    for i in 0..4 {
        let key = hash_point(tag::WORKLOAD, &[i], seed);
        let path = route(&t, start, key);
        let end = path.last().expect("path");
        println!(
            "key {:.5}: {} hops to {:?}{} (label {:.5})",
            point_to_f64(key),
            path.len() - 1,
            end.kind,
            end.owner,
            t.label_f64(*end)
        );
    }
}

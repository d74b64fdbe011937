//! The checkers on hand-made histories: a valid one, one that needs
//! reordering, and one no order can explain.

use skeap::consistency::{brute_force_order, order_by_serial, verdict, OperationRecord, TieRule};
use skeap::Element;

fn show(name: &str, h: &[OperationRecord]) {
    let v = verdict(h, &order_by_serial(h), TieRule::Strict);
    println!("{name}: recorded order {v:?}");
    match brute_force_order(h, TieRule::Strict, true) {
        Some(o) => println!("    witness order {o:?}"),
        None => println!("    no sequentially consistent order exists"),
    }
}

fn with_serials(mut h: Vec<OperationRecord>) -> Vec<OperationRecord> {
    for (i, r) in h.iter_mut().enumerate() {
        r.serial_index = i as u64;
    }
    h
}

fn main() {
    let a = Element::new(1, 0, 0);
    let b = Element::new(2, 0, 1);
    show(
        "valid",
        &with_serials(vec![
            OperationRecord::insert(0, 0, a),
            OperationRecord::insert(0, 1, b),
            OperationRecord::delete(1, 0, Some(a)),
            OperationRecord::delete(1, 1, Some(b)),
            OperationRecord::delete(1, 2, None),
        ]),
    );
    show(
        "needs reordering",
        &with_serials(vec![OperationRecord::delete(1, 0, Some(a)), OperationRecord::insert(0, 0, a)]),
    );
    show(
        "wrong minimum",
        &with_serials(vec![
            OperationRecord::insert(0, 0, a),
            OperationRecord::insert(0, 1, b),
            OperationRecord::delete(1, 0, Some(b)),
        ]),
    );
}

//! Orders concurrent recoveries: overlapping IB sets wait for earlier
//! detections, disjoint ones run in the same wave.

use std::collections::BTreeSet;

use ibguard::imr::coordinate;
use ibguard::model::TxnId;

fn main() {
    let detections = vec![
        (TxnId(3), BTreeSet::from([0, 1])),
        (TxnId(8), BTreeSet::from([2])),
        (TxnId(11), BTreeSet::from([1, 3])),
        (TxnId(15), BTreeSet::from([3])),
    ];
    for e in coordinate(&detections) {
        println!("{} ibs {:?} waits for {:?} wave {}", e.malicious_txn, e.ibs, e.waits_for, e.wave);
    }
}

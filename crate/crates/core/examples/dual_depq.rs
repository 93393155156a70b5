//! The generic two-queue construction over heaps and over sorted lists.

use depq::{Depq, DualDepq, End, PriorityQueue};

fn main() {
    let heap = DualDepq::heap();
    for k in [5, 1, 9, 3, 7] {
        heap.insert(k);
    }
    println!(
        "heap: min {:?}, max {:?}",
        heap.extract_min(),
        heap.extract_max()
    );
    // The reserved items linger in the opposite queue until skipped.
    println!(
        "heap sizes after two extracts: min queue {}, max queue {}",
        heap.queue(End::Min).contents().len(),
        heap.queue(End::Max).contents().len()
    );

    let pruned = DualDepq::heap().with_optional_delete(true);
    for k in [5, 1, 9, 3, 7] {
        pruned.insert(k);
    }
    pruned.extract_min();
    pruned.extract_max();
    println!(
        "with delete: min queue {}, max queue {}",
        pruned.queue(End::Min).contents().len(),
        pruned.queue(End::Max).contents().len()
    );

    let list = DualDepq::list().expect("arena has room for sentinels");
    for k in [4, 2, 8] {
        list.insert(k);
    }
    println!(
        "list: max {:?}, min {:?}, remaining {:?}",
        list.extract_max(),
        list.extract_min(),
        list.remaining()
    );
}

//! The combining engine on its own: a shared counter updated by whichever
//! thread holds the combiner role.

use std::sync::atomic::{AtomicU64, Ordering};

use depq::CcSynch;

fn main() {
    let total = AtomicU64::new(0);
    let batches = AtomicU64::new(0);
    let c = CcSynch::from_fns(
        16,
        |x: u64| total.fetch_add(x, Ordering::Relaxed) + x,
        || {
            batches.fetch_add(1, Ordering::Relaxed);
        },
    )
    .unwrap();
    std::thread::scope(|s| {
        for _ in 0..4 {
            s.spawn(|| {
                for _ in 0..10_000 {
                    c.announce(1);
                }
            });
        }
    });
    let n = c.counts();
    println!(
        "sum {} after {} requests, {} batches, finalizer ran {} times",
        total.load(Ordering::Relaxed),
        n.applies,
        n.batches,
        batches.load(Ordering::Relaxed)
    );
    println!("batch size histogram (powers of two): {:?}", n.batch_sizes);
}

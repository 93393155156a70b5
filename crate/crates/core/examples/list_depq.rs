//! Lock-free inserts and combined extracts on the list-based queue.

use depq::{Depq, End, ListDepq};

fn main() {
    let q = ListDepq::new();
    std::thread::scope(|s| {
        for t in 0..4 {
            let q = &q;
            s.spawn(move || {
                for k in 0..25 {
                    q.insert(k * 4 + t);
                }
            });
        }
    });
    println!("min list: {}", q.dump(End::Min));

    let (lo, hi) = (q.extract_min(), q.extract_max());
    println!("extract_min -> {lo:?}, extract_max -> {hi:?}");
    println!("audit passed: {}", q.audit().passed());

    let mut n = 0;
    while q.extract_max().is_some() {
        n += 1;
    }
    println!("drained {n} more; stats: {:?}", q.stats().reserve_failures);
}

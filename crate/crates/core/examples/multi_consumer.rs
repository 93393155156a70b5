//! Several extractors per end through the serializing facade.

use depq::{make_multi_consumer, Depq, DualDepq, End, MultiConsumerMode};

fn main() {
    for mode in [MultiConsumerMode::TwoLocks, MultiConsumerMode::Combining] {
        let q = make_multi_consumer(DualDepq::heap(), mode, 32).unwrap();
        for k in 0..10_000 {
            q.insert(k);
        }
        let counts: Vec<usize> = std::thread::scope(|s| {
            let hs: Vec<_> = [End::Min, End::Min, End::Max, End::Max]
                .into_iter()
                .map(|end| {
                    let q = &q;
                    s.spawn(move || std::iter::from_fn(|| q.extract(end)).count())
                })
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).collect()
        });
        println!(
            "{mode}: extracted {counts:?} (total {}), lost reservations min {} max {}",
            counts.iter().sum::<usize>(),
            q.inner().reserve_failures(End::Min),
            q.inner().reserve_failures(End::Max)
        );
        if let Some(c) = q.combining(End::Min) {
            println!(
                "  min-end combining: {} requests in {} batches",
                c.applies, c.batches
            );
        }
    }
}

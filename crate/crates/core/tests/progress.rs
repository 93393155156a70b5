//! Progress properties of the generic construction.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use depq::sched::{Gate, Point};
use depq::{make_multi_consumer, Depq, DualDepq, End, MultiConsumerMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WAIT: Duration = Duration::from_secs(10);

// A max extractor can lose every round: each time it pulls an item, a min
// extractor reserves that item first and a new one is inserted.
#[test]
fn extract_is_not_wait_free() {
    let rounds = 100;
    let d = DualDepq::heap().with_failure_log();
    d.insert(0);
    let gate = Gate::new(Point::DualAfterPqExtract(End::Max));
    let (got, lost) = std::thread::scope(|s| {
        let h = s.spawn(|| {
            let _g = gate.install();
            d.extract_counting(End::Max)
        });
        for r in 0..rounds {
            assert!(gate.wait_arrivals(r + 1, WAIT), "round {r}");
            assert_eq!(d.extract_min(), Some(r as i64));
            if r + 1 < rounds {
                d.insert(r as i64 + 1);
            }
            gate.release(1);
        }
        h.join().unwrap()
    });
    assert_eq!((got, lost), (None, rounds));
    assert_eq!(d.reserve_failures(End::Max), rounds as u64);
    assert_eq!(d.reserve_failures(End::Min), 0);
    assert!(d.failures_charged());
}

// Every lost reservation is paid for by a successful extract at the other
// end, so failures never outnumber the other end's successes.
#[test]
fn failures_are_charged_to_the_other_end() {
    for (seed, mode) in [
        (1, MultiConsumerMode::TwoLocks),
        (2, MultiConsumerMode::Combining),
        (3, MultiConsumerMode::TwoLocks),
    ] {
        let q = make_multi_consumer(DualDepq::heap().with_failure_log(), mode, 16).unwrap();
        let stop = AtomicBool::new(false);
        let got = std::thread::scope(|s| {
            let (q, stop) = (&q, &stop);
            let ins = s.spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..5_000 {
                    q.insert(rng.gen_range(0..50));
                }
                stop.store(true, Ordering::SeqCst);
            });
            let ext: Vec<_> = End::BOTH
                .into_iter()
                .flat_map(|end| [end, end])
                .map(|end| {
                    s.spawn(move || {
                        let mut n = 0u64;
                        while !stop.load(Ordering::SeqCst) {
                            n += q.extract(end).is_some() as u64;
                        }
                        (end, n)
                    })
                })
                .collect();
            ins.join().unwrap();
            ext.into_iter()
                .map(|h| h.join().unwrap())
                .collect::<Vec<_>>()
        });
        let wins = |end: End| -> u64 { got.iter().filter(|g| g.0 == end).map(|g| g.1).sum() };
        let d = q.inner();
        assert!(d.failures_charged());
        for end in End::BOTH {
            assert!(d.reserve_failures(end) <= wins(end.opposite()));
        }
        assert!(d.audit());
    }
}

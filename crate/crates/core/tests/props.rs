//! Sequential behaviour of every implementation against the reference
//! queue, and history files surviving a round trip.

use depq::lincheck::gen::{random_history, GenConfig};
use depq::lincheck::{check, History};
use depq::{Depq, DepqOp, DualDepq, ListDepq, SeqDepq};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn op() -> impl Strategy<Value = DepqOp> {
    prop_oneof![
        2 => (-20i64..20).prop_map(DepqOp::Insert),
        1 => Just(DepqOp::ExtractMin),
        1 => Just(DepqOp::ExtractMax),
    ]
}

fn run(q: &dyn Depq, ops: &[DepqOp]) -> Vec<Option<i64>> {
    ops.iter()
        .map(|&o| match o {
            DepqOp::Insert(k) => {
                q.insert(k);
                None
            }
            DepqOp::ExtractMin => q.extract_min(),
            DepqOp::ExtractMax => q.extract_max(),
        })
        .collect()
}

proptest! {
    #[test]
    fn implementations_match_reference(ops in prop::collection::vec(op(), 0..200)) {
        let mut r = SeqDepq::new();
        let want: Vec<_> = ops.iter().map(|&o| r.apply(o)).collect();
        prop_assert_eq!(run(&ListDepq::new(), &ops), want.clone());
        prop_assert_eq!(run(&DualDepq::heap(), &ops), want.clone());
        prop_assert_eq!(run(&DualDepq::heap().with_optional_delete(true), &ops), want.clone());
        prop_assert_eq!(run(&DualDepq::list().unwrap(), &ops), want);
    }

    #[test]
    fn history_jsonl_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_history(&mut rng, GenConfig::default());
        let text = h.to_jsonl();
        let back = History::from_jsonl(&text).unwrap();
        prop_assert_eq!(&back, &h);
        prop_assert_eq!(back.to_jsonl(), text);
        prop_assert!(check(&back).unwrap().is_linearizable());
    }
}

#[test]
fn history_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = random_history(&mut rng, GenConfig::default());
    let path = std::env::temp_dir().join(format!("depq-history-{}.jsonl", std::process::id()));
    std::fs::write(&path, h.to_jsonl()).unwrap();
    let (back, v) = depq::harness::lincheck_file(&path, Default::default()).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(back, h);
    assert!(v.is_linearizable());
}

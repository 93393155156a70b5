//! Record a concurrent history, check it, and check a hand-written one
//! that has no linearization.

use depq::lincheck::{check, History, Recorder, Verdict};
use depq::{DepqOp, ListDepq};

fn main() {
    let q = ListDepq::new();
    let rec = Recorder::new();
    rec.call(0, &q, DepqOp::Insert(1));
    rec.call(0, &q, DepqOp::Insert(2));
    std::thread::scope(|s| {
        s.spawn(|| rec.call(1, &q, DepqOp::ExtractMin));
        s.spawn(|| rec.call(2, &q, DepqOp::ExtractMax));
        s.spawn(|| rec.call(3, &q, DepqOp::Insert(3)));
    });
    let h = rec.history();
    print!("{}", h.to_jsonl());
    match check(&h).unwrap() {
        Verdict::Linearizable(order) => println!("linearizable, witness {order:?}"),
        Verdict::NotLinearizable => println!("NOT linearizable"),
    }

    let bad = History::from_jsonl(
        r#"{"thread":0,"kind":"Insert","arg":1,"result":null,"invoke":0,"response":1}
{"thread":1,"kind":"ExtractMin","arg":null,"result":1,"invoke":2,"response":5}
{"thread":2,"kind":"ExtractMax","arg":null,"result":1,"invoke":3,"response":4}
"#,
    )
    .unwrap();
    println!("one item returned twice: {:?}", check(&bad).unwrap());
}

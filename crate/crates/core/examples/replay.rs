//! Forced interleavings: the dual-consumer counterexample, the list twist
//! and the single-item race.

use depq::harness::{replay, Scenario};

fn main() {
    for s in Scenario::ALL {
        match replay(s) {
            Ok(r) => print!("{r}"),
            Err(e) => println!("{s}: {e}"),
        }
    }
}

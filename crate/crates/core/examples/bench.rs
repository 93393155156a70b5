//! A short timed run of each implementation, reported as CSV.

use depq::harness::{run_bench, Impl, RunLength, RunReport, WorkloadConfig};
use depq::MultiConsumerMode;

fn main() {
    println!("{}", RunReport::csv_header());
    for (implementation, mode) in [
        (Impl::ListDepq, MultiConsumerMode::Combining),
        (Impl::DualHeap, MultiConsumerMode::TwoLocks),
        (Impl::DualHeap, MultiConsumerMode::Combining),
        (Impl::DualList, MultiConsumerMode::Combining),
    ] {
        let cfg = WorkloadConfig {
            implementation,
            mode,
            threads_insert: 2,
            threads_min: 1,
            threads_max: 1,
            prefill: 500,
            length: RunLength::DurationMs(100),
            seed: 7,
            ..Default::default()
        };
        let r = run_bench(&cfg).unwrap();
        assert!(r.healthy());
        println!("{}", r.csv_row());
    }
}

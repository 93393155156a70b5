//! Checked stress windows, with and without an injected fault.

use depq::harness::{run_stress, StressConfig, WorkloadConfig};

fn main() {
    for inject in [false, true] {
        let cfg = StressConfig {
            workload: WorkloadConfig {
                threads_min: 2,
                key_range: 4,
                ignore_reservation: inject,
                ..Default::default()
            },
            windows: 200,
            ..Default::default()
        };
        let r = run_stress(&cfg).unwrap();
        println!(
            "fault injected: {inject}: {}/{} windows linearizable, {} violations",
            r.linearizable,
            r.windows,
            r.violations.len()
        );
        if let Some(v) = r.violations.first() {
            print!("first violation (window {}):\n{}", v.index, v.history);
        }
    }
}

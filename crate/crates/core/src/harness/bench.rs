//! Throughput runs with exact accounting.

use std::sync::{Arc, Barrier};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::harness::workload::{ImplCounters, RunLength, WorkloadConfig};
use crate::pq_api::End;

/// CSV column order, matching [`RunReport::csv_row`].
pub const CSV_COLUMNS: &[&str] = &[
    "schema",
    "impl",
    "mode",
    "threads_insert",
    "threads_min",
    "threads_max",
    "seed",
    "wall_ms",
    "inserts",
    "extract_min_ok",
    "extract_min_empty",
    "extract_max_ok",
    "extract_max_empty",
    "insert_ops_per_sec",
    "extract_min_ops_per_sec",
    "extract_max_ops_per_sec",
    "reserve_failures_min",
    "reserve_failures_max",
    "insert_cas_failures",
    "batches",
    "max_concurrent_combiners",
    "retired",
    "remaining",
    "audit_passed",
    "accounting_ok",
    "charging_ok",
];

#[derive(Clone, Debug, Default, Serialize)]
pub struct OpCounts {
    pub inserts: u64,
    pub extract_min_ok: u64,
    pub extract_min_empty: u64,
    pub extract_max_ok: u64,
    pub extract_max_empty: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Throughput {
    pub insert: f64,
    pub extract_min: f64,
    pub extract_max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema: u32,
    #[serde(rename = "impl")]
    pub implementation: String,
    pub mode: String,
    pub threads_insert: usize,
    pub threads_min: usize,
    pub threads_max: usize,
    pub prefill: usize,
    pub seed: u64,
    pub wall_ms: f64,
    pub ops: OpCounts,
    /// Operations per second, per kind.
    pub throughput: Throughput,
    pub counters: ImplCounters,
    pub remaining: usize,
    pub audit_passed: bool,
    /// Inserted keys equal returned keys plus remaining keys, as multisets.
    pub accounting_ok: bool,
    /// Reservation failures at each end do not exceed successful extracts
    /// at the opposite end.
    pub charging_ok: bool,
    /// Keys returned by extractors, ascending.
    #[serde(skip)]
    pub returned: Vec<i64>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn csv_header() -> String {
        CSV_COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        let o = &self.ops;
        let t = &self.throughput;
        let c = &self.counters;
        [
            self.schema.to_string(),
            self.implementation.clone(),
            self.mode.clone(),
            self.threads_insert.to_string(),
            self.threads_min.to_string(),
            self.threads_max.to_string(),
            self.seed.to_string(),
            format!("{:.3}", self.wall_ms),
            o.inserts.to_string(),
            o.extract_min_ok.to_string(),
            o.extract_min_empty.to_string(),
            o.extract_max_ok.to_string(),
            o.extract_max_empty.to_string(),
            format!("{:.1}", t.insert),
            format!("{:.1}", t.extract_min),
            format!("{:.1}", t.extract_max),
            c.reserve_failures[0].to_string(),
            c.reserve_failures[1].to_string(),
            c.insert_cas_failures.to_string(),
            c.batches.to_string(),
            c.max_concurrent_combiners.to_string(),
            c.retired.to_string(),
            self.remaining.to_string(),
            self.audit_passed.to_string(),
            self.accounting_ok.to_string(),
            self.charging_ok.to_string(),
        ]
        .join(",")
    }

    /// Every post-run check passed.
    pub fn healthy(&self) -> bool {
        self.audit_passed
            && self.accounting_ok
            && self.charging_ok
            && self.counters.protocol_violations == 0
    }
}

/// Seed for worker `index`; each worker's op stream depends only on this.
pub fn worker_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64)
        .wrapping_add(1)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

enum Role {
    Insert,
    Extract(End),
}

#[derive(Default)]
struct WorkerLog {
    inserted: Vec<i64>,
    returned: Vec<i64>,
    empty: u64,
}

/// Runs the workload and audits the result.
pub fn run_bench(cfg: &WorkloadConfig) -> Result<RunReport> {
    let q = cfg.build()?;
    let mut prefilled = Vec::with_capacity(cfg.prefill);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.prefill {
        let k = rng.gen_range(0..cfg.key_range);
        q.depq().try_insert(k)?;
        prefilled.push(k);
    }

    let roles: Vec<Role> = std::iter::repeat_with(|| Role::Insert)
        .take(cfg.threads_insert)
        .chain(std::iter::repeat_with(|| Role::Extract(End::Min)).take(cfg.threads_min))
        .chain(std::iter::repeat_with(|| Role::Extract(End::Max)).take(cfg.threads_max))
        .collect();
    let start = Arc::new(Barrier::new(roles.len() + 1));
    let (logs, wall) = std::thread::scope(|s| {
        let handles: Vec<_> = roles
            .iter()
            .enumerate()
            .map(|(i, role)| {
                let (q, start) = (&q, Arc::clone(&start));
                s.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(cfg.seed, i));
                    let mut log = WorkerLog::default();
                    start.wait();
                    let deadline = match cfg.length {
                        RunLength::DurationMs(ms) => {
                            Some(Instant::now() + Duration::from_millis(ms))
                        }
                        RunLength::OpsPerThread(_) => None,
                    };
                    let mut n = 0u64;
                    loop {
                        match (cfg.length, deadline) {
                            (RunLength::OpsPerThread(ops), _) if n >= ops => break,
                            (_, Some(d)) if n.is_multiple_of(64) && Instant::now() >= d => break,
                            _ => {}
                        }
                        n += 1;
                        match role {
                            Role::Insert => {
                                let k = rng.gen_range(0..cfg.key_range);
                                q.depq().insert(k);
                                log.inserted.push(k);
                            }
                            Role::Extract(end) => match q.depq().extract(*end) {
                                Some(k) => log.returned.push(k),
                                None => log.empty += 1,
                            },
                        }
                    }
                    log
                })
            })
            .collect();
        start.wait();
        let t0 = Instant::now();
        let logs: Vec<WorkerLog> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        (logs, t0.elapsed())
    });

    let mut ops = OpCounts::default();
    let mut inserted = prefilled;
    let mut returned = Vec::new();
    for (role, log) in roles.iter().zip(&logs) {
        match role {
            Role::Insert => ops.inserts += log.inserted.len() as u64,
            Role::Extract(End::Min) => {
                ops.extract_min_ok += log.returned.len() as u64;
                ops.extract_min_empty += log.empty;
            }
            Role::Extract(End::Max) => {
                ops.extract_max_ok += log.returned.len() as u64;
                ops.extract_max_empty += log.empty;
            }
        }
        inserted.extend(&log.inserted);
        returned.extend(&log.returned);
    }
    returned.sort_unstable();
    let remaining = q.remaining();
    let mut accounted: Vec<i64> = returned.iter().chain(&remaining).copied().collect();
    accounted.sort_unstable();
    inserted.sort_unstable();

    let counters = q.counters();
    let charging_ok = counters.reserve_failures[End::Min.index()] <= ops.extract_max_ok
        && counters.reserve_failures[End::Max.index()] <= ops.extract_min_ok;
    let secs = wall.as_secs_f64().max(1e-9);
    Ok(RunReport {
        schema: 1,
        implementation: cfg.implementation.to_string(),
        mode: cfg.mode.to_string(),
        threads_insert: cfg.threads_insert,
        threads_min: cfg.threads_min,
        threads_max: cfg.threads_max,
        prefill: cfg.prefill,
        seed: cfg.seed,
        wall_ms: wall.as_secs_f64() * 1e3,
        throughput: Throughput {
            insert: ops.inserts as f64 / secs,
            extract_min: (ops.extract_min_ok + ops.extract_min_empty) as f64 / secs,
            extract_max: (ops.extract_max_ok + ops.extract_max_empty) as f64 / secs,
        },
        ops,
        counters,
        remaining: remaining.len(),
        audit_passed: q.audit(),
        accounting_ok: accounted == inserted,
        charging_ok,
        returned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual_depq::MultiConsumerMode;
    use crate::harness::workload::Impl;

    #[test]
    fn accounting_identity_holds() {
        let cfg = WorkloadConfig {
            threads_insert: 2,
            length: RunLength::OpsPerThread(1000),
            seed: 7,
            ..Default::default()
        };
        let r = run_bench(&cfg).unwrap();
        assert!(r.healthy(), "{}", r.to_json());
        assert_eq!(r.ops.inserts, 2000);
        assert_eq!(
            r.ops.extract_min_ok as usize + r.ops.extract_max_ok as usize + r.remaining,
            2000
        );
    }

    #[test]
    fn single_thread_runs_are_deterministic() {
        let cfg = WorkloadConfig {
            threads_insert: 0,
            threads_max: 0,
            prefill: 300,
            length: RunLength::OpsPerThread(200),
            seed: 42,
            ..Default::default()
        };
        let a = run_bench(&cfg).unwrap();
        let b = run_bench(&cfg).unwrap();
        assert_eq!(a.returned, b.returned);
        assert_eq!(a.returned.len(), 200);
    }

    #[test]
    fn dual_heap_modes_pass_audits() {
        for mode in [MultiConsumerMode::TwoLocks, MultiConsumerMode::Combining] {
            let cfg = WorkloadConfig {
                implementation: Impl::DualHeap,
                mode,
                threads_min: 2,
                threads_max: 2,
                prefill: 100,
                length: RunLength::OpsPerThread(500),
                ..Default::default()
            };
            let r = run_bench(&cfg).unwrap();
            assert!(r.healthy(), "{}", r.to_json());
        }
    }

    #[test]
    fn csv_row_matches_header() {
        let cfg = WorkloadConfig {
            length: RunLength::DurationMs(5),
            ..Default::default()
        };
        let r = run_bench(&cfg).unwrap();
        assert_eq!(r.csv_row().split(',').count(), CSV_COLUMNS.len());
        assert!(r.to_json().contains("\"schema\": 1"));
    }
}

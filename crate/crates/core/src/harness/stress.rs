//! Many short concurrent windows, each recorded and checked.

use std::path::{Path, PathBuf};
use std::sync::Barrier;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::harness::bench::worker_seed;
use crate::harness::workload::WorkloadConfig;
use crate::lincheck::{check_with, CheckConfig, History, Recorder, Verdict};
use crate::oracle::DepqOp;
use crate::pq_api::End;

#[derive(Clone, Debug)]
pub struct StressConfig {
    /// Implementation, thread roles, key range, seed. Run length and
    /// prefill are ignored; windows use `ops_per_window` and
    /// `window_prefill` instead.
    pub workload: WorkloadConfig,
    pub windows: usize,
    /// Operations per window, prefill included.
    pub ops_per_window: usize,
    pub window_prefill: usize,
    /// Directory receiving one `window-NNNNN.jsonl` per window.
    pub capture: Option<PathBuf>,
    pub check: CheckConfig,
}

impl Default for StressConfig {
    fn default() -> Self {
        StressConfig {
            workload: WorkloadConfig {
                key_range: 8,
                ..Default::default()
            },
            windows: 500,
            ops_per_window: 12,
            window_prefill: 2,
            capture: None,
            check: CheckConfig::default(),
        }
    }
}

#[derive(Debug)]
pub struct WindowOutcome {
    pub index: usize,
    pub history: History,
    pub verdict: Result<Verdict>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Default)]
pub struct StressReport {
    pub windows: usize,
    pub linearizable: usize,
    /// Windows with no witness.
    pub violations: Vec<WindowOutcome>,
    /// Windows the checker could not decide (budget or bound).
    pub undecided: Vec<WindowOutcome>,
}

impl StressReport {
    pub fn all_linearizable(&self) -> bool {
        self.linearizable == self.windows
    }
}

/// Runs one window: a fresh queue, `prefill` recorded inserts on thread 0,
/// then the remaining operations spread over the configured threads, all
/// released together.
pub fn run_window(cfg: &WorkloadConfig, ops: usize, prefill: usize, seed: u64) -> Result<History> {
    let q = cfg.build()?;
    let rec = Recorder::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prefill = prefill.min(ops);
    for _ in 0..prefill {
        rec.call(0, q.depq(), DepqOp::Insert(rng.gen_range(0..cfg.key_range)));
    }

    let threads = cfg.threads();
    let mut plans: Vec<Vec<DepqOp>> = vec![Vec::new(); threads];
    for i in 0..ops - prefill {
        let t = i % threads;
        let op = if t < cfg.threads_insert {
            DepqOp::Insert(rng.gen_range(0..cfg.key_range))
        } else if t < cfg.threads_insert + cfg.threads_min {
            DepqOp::extract(End::Min)
        } else {
            DepqOp::extract(End::Max)
        };
        plans[t].push(op);
    }
    let start = Barrier::new(threads);
    std::thread::scope(|s| {
        for (t, plan) in plans.iter().enumerate() {
            let (q, rec, start) = (&q, &rec, &start);
            s.spawn(move || {
                start.wait();
                for &op in plan {
                    rec.call(t as u32 + 1, q.depq(), op);
                }
            });
        }
    });
    Ok(rec.history())
}

fn capture_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("window-{index:05}.jsonl"))
}

pub fn run_stress(cfg: &StressConfig) -> Result<StressReport> {
    cfg.workload.validate()?;
    if cfg.ops_per_window > cfg.check.bound {
        return Err(Error::InvalidConfig(format!(
            "{} ops per window exceeds the checker bound of {}",
            cfg.ops_per_window, cfg.check.bound
        )));
    }
    if let Some(dir) = &cfg.capture {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", dir.display())))?;
    }
    let mut report = StressReport {
        windows: cfg.windows,
        ..Default::default()
    };
    for index in 0..cfg.windows {
        let seed = worker_seed(cfg.workload.seed, usize::MAX - index);
        let history = run_window(&cfg.workload, cfg.ops_per_window, cfg.window_prefill, seed)?;
        let path = match &cfg.capture {
            Some(dir) => {
                let p = capture_path(dir, index);
                std::fs::write(&p, history.to_jsonl())
                    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?;
                Some(p)
            }
            None => None,
        };
        let verdict = check_with(&history, cfg.check);
        let outcome = WindowOutcome {
            index,
            history,
            verdict,
            path,
        };
        match &outcome.verdict {
            Ok(Verdict::Linearizable(_)) => report.linearizable += 1,
            Ok(Verdict::NotLinearizable) => report.violations.push(outcome),
            Err(_) => report.undecided.push(outcome),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual_depq::MultiConsumerMode;
    use crate::harness::workload::Impl;

    #[test]
    fn window_without_extracts_is_linearizable() {
        let cfg = WorkloadConfig {
            threads_insert: 3,
            threads_min: 0,
            threads_max: 0,
            ..Default::default()
        };
        let h = run_window(&cfg, 9, 0, 1).unwrap();
        assert_eq!(h.completed(), 9);
        assert!(check_with(&h, CheckConfig::default())
            .unwrap()
            .is_linearizable());
    }

    #[test]
    fn short_stress_on_each_impl() {
        for (implementation, mode) in [
            (Impl::ListDepq, MultiConsumerMode::Combining),
            (Impl::DualHeap, MultiConsumerMode::TwoLocks),
            (Impl::DualList, MultiConsumerMode::Combining),
        ] {
            let cfg = StressConfig {
                workload: WorkloadConfig {
                    implementation,
                    mode,
                    threads_min: 2,
                    threads_max: 2,
                    key_range: 6,
                    seed: 9,
                    ..Default::default()
                },
                windows: 40,
                ..Default::default()
            };
            let r = run_stress(&cfg).unwrap();
            assert!(
                r.all_linearizable(),
                "{implementation}: {:?}",
                r.violations.first().map(|v| v.history.to_string())
            );
        }
    }

    #[test]
    fn ignoring_reservations_is_caught() {
        let cfg = StressConfig {
            workload: WorkloadConfig {
                ignore_reservation: true,
                key_range: 4,
                ..Default::default()
            },
            windows: 50,
            ..Default::default()
        };
        let r = run_stress(&cfg).unwrap();
        assert!(!r.violations.is_empty());
    }

    #[test]
    fn capture_writes_one_file_per_window() {
        let dir = std::env::temp_dir().join(format!("depq-capture-{}", std::process::id()));
        let cfg = StressConfig {
            windows: 3,
            capture: Some(dir.clone()),
            ..Default::default()
        };
        let r = run_stress(&cfg).unwrap();
        assert!(r.all_linearizable());
        for i in 0..3 {
            let text = std::fs::read_to_string(capture_path(&dir, i)).unwrap();
            assert_eq!(History::from_jsonl(&text).unwrap().to_jsonl(), text);
        }
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn oversized_windows_rejected() {
        let cfg = StressConfig {
            ops_per_window: 30,
            ..Default::default()
        };
        assert!(matches!(run_stress(&cfg), Err(Error::InvalidConfig(_))));
    }
}

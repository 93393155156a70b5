//! Workload configuration and a uniform handle over every implementation.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::ccsynch::{CombinerCounts, DEFAULT_BATCH_CAP};
use crate::dual_depq::{make_multi_consumer, DualDepq, MultiConsumerDepq, MultiConsumerMode};
use crate::error::{Error, Result};
use crate::list_depq::{ListDepq, ListDepqConfig};
use crate::oracle::LockedHeapPq;
use crate::ordered_list::ListPq;
use crate::pq_api::{Depq, End};
use crate::reclaim::ReclaimMode;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Impl {
    ListDepq,
    DualHeap,
    DualList,
}

impl FromStr for Impl {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "list-depq" => Ok(Impl::ListDepq),
            "dual-heap" => Ok(Impl::DualHeap),
            "dual-list" => Ok(Impl::DualList),
            other => Err(format!("unknown impl `{other}`")),
        }
    }
}

impl fmt::Display for Impl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Impl::ListDepq => "list-depq",
            Impl::DualHeap => "dual-heap",
            Impl::DualList => "dual-list",
        })
    }
}

impl fmt::Display for MultiConsumerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MultiConsumerMode::TwoLocks => "two-locks",
            MultiConsumerMode::Combining => "combining",
        })
    }
}

impl fmt::Display for ReclaimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReclaimMode::Deferred => "deferred",
            ReclaimMode::Epoch => "epoch",
        })
    }
}

/// How long each worker runs.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum RunLength {
    OpsPerThread(u64),
    DurationMs(u64),
}

#[derive(Clone, Debug)]
pub struct WorkloadConfig {
    pub implementation: Impl,
    /// Extractor serialization for the dual implementations.
    pub mode: MultiConsumerMode,
    pub threads_insert: usize,
    pub threads_min: usize,
    pub threads_max: usize,
    pub prefill: usize,
    /// Keys are drawn uniformly from `0..key_range`.
    pub key_range: i64,
    pub length: RunLength,
    pub seed: u64,
    pub batch_cap: usize,
    pub reclaim: ReclaimMode,
    /// Fault injection: extracts keep items the other end already claimed.
    pub ignore_reservation: bool,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            implementation: Impl::ListDepq,
            mode: MultiConsumerMode::Combining,
            threads_insert: 1,
            threads_min: 1,
            threads_max: 1,
            prefill: 0,
            key_range: 1_000,
            length: RunLength::OpsPerThread(10_000),
            seed: 0,
            batch_cap: DEFAULT_BATCH_CAP,
            reclaim: ReclaimMode::Deferred,
            ignore_reservation: false,
        }
    }
}

impl WorkloadConfig {
    pub fn threads(&self) -> usize {
        self.threads_insert + self.threads_min + self.threads_max
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.threads() == 0 {
            return bad("at least one thread is required");
        }
        if self.key_range <= 0 {
            return bad("key range must be positive");
        }
        if self.batch_cap == 0 {
            return bad("batch cap must be at least 1");
        }
        if self.ignore_reservation && self.implementation != Impl::ListDepq {
            return bad("fault injection is only available for list-depq");
        }
        if self.length == RunLength::DurationMs(0) {
            return bad("duration must be positive");
        }
        Ok(())
    }

    pub fn build(&self) -> Result<AnyDepq> {
        self.validate()?;
        Ok(match self.implementation {
            Impl::ListDepq => {
                let q = ListDepq::with_config(ListDepqConfig {
                    batch_cap: self.batch_cap,
                    reclaim: self.reclaim,
                    trace_combining: false,
                })?;
                q.inject_ignore_reservation(self.ignore_reservation);
                AnyDepq::List(q)
            }
            Impl::DualHeap => AnyDepq::DualHeap(make_multi_consumer(
                DualDepq::heap().with_failure_log(),
                self.mode,
                self.batch_cap,
            )?),
            Impl::DualList => AnyDepq::DualList(make_multi_consumer(
                DualDepq::list()?.with_failure_log(),
                self.mode,
                self.batch_cap,
            )?),
        })
    }
}

/// Counters gathered after a run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ImplCounters {
    pub reserve_failures: [u64; 2],
    pub insert_cas_failures: u64,
    /// Log2 buckets of combining batch sizes, both ends merged.
    pub batch_sizes: Vec<u64>,
    pub batches: u64,
    pub max_concurrent_combiners: usize,
    pub retired: u64,
    pub protocol_violations: u64,
}

/// Any implementation behind one interface.
// One per run; boxing buys nothing.
#[allow(clippy::large_enum_variant)]
pub enum AnyDepq {
    List(ListDepq),
    DualHeap(MultiConsumerDepq<LockedHeapPq>),
    DualList(MultiConsumerDepq<ListPq>),
}

impl AnyDepq {
    pub fn depq(&self) -> &dyn Depq {
        match self {
            AnyDepq::List(q) => q,
            AnyDepq::DualHeap(q) => q,
            AnyDepq::DualList(q) => q,
        }
    }

    /// Structural checks. Quiescent only.
    pub fn audit(&self) -> bool {
        match self {
            AnyDepq::List(q) => q.audit().passed(),
            AnyDepq::DualHeap(q) => q.inner().audit() && q.inner().failures_charged(),
            AnyDepq::DualList(q) => q.inner().audit() && q.inner().failures_charged(),
        }
    }

    /// Keys still in the queue, ascending. Quiescent only.
    pub fn remaining(&self) -> Vec<i64> {
        let mut r = match self {
            AnyDepq::List(q) => q.remaining(),
            AnyDepq::DualHeap(q) => q.inner().remaining(),
            AnyDepq::DualList(q) => q.inner().remaining(),
        };
        r.sort_unstable();
        r
    }

    pub fn counters(&self) -> ImplCounters {
        fn combining(per_end: [Option<CombinerCounts>; 2]) -> Option<CombinerCounts> {
            match per_end {
                [Some(a), Some(b)] => Some(a.merged(&b)),
                _ => None,
            }
        }
        let mut c = ImplCounters::default();
        let comb = match self {
            AnyDepq::List(q) => {
                let st = q.stats();
                c.reserve_failures = st.reserve_failures;
                c.insert_cas_failures = st.insert_cas_failures.iter().sum();
                c.retired = st.reclaim.retirements;
                c.protocol_violations = st.reclaim.protocol_violations;
                Some(st.combining[0].merged(&st.combining[1]))
            }
            AnyDepq::DualHeap(q) => {
                c.reserve_failures = End::BOTH.map(|e| q.inner().reserve_failures(e));
                combining(End::BOTH.map(|e| q.combining(e)))
            }
            AnyDepq::DualList(q) => {
                c.reserve_failures = End::BOTH.map(|e| q.inner().reserve_failures(e));
                c.insert_cas_failures = End::BOTH
                    .iter()
                    .map(|&e| q.inner().queue(e).list().insert_cas_failures())
                    .sum();
                combining(End::BOTH.map(|e| q.combining(e)))
            }
        };
        if let Some(cc) = comb {
            c.batch_sizes = cc.batch_sizes;
            c.batches = cc.batches;
            c.max_concurrent_combiners = cc.max_concurrent_combiners;
        }
        c
    }
}

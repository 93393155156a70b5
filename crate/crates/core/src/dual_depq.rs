//! Double-ended priority queue from two single-consumer priority queues.
//!
//! Insert puts a new item into the min queue and then into the max queue.
//! An extract at one end keeps pulling the first item from its queue until
//! it wins that item's `reserved` flag, or the queue is empty. An item won
//! by the other end is simply skipped; optionally, the winner also deletes
//! the item from the opposite queue.
//!
//! [`DualDepq`] is correct only with at most one extractor per end at a
//! time. [`MultiConsumerDepq`] lifts that restriction with either one lock
//! per end or one combining instance per end; inserts bypass both.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::ccsynch::{BatchHandler, CcSynch, CombinerCounts};
use crate::error::Result;
use crate::oracle::LockedHeapPq;
use crate::ordered_list::ListPq;
use crate::pq_api::{Depq, End, ItemArena, ItemId, PriorityQueue};
use crate::sched::{self, Point};

/// Dual-consumer DEPQ over two priority queues. See the module docs.
pub struct DualDepq<Q: PriorityQueue> {
    arena: Arc<ItemArena>,
    queues: [Q; 2],
    use_optional_delete: bool,
    reserve_failures: [AtomicU64; 2],
    failure_log: Option<Mutex<Vec<(End, ItemId)>>>,
}

impl DualDepq<LockedHeapPq> {
    /// Over two locked binary heaps.
    pub fn heap() -> Self {
        let arena = Arc::new(ItemArena::new());
        let min = LockedHeapPq::new(Arc::clone(&arena), End::Min);
        let max = LockedHeapPq::new(Arc::clone(&arena), End::Max);
        Self::from_parts(arena, min, max)
    }
}

impl DualDepq<ListPq> {
    /// Over two single-consumer sorted lists.
    pub fn list() -> Result<Self> {
        let arena = Arc::new(ItemArena::new());
        let min = ListPq::new(Arc::clone(&arena), End::Min)?;
        let max = ListPq::new(Arc::clone(&arena), End::Max)?;
        Ok(Self::from_parts(arena, min, max))
    }
}

impl<Q: PriorityQueue> DualDepq<Q> {
    /// # Panics
    /// If `min_pq` does not serve `End::Min` first or `max_pq` `End::Max`.
    pub fn from_parts(arena: Arc<ItemArena>, min_pq: Q, max_pq: Q) -> Self {
        assert_eq!(min_pq.order(), End::Min, "min queue must be ascending");
        assert_eq!(max_pq.order(), End::Max, "max queue must be descending");
        DualDepq {
            arena,
            queues: [min_pq, max_pq],
            use_optional_delete: false,
            reserve_failures: Default::default(),
            failure_log: None,
        }
    }

    /// Also delete each extracted item from the opposite queue. Only takes
    /// effect when both queues support deletion.
    pub fn with_optional_delete(mut self, on: bool) -> Self {
        self.use_optional_delete = on && self.queues.iter().all(|q| q.has_delete());
        self
    }

    /// Keep a log of every lost reservation, for [`DualDepq::failures_charged`].
    pub fn with_failure_log(mut self) -> Self {
        self.failure_log = Some(Mutex::new(Vec::new()));
        self
    }

    pub fn uses_optional_delete(&self) -> bool {
        self.use_optional_delete
    }

    pub fn arena(&self) -> &Arc<ItemArena> {
        &self.arena
    }

    pub fn queue(&self, end: End) -> &Q {
        &self.queues[end.index()]
    }

    /// Extract at `end`, also returning how many reservations it lost.
    /// Caller must be the only extractor at `end`.
    pub fn extract_counting(&self, end: End) -> (Option<i64>, usize) {
        let q = &self.queues[end.index()];
        let mut lost = 0;
        loop {
            sched::hit(Point::DualLoopTop(end));
            let Some(x) = q.pq_extract_first() else {
                return (None, lost);
            };
            sched::hit(Point::DualAfterPqExtract(end));
            let item = self.arena.get(x);
            if item.try_reserve_as(end) {
                if self.use_optional_delete {
                    self.queues[end.opposite().index()].pq_delete(x);
                }
                return (Some(item.user_key()), lost);
            }
            lost += 1;
            self.reserve_failures[end.index()].fetch_add(1, Ordering::Relaxed);
            if let Some(log) = &self.failure_log {
                log.lock().unwrap().push((end, x));
            }
        }
    }

    pub fn reserve_failures(&self, end: End) -> u64 {
        self.reserve_failures[end.index()].load(Ordering::Relaxed)
    }

    /// True when every logged lost reservation lost to the opposite end.
    /// Vacuous without [`DualDepq::with_failure_log`].
    pub fn failures_charged(&self) -> bool {
        let Some(log) = &self.failure_log else {
            return true;
        };
        log.lock()
            .unwrap()
            .iter()
            .all(|&(end, id)| self.arena.get(id).reserved_by() == Some(end.opposite()))
    }

    /// Unreserved user keys still held by the min queue. Quiescent only.
    pub fn remaining(&self) -> Vec<i64> {
        let mut keys: Vec<i64> = self.queues[End::Min.index()]
            .contents()
            .into_iter()
            .map(|id| self.arena.get(id))
            .filter(|item| !item.is_reserved())
            .map(|item| item.user_key())
            .collect();
        keys.sort_unstable();
        keys
    }

    /// Structural check of both queues. Quiescent only.
    pub fn audit(&self) -> bool {
        self.queues.iter().all(|q| q.check())
    }
}

impl<Q: PriorityQueue> Depq for DualDepq<Q> {
    fn try_insert(&self, key: i64) -> Result<()> {
        let id = self.arena.new_item(key)?;
        self.queues[End::Min.index()].pq_insert(id);
        sched::hit(Point::DualBetweenInserts);
        self.queues[End::Max.index()].pq_insert(id);
        Ok(())
    }

    fn extract_min(&self) -> Option<i64> {
        self.extract_counting(End::Min).0
    }

    fn extract_max(&self) -> Option<i64> {
        self.extract_counting(End::Max).0
    }
}

/// How [`MultiConsumerDepq`] serializes extractors at each end.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum MultiConsumerMode {
    TwoLocks,
    Combining,
}

impl std::str::FromStr for MultiConsumerMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "two-locks" => Ok(MultiConsumerMode::TwoLocks),
            "combining" => Ok(MultiConsumerMode::Combining),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// Combiner work for one end of a wrapped [`DualDepq`]; no batch finalizer.
pub struct DualExtract<Q: PriorityQueue> {
    depq: Arc<DualDepq<Q>>,
    end: End,
}

impl<Q: PriorityQueue> BatchHandler for DualExtract<Q> {
    type Request = ();
    type Response = Option<i64>;

    fn apply(&self, _: ()) -> Option<i64> {
        self.depq.extract_counting(self.end).0
    }

    fn finalize(&self) {}
}

enum EndGuard<Q: PriorityQueue> {
    Lock(Mutex<()>),
    Combine(Box<CcSynch<DualExtract<Q>>>),
}

/// A [`DualDepq`] safe for any number of extractors at each end.
pub struct MultiConsumerDepq<Q: PriorityQueue> {
    inner: Arc<DualDepq<Q>>,
    ends: [EndGuard<Q>; 2],
}

/// Wraps `depq` for multi-consumer use.
pub fn make_multi_consumer<Q: PriorityQueue>(
    depq: DualDepq<Q>,
    mode: MultiConsumerMode,
    batch_cap: usize,
) -> Result<MultiConsumerDepq<Q>> {
    let inner = Arc::new(depq);
    let guard = |end| -> Result<EndGuard<Q>> {
        Ok(match mode {
            MultiConsumerMode::TwoLocks => EndGuard::Lock(Mutex::new(())),
            MultiConsumerMode::Combining => EndGuard::Combine(Box::new(CcSynch::new(
                batch_cap,
                DualExtract {
                    depq: Arc::clone(&inner),
                    end,
                },
            )?)),
        })
    };
    let ends = [guard(End::Min)?, guard(End::Max)?];
    Ok(MultiConsumerDepq { inner, ends })
}

impl<Q: PriorityQueue> MultiConsumerDepq<Q> {
    pub fn inner(&self) -> &DualDepq<Q> {
        &self.inner
    }

    pub fn mode(&self) -> MultiConsumerMode {
        match self.ends[0] {
            EndGuard::Lock(_) => MultiConsumerMode::TwoLocks,
            EndGuard::Combine(_) => MultiConsumerMode::Combining,
        }
    }

    /// Combining counters per end (`None` in two-lock mode).
    pub fn combining(&self, end: End) -> Option<CombinerCounts> {
        match &self.ends[end.index()] {
            EndGuard::Lock(_) => None,
            EndGuard::Combine(c) => Some(c.counts()),
        }
    }

    fn extract_end(&self, end: End) -> Option<i64> {
        match &self.ends[end.index()] {
            EndGuard::Lock(m) => {
                let _held = m.lock().unwrap();
                self.inner.extract_counting(end).0
            }
            EndGuard::Combine(c) => c.announce(()),
        }
    }
}

impl<Q: PriorityQueue> Depq for MultiConsumerDepq<Q> {
    fn try_insert(&self, key: i64) -> Result<()> {
        self.inner.try_insert(key)
    }

    fn extract_min(&self) -> Option<i64> {
        self.extract_end(End::Min)
    }

    fn extract_max(&self) -> Option<i64> {
        self.extract_end(End::Max)
    }
}

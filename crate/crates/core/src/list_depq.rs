//! The multi-consumer list-based double-ended priority queue.
//!
//! Every item is linked into two [`SortedList`]s over one arena: ascending
//! for the min end, descending for the max end. Inserts go into the min
//! list first, then the max list. Each end has its own [`CcSynch`]
//! instance; its combiner runs reserving extracts for the whole batch and
//! then advances that list's head once, feeding the dropped items to the
//! [`Reclaimer`].
//!
//! The two lists are not mirror images of each other: an item can sit in
//! the deleted prefix of one list while still undeleted in the other, and
//! inserts racing an extract can land in different relative positions.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::ccsynch::{BatchHandler, CcSynch, CombinerCounts, DEFAULT_BATCH_CAP};
use crate::error::Result;
use crate::ordered_list::{ListAudit, ListSnapshot, SortedList};
use crate::pq_api::{Depq, End, ItemArena};
use crate::reclaim::{ReclaimCounts, ReclaimMode, ReclaimStats, Reclaimer};

#[derive(Clone, Debug)]
pub struct ListDepqConfig {
    pub batch_cap: usize,
    pub reclaim: ReclaimMode,
    /// Record combiner apply order (for FIFO checks).
    pub trace_combining: bool,
}

impl Default for ListDepqConfig {
    fn default() -> Self {
        ListDepqConfig {
            batch_cap: DEFAULT_BATCH_CAP,
            reclaim: ReclaimMode::Deferred,
            trace_combining: false,
        }
    }
}

struct Shared {
    arena: Arc<ItemArena>,
    lists: [SortedList; 2],
    reclaim: Reclaimer,
    update_heads: [AtomicU64; 2],
}

/// Per-end combiner work: reserving extract per request, head update per batch.
pub struct ExtractHandler {
    shared: Arc<Shared>,
    end: End,
}

impl BatchHandler for ExtractHandler {
    type Request = ();
    type Response = Option<i64>;

    fn apply(&self, _: ()) -> Option<i64> {
        let s = &self.shared;
        s.lists[self.end.index()]
            .extract(true)
            .map(|id| s.arena.get(id).user_key())
    }

    fn finalize(&self) {
        let s = &self.shared;
        let removed = s.lists[self.end.index()].update_head();
        s.update_heads[self.end.index()].fetch_add(1, Ordering::Relaxed);
        for id in removed {
            s.reclaim.on_unlink(&s.arena, id);
        }
        if s.reclaim.mode() == ReclaimMode::Epoch {
            s.reclaim.try_advance(&s.arena);
        }
    }
}

/// Multi-consumer list-based DEPQ. See the module docs.
pub struct ListDepq {
    shared: Arc<Shared>,
    combiners: [CcSynch<ExtractHandler>; 2],
}

/// Counters for one [`ListDepq`].
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct ListDepqStats {
    /// Reservation attempts lost to the other end, indexed by end.
    pub reserve_failures: [u64; 2],
    pub insert_cas_failures: [u64; 2],
    pub update_head_calls: [u64; 2],
    pub combining: [CombinerCounts; 2],
    pub reclaim: ReclaimCounts,
    /// Items dropped from a list without a marked incoming link.
    pub unmarked_removals: u64,
    pub poisoned_accesses: u64,
}

/// Audit of both lists.
#[derive(Clone, Debug)]
pub struct DepqAudit {
    pub lists: [ListAudit; 2],
}

impl DepqAudit {
    pub fn passed(&self) -> bool {
        self.lists.iter().all(ListAudit::passed)
    }
}

impl Default for ListDepq {
    fn default() -> Self {
        Self::new()
    }
}

impl ListDepq {
    pub fn new() -> Self {
        Self::with_config(ListDepqConfig::default()).expect("default config is valid")
    }

    pub fn with_config(cfg: ListDepqConfig) -> Result<Self> {
        let arena = Arc::new(ItemArena::new());
        let sentinel = arena.new_sentinel()?;
        let lists =
            End::BOTH.map(|end| SortedList::with_sentinel(Arc::clone(&arena), end, sentinel));
        let shared = Arc::new(Shared {
            arena,
            lists,
            reclaim: Reclaimer::new(cfg.reclaim),
            update_heads: Default::default(),
        });
        let make = |end| {
            let h = ExtractHandler {
                shared: Arc::clone(&shared),
                end,
            };
            if cfg.trace_combining {
                CcSynch::traced(cfg.batch_cap, h)
            } else {
                CcSynch::new(cfg.batch_cap, h)
            }
        };
        let combiners = [make(End::Min)?, make(End::Max)?];
        Ok(ListDepq { shared, combiners })
    }

    pub fn arena(&self) -> &Arc<ItemArena> {
        &self.shared.arena
    }

    pub fn list(&self, end: End) -> &SortedList {
        &self.shared.lists[end.index()]
    }

    pub fn combiner(&self, end: End) -> &CcSynch<ExtractHandler> {
        &self.combiners[end.index()]
    }

    pub fn reclaimer(&self) -> &Reclaimer {
        &self.shared.reclaim
    }

    pub fn reclaim_stats(&self) -> Arc<ReclaimStats> {
        self.shared.reclaim.stats()
    }

    fn extract_end(&self, end: End) -> Option<i64> {
        let s = &self.shared;
        let guard = s.reclaim.enter();
        let got = self.combiners[end.index()].announce(());
        let due = guard.exit();
        s.reclaim.maybe_advance(&s.arena, due);
        got
    }

    /// Checks both lists. Quiescent or frozen-world only.
    pub fn audit(&self) -> DepqAudit {
        DepqAudit {
            lists: End::BOTH.map(|end| self.list(end).audit()),
        }
    }

    /// Walk of one list. Quiescent or frozen-world only.
    pub fn snapshot(&self, end: End) -> ListSnapshot {
        self.list(end).snapshot()
    }

    /// Rendered path of one list, e.g. `5 -m-> 3 -> 4 -> 2`.
    pub fn dump(&self, end: End) -> String {
        self.snapshot(end).render(&self.shared.arena)
    }

    /// User keys still in the queue: unreserved items of the min list's
    /// undeleted suffix. Quiescent only.
    pub fn remaining(&self) -> Vec<i64> {
        let arena = &self.shared.arena;
        self.snapshot(End::Min)
            .suffix()
            .iter()
            .map(|&id| arena.get(id))
            .filter(|item| !item.is_reserved())
            .map(|item| item.user_key())
            .collect()
    }

    pub fn stats(&self) -> ListDepqStats {
        let s = &self.shared;
        let per = |f: &dyn Fn(&SortedList) -> u64| [f(&s.lists[0]), f(&s.lists[1])];
        ListDepqStats {
            reserve_failures: per(&|l| l.reserve_failures()),
            insert_cas_failures: per(&|l| l.insert_cas_failures()),
            update_head_calls: [
                s.update_heads[0].load(Ordering::Relaxed),
                s.update_heads[1].load(Ordering::Relaxed),
            ],
            combining: [self.combiners[0].counts(), self.combiners[1].counts()],
            reclaim: s.reclaim.counts(),
            unmarked_removals: s.lists.iter().map(|l| l.unmarked_removals()).sum(),
            poisoned_accesses: s.arena.poison_hits(),
        }
    }

    #[doc(hidden)]
    pub fn inject_ignore_reservation(&self, on: bool) {
        for l in &self.shared.lists {
            l.inject_ignore_reservation(on);
        }
    }
}

impl Depq for ListDepq {
    fn try_insert(&self, key: i64) -> Result<()> {
        let s = &self.shared;
        let guard = s.reclaim.enter();
        let id = s.arena.new_item(key)?;
        s.lists[End::Min.index()].insert(id);
        s.lists[End::Max.index()].insert(id);
        let due = guard.exit();
        s.reclaim.maybe_advance(&s.arena, due);
        Ok(())
    }

    fn extract_min(&self) -> Option<i64> {
        self.extract_end(End::Min)
    }

    fn extract_max(&self) -> Option<i64> {
        self.extract_end(End::Max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_queue_is_empty() {
        let q = ListDepq::new();
        assert_eq!(q.extract_min(), None);
        assert_eq!(q.extract_max(), None);
        assert!(q.audit().passed());
    }

    #[test]
    fn insert_reaches_both_lists() {
        let q = ListDepq::new();
        q.insert(5);
        assert_eq!(q.list(End::Min).suffix_keys().len(), 1);
        assert_eq!(q.list(End::Max).suffix_keys().len(), 1);
    }

    #[test]
    fn lists_are_ordered_per_end() {
        let q = ListDepq::new();
        for k in [1, 2, 3] {
            q.insert(k);
        }
        let users = |end| {
            q.list(end)
                .suffix_keys()
                .iter()
                .map(|k| k.user)
                .collect::<Vec<_>>()
        };
        assert_eq!(users(End::Min), vec![1, 2, 3]);
        assert_eq!(users(End::Max), vec![3, 2, 1]);
        assert!(q.audit().passed());
    }

    #[test]
    fn mixed_extracts_follow_priority() {
        let q = ListDepq::new();
        for k in [1, 2, 3] {
            q.insert(k);
        }
        assert_eq!(q.extract_min(), Some(1));
        assert_eq!(q.extract_max(), Some(3));
        assert_eq!(q.extract_min(), Some(2));
        assert_eq!(q.extract_min(), None);
        assert_eq!(q.extract_max(), None);
        assert!(q.audit().passed());
    }

    #[test]
    fn one_head_update_per_batch() {
        let q = ListDepq::new();
        q.insert(1);
        q.extract_max();
        q.extract_max();
        let st = q.stats();
        assert_eq!(
            st.update_head_calls[End::Max.index()],
            st.combining[End::Max.index()].batches
        );
        assert_eq!(st.update_head_calls[End::Max.index()], 2);
    }

    #[test]
    fn drained_items_are_retired_once() {
        let q = ListDepq::new();
        for k in 0..10 {
            q.insert(k);
        }
        for _ in 0..5 {
            q.extract_min();
            q.extract_max();
        }
        // Push both heads past every real item.
        q.insert(100);
        q.extract_min();
        q.extract_max();
        let st = q.stats();
        assert_eq!(st.reclaim.protocol_violations, 0);
        // Everything but the two heads (100 in min, 0 in max) has left
        // both lists: the sentinel and 1..=9.
        assert_eq!(st.reclaim.retirements, 10);
        assert_eq!(st.unmarked_removals, 0);
    }

    #[test]
    fn remaining_excludes_reserved() {
        let q = ListDepq::new();
        for k in [4, 8, 6] {
            q.insert(k);
        }
        assert_eq!(q.extract_max(), Some(8));
        assert_eq!(q.remaining(), vec![4, 6]);
    }

    #[test]
    fn epoch_mode_recycles_slots() {
        let q = ListDepq::with_config(ListDepqConfig {
            reclaim: ReclaimMode::Epoch,
            ..Default::default()
        })
        .unwrap();
        // Drain from alternating ends so each list walks past the items
        // the other end took.
        for round in 0..200 {
            for k in 0..10 {
                q.insert(k);
            }
            let end = if round % 2 == 0 { End::Min } else { End::Max };
            for _ in 0..10 {
                assert!(q.extract(end).is_some());
            }
        }
        let st = q.stats();
        assert!(st.reclaim.deallocations > 0);
        assert!(q.arena().slots_used() < 500, "{}", q.arena().slots_used());
        assert_eq!(st.poisoned_accesses, 0);
        assert!(q.audit().passed());
    }
}

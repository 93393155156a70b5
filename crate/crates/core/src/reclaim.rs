//! Reclamation of items shared by two lists.
//!
//! An item physically removed from one list may still be linked in the
//! other. Each removal bumps the item's `unlinked` counter; the first bump
//! (0 -> 1) only records the removal, the second (1 -> 2) means the item is
//! unreachable from both lists and may be retired. A third bump is a
//! protocol violation.
//!
//! Retired items are handed to an epoch collector. Every queue operation
//! pins the current thread for its duration; the global epoch advances only
//! when every pinned thread has observed it, and an item retired in epoch
//! `e` is released back to the arena once the epoch reaches `e + 2`.
//!
//! In [`ReclaimMode::Deferred`] nothing is released while the structure is
//! alive; everything goes when it is dropped.

use std::cell::RefCell;
use std::sync::atomic::{fence, AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::pq_api::{ItemArena, ItemId};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum ReclaimMode {
    /// Keep retired items until the structure is dropped.
    #[default]
    Deferred,
    /// Release retired items after a grace period.
    Epoch,
}

impl std::str::FromStr for ReclaimMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "deferred" => Ok(ReclaimMode::Deferred),
            "epoch" => Ok(ReclaimMode::Epoch),
            other => Err(format!("unknown reclaim mode `{other}`")),
        }
    }
}

/// Shared counters; clone the handle to observe them after the owning
/// structure is gone.
#[derive(Default, Debug)]
pub struct ReclaimStats {
    unlinks: AtomicU64,
    retirements: AtomicU64,
    deallocations: AtomicU64,
    violations: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct ReclaimCounts {
    pub unlinks: u64,
    pub retirements: u64,
    pub deallocations: u64,
    /// Third or later unlink of one item.
    pub protocol_violations: u64,
}

impl ReclaimStats {
    pub fn counts(&self) -> ReclaimCounts {
        ReclaimCounts {
            unlinks: self.unlinks.load(Ordering::Relaxed),
            retirements: self.retirements.load(Ordering::Relaxed),
            deallocations: self.deallocations.load(Ordering::Relaxed),
            protocol_violations: self.violations.load(Ordering::Relaxed),
        }
    }
}

struct Participant {
    // (epoch << 1) | pinned
    state: AtomicU64,
    in_use: AtomicBool,
}

struct Local {
    owner: u64,
    participant: Arc<Participant>,
    nesting: usize,
    unpins: u64,
}

struct Locals(Vec<Local>);

impl Drop for Locals {
    fn drop(&mut self) {
        for l in &self.0 {
            l.participant.state.store(0, Ordering::Release);
            l.participant.in_use.store(false, Ordering::Release);
        }
    }
}

thread_local! {
    static LOCALS: RefCell<Locals> = const { RefCell::new(Locals(Vec::new())) };
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

const ADVANCE_EVERY: u64 = 64;

/// Retire-bit protocol plus epoch collector. See the module docs.
pub struct Reclaimer {
    id: u64,
    mode: ReclaimMode,
    epoch: AtomicU64,
    participants: Mutex<Vec<Arc<Participant>>>,
    retired: Mutex<Vec<(u64, ItemId)>>,
    stats: Arc<ReclaimStats>,
}

impl Reclaimer {
    pub fn new(mode: ReclaimMode) -> Self {
        Reclaimer {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            mode,
            epoch: AtomicU64::new(0),
            participants: Mutex::new(Vec::new()),
            retired: Mutex::new(Vec::new()),
            stats: Arc::new(ReclaimStats::default()),
        }
    }

    pub fn mode(&self) -> ReclaimMode {
        self.mode
    }

    pub fn stats(&self) -> Arc<ReclaimStats> {
        Arc::clone(&self.stats)
    }

    pub fn counts(&self) -> ReclaimCounts {
        self.stats.counts()
    }

    pub fn global_epoch(&self) -> u64 {
        self.epoch.load(Ordering::Acquire)
    }

    /// Items retired but not yet released.
    pub fn pending(&self) -> usize {
        self.retired.lock().unwrap().len()
    }

    /// Records that `id` was physically removed from one list. Returns true
    /// when this was the second removal, in which case the item has been
    /// retired.
    pub fn on_unlink(&self, arena: &ItemArena, id: ItemId) -> bool {
        self.stats.unlinks.fetch_add(1, Ordering::Relaxed);
        match arena.get(id).bump_unlinked() {
            0 => false,
            1 => {
                self.retire(id);
                true
            }
            n => {
                self.stats.violations.fetch_add(1, Ordering::Relaxed);
                debug_assert!(false, "item {id:?} unlinked {} times", n + 1);
                false
            }
        }
    }

    fn retire(&self, id: ItemId) {
        self.stats.retirements.fetch_add(1, Ordering::Relaxed);
        let epoch = self.epoch.load(Ordering::SeqCst);
        self.retired.lock().unwrap().push((epoch, id));
    }

    /// Pins the calling thread until the guard is dropped. Nested pins are
    /// cheap. A no-op in deferred mode.
    pub fn enter(&self) -> EpochGuard<'_> {
        if self.mode == ReclaimMode::Epoch {
            self.pin();
        }
        EpochGuard { reclaimer: self }
    }

    fn with_local<R>(&self, f: impl FnOnce(&mut Local) -> R) -> R {
        LOCALS.with(|cell| {
            let mut locals = cell.borrow_mut();
            let pos = match locals.0.iter().position(|l| l.owner == self.id) {
                Some(pos) => pos,
                None => {
                    // Drop entries of reclaimers that no longer exist.
                    locals.0.retain(|l| Arc::strong_count(&l.participant) > 1);
                    locals.0.push(Local {
                        owner: self.id,
                        participant: self.register(),
                        nesting: 0,
                        unpins: 0,
                    });
                    locals.0.len() - 1
                }
            };
            f(&mut locals.0[pos])
        })
    }

    fn register(&self) -> Arc<Participant> {
        let mut ps = self.participants.lock().unwrap();
        for p in ps.iter() {
            if p.in_use
                .compare_exchange(false, true, Ordering::AcqRel, Ordering::Relaxed)
                .is_ok()
            {
                return Arc::clone(p);
            }
        }
        let p = Arc::new(Participant {
            state: AtomicU64::new(0),
            in_use: AtomicBool::new(true),
        });
        ps.push(Arc::clone(&p));
        p
    }

    fn pin(&self) {
        self.with_local(|local| {
            local.nesting += 1;
            if local.nesting > 1 {
                return;
            }
            loop {
                let e = self.epoch.load(Ordering::SeqCst);
                local
                    .participant
                    .state
                    .store((e << 1) | 1, Ordering::SeqCst);
                fence(Ordering::SeqCst);
                if self.epoch.load(Ordering::SeqCst) == e {
                    break;
                }
            }
        });
    }

    fn unpin(&self) -> bool {
        self.with_local(|local| {
            local.nesting -= 1;
            if local.nesting > 0 {
                return false;
            }
            let e = local.participant.state.load(Ordering::Relaxed) >> 1;
            local.participant.state.store(e << 1, Ordering::Release);
            local.unpins += 1;
            local.unpins % ADVANCE_EVERY == 0
        })
    }

    /// Advances the global epoch if every pinned thread has seen the
    /// current one, then releases items retired two or more epochs ago.
    pub fn try_advance(&self, arena: &ItemArena) -> bool {
        if self.mode != ReclaimMode::Epoch {
            return false;
        }
        fence(Ordering::SeqCst);
        let e = self.epoch.load(Ordering::SeqCst);
        {
            let ps = self.participants.lock().unwrap();
            for p in ps.iter() {
                let s = p.state.load(Ordering::SeqCst);
                if s & 1 == 1 && s >> 1 != e {
                    return false;
                }
            }
        }
        if self
            .epoch
            .compare_exchange(e, e + 1, Ordering::SeqCst, Ordering::SeqCst)
            .is_err()
        {
            return false;
        }
        self.collect(arena, e + 1);
        true
    }

    fn collect(&self, arena: &ItemArena, now: u64) {
        let ready: Vec<ItemId> = {
            let mut retired = self.retired.lock().unwrap();
            let (ready, keep): (Vec<_>, Vec<_>) =
                retired.drain(..).partition(|&(e, _)| e + 2 <= now);
            *retired = keep;
            ready.into_iter().map(|(_, id)| id).collect()
        };
        for id in &ready {
            arena.release(*id);
        }
        self.stats
            .deallocations
            .fetch_add(ready.len() as u64, Ordering::Relaxed);
    }

    /// Called by the owner after an operation to occasionally push the
    /// epoch forward.
    pub(crate) fn maybe_advance(&self, arena: &ItemArena, due: bool) {
        if due {
            self.try_advance(arena);
        }
    }
}

impl Drop for Reclaimer {
    fn drop(&mut self) {
        let left = self.retired.get_mut().unwrap().len() as u64;
        self.stats.deallocations.fetch_add(left, Ordering::Relaxed);
    }
}

/// Keeps the current thread pinned. See [`Reclaimer::enter`].
pub struct EpochGuard<'a> {
    reclaimer: &'a Reclaimer,
}

impl EpochGuard<'_> {
    /// Unpins and reports whether this thread is due to attempt an epoch
    /// advance.
    pub(crate) fn exit(self) -> bool {
        let r = self.reclaimer;
        std::mem::forget(self);
        r.mode == ReclaimMode::Epoch && r.unpin()
    }
}

impl Drop for EpochGuard<'_> {
    fn drop(&mut self) {
        if self.reclaimer.mode == ReclaimMode::Epoch {
            self.reclaimer.unpin();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::mpsc;
    use std::time::Duration;

    #[test]
    fn second_unlink_retires() {
        let arena = ItemArena::new();
        let r = Reclaimer::new(ReclaimMode::Deferred);
        let id = arena.new_item(1).unwrap();
        assert!(!r.on_unlink(&arena, id));
        assert!(r.on_unlink(&arena, id));
        let c = r.counts();
        assert_eq!((c.unlinks, c.retirements, c.deallocations), (2, 1, 0));
    }

    #[test]
    #[cfg_attr(debug_assertions, should_panic(expected = "unlinked 3 times"))]
    fn third_unlink_is_a_violation() {
        let arena = ItemArena::new();
        let r = Reclaimer::new(ReclaimMode::Deferred);
        let id = arena.new_item(1).unwrap();
        r.on_unlink(&arena, id);
        r.on_unlink(&arena, id);
        assert!(!r.on_unlink(&arena, id));
        assert_eq!(r.counts().protocol_violations, 1);
    }

    #[test]
    fn quiescent_thread_frees_after_two_advances() {
        let arena = ItemArena::new();
        let r = Reclaimer::new(ReclaimMode::Epoch);
        let id = arena.new_item(1).unwrap();
        {
            let _g = r.enter();
            r.on_unlink(&arena, id);
            r.on_unlink(&arena, id);
        }
        assert!(r.try_advance(&arena));
        assert_eq!(r.counts().deallocations, 0);
        assert!(r.try_advance(&arena));
        assert_eq!(r.counts().deallocations, 1);
        assert!(arena.peek(id).is_poisoned());
    }

    #[test]
    fn frozen_reader_blocks_release() {
        let arena = Arc::new(ItemArena::new());
        let r = Arc::new(Reclaimer::new(ReclaimMode::Epoch));
        let id = arena.new_item(1).unwrap();
        let (entered_tx, entered_rx) = mpsc::channel();
        let (leave_tx, leave_rx) = mpsc::channel::<()>();
        let reader = {
            let r = Arc::clone(&r);
            std::thread::spawn(move || {
                let _g = r.enter();
                entered_tx.send(()).unwrap();
                leave_rx.recv().unwrap();
            })
        };
        entered_rx.recv_timeout(Duration::from_secs(5)).unwrap();
        r.on_unlink(&arena, id);
        r.on_unlink(&arena, id);
        for _ in 0..10 {
            r.try_advance(&arena);
        }
        assert_eq!(r.counts().deallocations, 0);
        assert!(!arena.peek(id).is_poisoned());
        leave_tx.send(()).unwrap();
        reader.join().unwrap();
        for _ in 0..3 {
            r.try_advance(&arena);
        }
        assert_eq!(r.counts().deallocations, 1);
    }

    #[test]
    fn deferred_mode_releases_only_on_drop() {
        let arena = ItemArena::new();
        let r = Reclaimer::new(ReclaimMode::Deferred);
        let stats = r.stats();
        let ids: Vec<_> = (0..5).map(|k| arena.new_item(k).unwrap()).collect();
        for &id in &ids {
            r.on_unlink(&arena, id);
            r.on_unlink(&arena, id);
        }
        for _ in 0..5 {
            assert!(!r.try_advance(&arena));
        }
        assert_eq!(stats.counts().deallocations, 0);
        drop(r);
        assert_eq!(stats.counts().deallocations, 5);
    }

    #[test]
    fn nested_pins_unpin_once() {
        let arena = ItemArena::new();
        let r = Reclaimer::new(ReclaimMode::Epoch);
        let outer = r.enter();
        let inner = r.enter();
        drop(inner);
        r.try_advance(&arena);
        // Still pinned at the old epoch, so a second advance must fail.
        assert!(!r.try_advance(&arena));
        drop(outer);
        assert!(r.try_advance(&arena));
    }

    #[test]
    fn participants_are_reused_after_thread_exit() {
        let r = Arc::new(Reclaimer::new(ReclaimMode::Epoch));
        for _ in 0..8 {
            let r = Arc::clone(&r);
            std::thread::spawn(move || drop(r.enter())).join().unwrap();
        }
        assert_eq!(r.participants.lock().unwrap().len(), 1);
    }
}

//! Reference semantics and an obviously-correct priority queue.
//!
//! [`SeqDepq`] is the sequential double-ended queue every concurrent
//! implementation is compared against. [`LockedHeapPq`] is a binary heap
//! behind one mutex, with a position index so arbitrary items can be
//! deleted; it backs the generic construction in tests and benchmarks.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use crate::pq_api::{End, ItemArena, ItemId, Key, PriorityQueue};

/// One double-ended queue operation.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum DepqOp {
    Insert(i64),
    ExtractMin,
    ExtractMax,
}

impl DepqOp {
    pub fn extract(end: End) -> DepqOp {
        match end {
            End::Min => DepqOp::ExtractMin,
            End::Max => DepqOp::ExtractMax,
        }
    }
}

/// Sequential double-ended priority queue over an ordered set.
#[derive(Clone, Debug, Default)]
pub struct SeqDepq {
    contents: BTreeSet<Key>,
    next_uid: u64,
}

impl SeqDepq {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies `op`; extracts return the removed user key or `None` when
    /// empty, inserts return `None`.
    pub fn apply(&mut self, op: DepqOp) -> Option<i64> {
        match op {
            DepqOp::Insert(k) => {
                self.contents.insert(Key::new(k, self.next_uid));
                self.next_uid += 1;
                None
            }
            DepqOp::ExtractMin => self.contents.pop_first().map(|k| k.user),
            DepqOp::ExtractMax => self.contents.pop_last().map(|k| k.user),
        }
    }

    pub fn len(&self) -> usize {
        self.contents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }

    /// User keys in ascending order.
    pub fn user_keys(&self) -> Vec<i64> {
        self.contents.iter().map(|k| k.user).collect()
    }
}

/// Functional form: applies `op` to a copy of `state`.
pub fn seq_apply(state: &SeqDepq, op: DepqOp) -> (SeqDepq, Option<i64>) {
    let mut next = state.clone();
    let r = next.apply(op);
    (next, r)
}

#[derive(Default)]
struct Heap {
    slots: Vec<(Key, ItemId)>,
    pos: HashMap<ItemId, usize>,
}

/// A binary heap of arena items guarded by one lock.
pub struct LockedHeapPq {
    arena: Arc<ItemArena>,
    order: End,
    heap: Mutex<Heap>,
}

impl LockedHeapPq {
    pub fn new(arena: Arc<ItemArena>, order: End) -> Self {
        LockedHeapPq {
            arena,
            order,
            heap: Mutex::new(Heap::default()),
        }
    }

    pub fn len(&self) -> usize {
        self.heap.lock().unwrap().slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Items currently held, in no particular order.
    pub fn items(&self) -> Vec<ItemId> {
        self.heap
            .lock()
            .unwrap()
            .slots
            .iter()
            .map(|&(_, id)| id)
            .collect()
    }

    /// Checks the heap property and the position index.
    pub fn verify(&self) -> bool {
        let h = self.heap.lock().unwrap();
        self.heap_ok(&h)
    }

    fn heap_ok(&self, h: &Heap) -> bool {
        let heap_ok = (1..h.slots.len()).all(|i| !self.first(h.slots[i].0, h.slots[(i - 1) / 2].0));
        let index_ok = h.pos.len() == h.slots.len()
            && h.slots
                .iter()
                .enumerate()
                .all(|(i, (_, id))| h.pos.get(id) == Some(&i));
        heap_ok && index_ok
    }

    #[inline]
    fn first(&self, a: Key, b: Key) -> bool {
        self.order.before(a, b)
    }

    fn swap(h: &mut Heap, i: usize, j: usize) {
        h.slots.swap(i, j);
        h.pos.insert(h.slots[i].1, i);
        h.pos.insert(h.slots[j].1, j);
    }

    fn sift_up(&self, h: &mut Heap, mut i: usize) -> usize {
        while i > 0 {
            let parent = (i - 1) / 2;
            if !self.first(h.slots[i].0, h.slots[parent].0) {
                break;
            }
            Self::swap(h, i, parent);
            i = parent;
        }
        i
    }

    fn sift_down(&self, h: &mut Heap, mut i: usize) {
        let n = h.slots.len();
        loop {
            let l = 2 * i + 1;
            let r = l + 1;
            let mut best = i;
            if l < n && self.first(h.slots[l].0, h.slots[best].0) {
                best = l;
            }
            if r < n && self.first(h.slots[r].0, h.slots[best].0) {
                best = r;
            }
            if best == i {
                return;
            }
            Self::swap(h, i, best);
            i = best;
        }
    }

    fn remove_at(&self, h: &mut Heap, i: usize) -> ItemId {
        let last = h.slots.len() - 1;
        Self::swap(h, i, last);
        let (_, id) = h.slots.pop().unwrap();
        h.pos.remove(&id);
        if i < h.slots.len() {
            let j = self.sift_up(h, i);
            self.sift_down(h, j);
        }
        id
    }

    fn sweep(&self, h: &Heap) {
        if cfg!(debug_assertions) && h.slots.len() <= 64 {
            debug_assert!(self.heap_ok(h), "heap invariant broken");
        }
    }
}

impl PriorityQueue for LockedHeapPq {
    fn order(&self) -> End {
        self.order
    }

    fn pq_insert(&self, item: ItemId) {
        let key = self.arena.get(item).key();
        let mut h = self.heap.lock().unwrap();
        let i = h.slots.len();
        h.slots.push((key, item));
        h.pos.insert(item, i);
        self.sift_up(&mut h, i);
        self.sweep(&h);
    }

    fn pq_extract_first(&self) -> Option<ItemId> {
        let mut h = self.heap.lock().unwrap();
        if h.slots.is_empty() {
            return None;
        }
        let id = self.remove_at(&mut h, 0);
        self.sweep(&h);
        Some(id)
    }

    fn has_delete(&self) -> bool {
        true
    }

    /// Idempotent: deleting an absent item is a no-op returning false.
    fn pq_delete(&self, item: ItemId) -> bool {
        let mut h = self.heap.lock().unwrap();
        let Some(&i) = h.pos.get(&item) else {
            return false;
        };
        self.remove_at(&mut h, i);
        self.sweep(&h);
        true
    }

    fn held(&self) -> Option<usize> {
        Some(self.len())
    }

    fn contents(&self) -> Vec<ItemId> {
        self.items()
    }

    fn check(&self) -> bool {
        self.verify()
    }
}

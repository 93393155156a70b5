//! Keys, items and the two queue interfaces everything else is built on.
//!
//! Items live in an [`ItemArena`] and are named by [`ItemId`] handles. An item
//! carries its key, the `reserved` flag that decides which end of a
//! double-ended queue gets to return it, the `unlinked` counter used by
//! reclamation, and one link word per list for the shared-node list queue.

use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicI64, AtomicU64, AtomicU8, AtomicUsize, Ordering};
use std::sync::OnceLock;

use crossbeam_queue::SegQueue;

use crate::error::{Error, Result};
use crate::ordered_list::LinkWord;

/// A stored key: the user's value plus a per-queue sequence number.
///
/// Ordering is lexicographic on `(user, uid)`, so two stored keys are never
/// equal even when users insert the same value twice.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Key {
    pub user: i64,
    pub uid: u64,
}

impl Key {
    pub const fn new(user: i64, uid: u64) -> Self {
        Key { user, uid }
    }
}

/// Strict total order on keys.
#[inline]
pub fn key_less(a: Key, b: Key) -> bool {
    a < b
}

/// One end of a double-ended queue. Also indexes the two lists of the
/// list-based queue (`Min` is sorted ascending, `Max` descending).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum End {
    Min = 0,
    Max = 1,
}

impl End {
    pub const BOTH: [End; 2] = [End::Min, End::Max];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn opposite(self) -> End {
        match self {
            End::Min => End::Max,
            End::Max => End::Min,
        }
    }

    /// Should `a` come before `b` in a queue that serves this end first?
    #[inline]
    pub fn before(self, a: Key, b: Key) -> bool {
        match self {
            End::Min => key_less(a, b),
            End::Max => key_less(b, a),
        }
    }

    fn reserve_tag(self) -> u8 {
        self as u8 + 1
    }
}

impl fmt::Display for End {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            End::Min => f.write_str("min"),
            End::Max => f.write_str("max"),
        }
    }
}

/// Handle naming an item slot in an [`ItemArena`].
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemId(pub(crate) u32);

impl ItemId {
    /// Reserved identifier meaning "no item".
    pub const NONE: ItemId = ItemId(u32::MAX);

    #[inline]
    pub fn is_none(self) -> bool {
        self == ItemId::NONE
    }

    #[inline]
    pub fn index(self) -> u32 {
        self.0
    }
}

impl fmt::Debug for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_none() {
            f.write_str("#none")
        } else {
            write!(f, "#{}", self.0)
        }
    }
}

const RESERVED_UNKNOWN: u8 = 3;

/// A queue element.
///
/// All fields are atomics so that a slot can be reinitialized when the arena
/// recycles it; the key is written before the item is published and never
/// changes while the item is reachable.
pub struct Item {
    user_key: AtomicI64,
    uid: AtomicU64,
    // 0 = free, otherwise the tag of the claiming end.
    reserved: AtomicU8,
    unlinked: AtomicU8,
    links: [AtomicU64; 2],
    // Bit per list, set when the link leading to this item is marked.
    deleted_in: AtomicU8,
    poisoned: AtomicBool,
}

impl Item {
    fn blank() -> Self {
        Item {
            user_key: AtomicI64::new(0),
            uid: AtomicU64::new(0),
            reserved: AtomicU8::new(0),
            unlinked: AtomicU8::new(0),
            links: [
                AtomicU64::new(LinkWord::END.bits()),
                AtomicU64::new(LinkWord::END.bits()),
            ],
            deleted_in: AtomicU8::new(0),
            poisoned: AtomicBool::new(false),
        }
    }

    fn reset(&self, user: i64, uid: u64) {
        self.user_key.store(user, Ordering::Relaxed);
        self.uid.store(uid, Ordering::Relaxed);
        self.reserved.store(0, Ordering::Relaxed);
        self.unlinked.store(0, Ordering::Relaxed);
        for link in &self.links {
            link.store(LinkWord::END.bits(), Ordering::Relaxed);
        }
        self.deleted_in.store(0, Ordering::Relaxed);
        self.poisoned.store(false, Ordering::Release);
    }

    #[inline]
    pub fn key(&self) -> Key {
        Key::new(
            self.user_key.load(Ordering::Relaxed),
            self.uid.load(Ordering::Relaxed),
        )
    }

    #[inline]
    pub fn user_key(&self) -> i64 {
        self.user_key.load(Ordering::Relaxed)
    }

    pub fn is_reserved(&self) -> bool {
        self.reserved.load(Ordering::Acquire) != 0
    }

    /// Test-and-set of the reserved flag. True iff this call flipped it.
    pub fn try_reserve(&self) -> bool {
        self.claim(RESERVED_UNKNOWN)
    }

    /// Like [`Item::try_reserve`], remembering which end won.
    pub fn try_reserve_as(&self, end: End) -> bool {
        self.claim(end.reserve_tag())
    }

    fn claim(&self, tag: u8) -> bool {
        self.reserved
            .compare_exchange(0, tag, Ordering::AcqRel, Ordering::Acquire)
            .is_ok()
    }

    /// The end that reserved this item, if it was reserved through
    /// [`Item::try_reserve_as`].
    pub fn reserved_by(&self) -> Option<End> {
        match self.reserved.load(Ordering::Acquire) {
            1 => Some(End::Min),
            2 => Some(End::Max),
            _ => None,
        }
    }

    #[inline]
    pub(crate) fn link(&self, list: End) -> &AtomicU64 {
        &self.links[list.index()]
    }

    /// Current link word of this item in `list`.
    pub fn link_word(&self, list: End) -> LinkWord {
        LinkWord::from_bits(self.links[list.index()].load(Ordering::Acquire))
    }

    pub(crate) fn tag_deleted(&self, list: End) {
        self.deleted_in
            .fetch_or(1 << list.index(), Ordering::Relaxed);
    }

    /// Whether the link leading to this item in `list` has been marked
    /// (or the item is the initial sentinel).
    pub fn is_deleted_in(&self, list: End) -> bool {
        self.deleted_in.load(Ordering::Relaxed) & (1 << list.index()) != 0
    }

    /// Bumps the unlink counter and returns its previous value.
    pub(crate) fn bump_unlinked(&self) -> u8 {
        self.unlinked.fetch_add(1, Ordering::AcqRel)
    }

    pub fn unlink_count(&self) -> u8 {
        self.unlinked.load(Ordering::Acquire)
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned.load(Ordering::Acquire)
    }
}

impl fmt::Debug for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Item")
            .field("key", &self.key())
            .field("reserved", &self.is_reserved())
            .field("min", &self.link_word(End::Min))
            .field("max", &self.link_word(End::Max))
            .finish()
    }
}

const BASE_SHIFT: u32 = 8;
const BASE: usize = 1 << BASE_SHIFT;
const SEGMENTS: usize = 23;
/// Total slot count: `BASE * (2^SEGMENTS - 1)`, below `u32::MAX`.
pub const ARENA_CAPACITY: usize = BASE * ((1 << SEGMENTS) - 1);

#[inline]
fn locate(index: usize) -> (usize, usize) {
    let shifted = index + BASE;
    let seg = (usize::BITS - 1 - shifted.leading_zeros()) as usize - BASE_SHIFT as usize;
    (seg, shifted - (BASE << seg))
}

/// Growable, concurrently allocatable item storage with stable addresses.
///
/// Segments double in size and are never moved, so an [`ItemId`] stays
/// valid for the arena's lifetime. Slots handed back through
/// [`ItemArena::release`] are poisoned and later recycled.
pub struct ItemArena {
    segments: [OnceLock<Box<[Item]>>; SEGMENTS],
    next_slot: AtomicUsize,
    next_uid: AtomicU64,
    free: SegQueue<ItemId>,
    poison_hits: AtomicU64,
}

impl Default for ItemArena {
    fn default() -> Self {
        Self::new()
    }
}

impl ItemArena {
    pub fn new() -> Self {
        ItemArena {
            segments: std::array::from_fn(|_| OnceLock::new()),
            next_slot: AtomicUsize::new(0),
            next_uid: AtomicU64::new(0),
            free: SegQueue::new(),
            poison_hits: AtomicU64::new(0),
        }
    }

    /// Allocates a fresh item for `user`: unreserved, both links at end of list.
    pub fn new_item(&self, user: i64) -> Result<ItemId> {
        let uid = self
            .next_uid
            .fetch_update(Ordering::Relaxed, Ordering::Relaxed, |u| u.checked_add(1))
            .map_err(|_| Error::UidOverflow)?;
        let id = self.alloc_slot()?;
        self.slot(id).reset(user, uid);
        Ok(id)
    }

    /// Allocates a keyless sentinel. Its key is never compared.
    pub(crate) fn new_sentinel(&self) -> Result<ItemId> {
        let id = self.alloc_slot()?;
        self.slot(id).reset(i64::MIN, u64::MAX);
        Ok(id)
    }

    fn alloc_slot(&self) -> Result<ItemId> {
        if let Some(id) = self.free.pop() {
            return Ok(id);
        }
        let index = self.next_slot.fetch_add(1, Ordering::Relaxed);
        if index >= ARENA_CAPACITY {
            return Err(Error::ArenaExhausted(ARENA_CAPACITY));
        }
        let (seg, _) = locate(index);
        self.segments[seg].get_or_init(|| (0..BASE << seg).map(|_| Item::blank()).collect());
        Ok(ItemId(index as u32))
    }

    #[inline]
    fn slot(&self, id: ItemId) -> &Item {
        let (seg, off) = locate(id.0 as usize);
        &self.segments[seg]
            .get()
            .expect("item id from another arena")[off]
    }

    /// Resolves a handle. In debug builds, touching a released slot is
    /// counted and asserted against.
    #[inline]
    pub fn get(&self, id: ItemId) -> &Item {
        let item = self.slot(id);
        if cfg!(debug_assertions) && item.is_poisoned() {
            self.poison_hits.fetch_add(1, Ordering::Relaxed);
            debug_assert!(false, "access to released item {id:?}");
        }
        item
    }

    /// Reads a slot without the poison check (for reclamation bookkeeping).
    pub fn peek(&self, id: ItemId) -> &Item {
        self.slot(id)
    }

    /// Poisons a slot and makes it available for reuse. Callers must
    /// guarantee no thread still holds `id`.
    pub(crate) fn release(&self, id: ItemId) {
        self.slot(id).poisoned.store(true, Ordering::Release);
        self.free.push(id);
    }

    pub fn poison_hits(&self) -> u64 {
        self.poison_hits.load(Ordering::Relaxed)
    }

    /// Number of slots ever carved out of the arena.
    pub fn slots_used(&self) -> usize {
        self.next_slot.load(Ordering::Relaxed).min(ARENA_CAPACITY)
    }

    /// Every slot carved so far, live or released, in index order.
    pub fn ids(&self) -> impl Iterator<Item = ItemId> {
        (0..self.slots_used() as u32).map(ItemId)
    }

    /// Number of uids assigned so far.
    pub fn uids_issued(&self) -> u64 {
        self.next_uid.load(Ordering::Relaxed)
    }
}

/// A linearizable single-consumer priority queue over arena items.
///
/// `order()` names the end the queue serves first: `End::Min` queues
/// extract the smallest key, `End::Max` queues the largest. At most one
/// thread may run `pq_extract_first` at a time.
pub trait PriorityQueue: Send + Sync {
    fn order(&self) -> End;

    fn pq_insert(&self, item: ItemId);

    /// Removes and returns a first item under `order()`, or `None` if empty.
    fn pq_extract_first(&self) -> Option<ItemId>;

    fn has_delete(&self) -> bool {
        false
    }

    /// Removes `item` if present. Returns whether it was present.
    fn pq_delete(&self, _item: ItemId) -> bool {
        false
    }

    /// Number of items physically held, when the queue can tell.
    fn held(&self) -> Option<usize> {
        None
    }

    /// Items currently held, in no particular order. Quiescent only.
    fn contents(&self) -> Vec<ItemId>;

    /// Structural self-check. Quiescent only.
    fn check(&self) -> bool {
        true
    }
}

/// The user-facing double-ended queue operations.
pub trait Depq: Send + Sync {
    fn try_insert(&self, key: i64) -> Result<()>;

    /// # Panics
    /// If the item arena is exhausted.
    fn insert(&self, key: i64) {
        self.try_insert(key).expect("depq insert")
    }

    fn extract_min(&self) -> Option<i64>;

    fn extract_max(&self) -> Option<i64>;

    fn extract(&self, end: End) -> Option<i64> {
        match end {
            End::Min => self.extract_min(),
            End::Max => self.extract_max(),
        }
    }
}

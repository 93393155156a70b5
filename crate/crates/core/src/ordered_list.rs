//! Sorted singly-linked lists with marked links, over shared arena items.
//!
//! A [`SortedList`] threads items through the link word for its [`End`].
//! The list starts at `head` and begins with a prefix of logically deleted
//! items: an item is logically deleted once the link leading to it is
//! marked. Everything after the prefix is sorted by [`End::before`].
//!
//! * Inserts are lock-free. They skip the marked prefix and CAS an unmarked
//!   link, so nothing is ever inserted inside the prefix.
//! * Extraction marks the link out of `last_deleted` with a fetch-or. Only
//!   one extractor per list may run at a time; the caller provides that
//!   (a combiner, a lock, or a single consumer thread).
//! * [`SortedList::update_head`] physically drops the prefix except its
//!   last item by moving `head` to `last_deleted`.
//!
//! Two lists over the same arena, one per end, share items: that is the
//! list-based double-ended queue in [`crate::list_depq`].

use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::Result;
use crate::pq_api::{End, ItemArena, ItemId, Key, PriorityQueue};
use crate::sched::{self, Point};

/// Successor handle and mark bit packed in one atomically updated word.
#[derive(Copy, Clone, PartialEq, Eq, Hash)]
pub struct LinkWord(u64);

impl LinkWord {
    /// Unmarked end of list.
    pub const END: LinkWord = LinkWord::new(ItemId::NONE, false);

    #[inline]
    pub const fn new(succ: ItemId, marked: bool) -> Self {
        LinkWord(((succ.0 as u64) << 1) | marked as u64)
    }

    #[inline]
    pub const fn from_bits(bits: u64) -> Self {
        LinkWord(bits)
    }

    #[inline]
    pub const fn bits(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn succ(self) -> ItemId {
        ItemId((self.0 >> 1) as u32)
    }

    #[inline]
    pub fn marked(self) -> bool {
        self.0 & 1 == 1
    }
}

impl fmt::Debug for LinkWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{:?},{}>", self.succ(), self.marked() as u8)
    }
}

/// Should `k1` come before `k2` in the list for `list`?
#[inline]
pub fn before(k1: Key, k2: Key, list: End) -> bool {
    list.before(k1, k2)
}

/// One marked-link sorted list. See the module docs.
pub struct SortedList {
    arena: Arc<ItemArena>,
    list: End,
    head: AtomicU32,
    last_deleted: AtomicU32,
    // Set between the mark and the `last_deleted` write.
    mark_pending: AtomicBool,
    insert_cas_failures: AtomicU64,
    reserve_failures: AtomicU64,
    unmarked_removals: AtomicU64,
    ignore_reservation: AtomicBool,
}

impl SortedList {
    /// A list whose deleted prefix is just `sentinel`. The sentinel must be
    /// fresh (its link for `list` at end of list).
    pub fn with_sentinel(arena: Arc<ItemArena>, list: End, sentinel: ItemId) -> Self {
        arena.get(sentinel).tag_deleted(list);
        SortedList {
            arena,
            list,
            head: AtomicU32::new(sentinel.0),
            last_deleted: AtomicU32::new(sentinel.0),
            mark_pending: AtomicBool::new(false),
            insert_cas_failures: AtomicU64::new(0),
            reserve_failures: AtomicU64::new(0),
            unmarked_removals: AtomicU64::new(0),
            ignore_reservation: AtomicBool::new(false),
        }
    }

    pub fn new(arena: Arc<ItemArena>, list: End) -> Result<Self> {
        let sentinel = arena.new_sentinel()?;
        Ok(Self::with_sentinel(arena, list, sentinel))
    }

    pub fn list(&self) -> End {
        self.list
    }

    pub fn arena(&self) -> &Arc<ItemArena> {
        &self.arena
    }

    pub fn head(&self) -> ItemId {
        ItemId(self.head.load(Ordering::Acquire))
    }

    pub fn last_deleted(&self) -> ItemId {
        ItemId(self.last_deleted.load(Ordering::Acquire))
    }

    #[inline]
    fn word(&self, id: ItemId) -> LinkWord {
        LinkWord::from_bits(self.arena.get(id).link(self.list).load(Ordering::Acquire))
    }

    /// Links `node` into the sorted suffix. Lock-free; a failed CAS resumes
    /// the search from the node it tried to link after.
    pub fn insert(&self, node: ItemId) {
        let list = self.list;
        let key = self.arena.get(node).key();
        let mut pred = self.head();
        loop {
            let mut w = self.word(pred);
            while !w.succ().is_none()
                && (w.marked() || before(self.arena.get(w.succ()).key(), key, list))
            {
                pred = w.succ();
                w = self.word(pred);
            }
            let curr = w.succ();
            let expected = LinkWord::new(curr, false);
            self.arena
                .get(node)
                .link(list)
                .store(expected.bits(), Ordering::Relaxed);
            sched::hit(Point::InsertBeforeCas(list));
            let swapped = self.arena.get(pred).link(list).compare_exchange(
                expected.bits(),
                LinkWord::new(node, false).bits(),
                Ordering::AcqRel,
                Ordering::Acquire,
            );
            if swapped.is_ok() {
                return;
            }
            self.insert_cas_failures.fetch_add(1, Ordering::Relaxed);
        }
    }

    /// Sets the mark bit of `node`'s link with a fetch-or and returns the
    /// previous word.
    ///
    /// Only the list's single extractor may call this, and only on
    /// `last_deleted` with a non-empty successor.
    pub fn fao_mark(&self, node: ItemId) -> LinkWord {
        LinkWord::from_bits(
            self.arena
                .get(node)
                .link(self.list)
                .fetch_or(1, Ordering::AcqRel),
        )
    }

    /// Logically deletes items from the front until one can be returned.
    ///
    /// With `reserving`, an item is returned only if this call wins its
    /// reservation; items already claimed by the other end are skipped.
    /// Without it this is a plain single-ended extract. `None` means the
    /// list had no undeleted item when its end link was read.
    ///
    /// Caller must be the only active extractor on this list.
    pub fn extract(&self, reserving: bool) -> Option<ItemId> {
        let list = self.list;
        loop {
            let last = self.last_deleted();
            if self.word(last).succ().is_none() {
                return None;
            }
            let prev = self.fao_mark(last);
            let next = prev.succ();
            debug_assert!(!next.is_none());
            let item = self.arena.get(next);
            item.tag_deleted(list);
            self.mark_pending.store(true, Ordering::Relaxed);
            sched::hit(Point::ExtractAfterMark(list));
            self.last_deleted.store(next.0, Ordering::Release);
            self.mark_pending.store(false, Ordering::Relaxed);
            if !reserving {
                return Some(next);
            }
            sched::hit(Point::ExtractBeforeReserve(list));
            if item.try_reserve_as(list) || self.ignore_reservation.load(Ordering::Relaxed) {
                return Some(next);
            }
            self.reserve_failures.fetch_add(1, Ordering::Relaxed);
        }
    }

    /// Drops the deleted prefix up to (not including) `last_deleted` and
    /// returns the dropped items, in list order.
    ///
    /// Caller must hold the extractor role; no extract may be in flight.
    pub fn update_head(&self) -> Vec<ItemId> {
        let head = self.head();
        let last = self.last_deleted();
        if head == last {
            return Vec::new();
        }
        let mut removed = Vec::new();
        let mut n = head;
        while n != last {
            if !self.arena.get(n).is_deleted_in(self.list) {
                self.unmarked_removals.fetch_add(1, Ordering::Relaxed);
            }
            removed.push(n);
            n = self.word(n).succ();
        }
        self.head.store(last.0, Ordering::Release);
        removed
    }

    /// Reservation attempts that lost to the other end.
    pub fn reserve_failures(&self) -> u64 {
        self.reserve_failures.load(Ordering::Relaxed)
    }

    pub fn insert_cas_failures(&self) -> u64 {
        self.insert_cas_failures.load(Ordering::Relaxed)
    }

    /// Items dropped by `update_head` whose incoming link had not been
    /// marked. Always zero unless the list is corrupted.
    pub fn unmarked_removals(&self) -> u64 {
        self.unmarked_removals.load(Ordering::Relaxed)
    }

    #[doc(hidden)]
    pub fn inject_ignore_reservation(&self, on: bool) {
        self.ignore_reservation.store(on, Ordering::Relaxed);
    }

    /// Walks the list from `head`. Only meaningful while the list is
    /// quiescent or every other thread is frozen.
    pub fn snapshot(&self) -> ListSnapshot {
        let limit = self.arena.slots_used() + 1;
        let mut nodes = vec![self.head()];
        let mut incoming = vec![true];
        let mut finite = true;
        let mut tail_marked = false;
        loop {
            let w = self.word(*nodes.last().unwrap());
            if w.succ().is_none() {
                tail_marked = w.marked();
                break;
            }
            if nodes.len() > limit {
                finite = false;
                break;
            }
            nodes.push(w.succ());
            incoming.push(w.marked());
        }
        let prefix_len = incoming.iter().take_while(|&&m| m).count();
        ListSnapshot {
            list: self.list,
            nodes,
            incoming_marked: incoming,
            prefix_len,
            finite,
            tail_marked,
        }
    }

    /// Keys of the undeleted suffix, in list order.
    pub fn suffix_keys(&self) -> Vec<Key> {
        let snap = self.snapshot();
        snap.suffix()
            .iter()
            .map(|&id| self.arena.get(id).key())
            .collect()
    }

    /// Checks the structural invariants of this list.
    ///
    /// Claims: (1) the links from `head` form a finite list; (2) the
    /// deleted items form a prefix; (3) the suffix after it is strictly
    /// sorted; (4) `last_deleted` is the last item of the prefix, or the
    /// second-last while an extractor sits between its mark and its
    /// `last_deleted` write. It also checks that `head` and `last_deleted`
    /// name deleted items and that deletion tags agree with the marks.
    pub fn audit(&self) -> ListAudit {
        let snap = self.snapshot();
        let last_deleted = self.last_deleted();
        let pending = self.mark_pending.load(Ordering::Relaxed);
        let mut report = ListAudit {
            list: self.list,
            finite: snap.finite,
            deleted_prefix: true,
            sorted: true,
            last_deleted_position: true,
            ends_deleted: true,
            mark_pending: pending,
            problems: Vec::new(),
            path: String::new(),
        };
        if !snap.finite {
            report.problems.push("link walk exceeded arena size".into());
        }

        let first_unmarked = snap.prefix_len;
        if snap.incoming_marked[first_unmarked..].iter().any(|&m| m) || snap.tail_marked {
            report.deleted_prefix = false;
            report
                .problems
                .push("marked link after the deleted prefix".into());
        }
        for (i, &id) in snap.nodes.iter().enumerate() {
            let tagged = self.arena.get(id).is_deleted_in(self.list);
            if tagged != (i < snap.prefix_len) {
                report.deleted_prefix = false;
                report
                    .problems
                    .push(format!("deletion tag of {id:?} disagrees with marks"));
            }
        }

        let keys: Vec<Key> = snap
            .suffix()
            .iter()
            .map(|&id| self.arena.get(id).key())
            .collect();
        if let Some(i) = keys.windows(2).position(|w| !before(w[0], w[1], self.list)) {
            report.sorted = false;
            report
                .problems
                .push(format!("suffix out of order at position {i}"));
        }

        let expected = if pending {
            snap.prefix_len.checked_sub(2).map(|i| snap.nodes[i])
        } else {
            Some(snap.nodes[snap.prefix_len - 1])
        };
        if expected != Some(last_deleted) {
            report.last_deleted_position = false;
            report.problems.push(format!(
                "last_deleted is {last_deleted:?}, expected {expected:?} (mark pending: {pending})"
            ));
        }

        let prefix = &snap.nodes[..snap.prefix_len];
        for (name, id) in [("head", snap.nodes[0]), ("last_deleted", last_deleted)] {
            if !prefix.contains(&id) || !self.arena.get(id).is_deleted_in(self.list) {
                report.ends_deleted = false;
                report
                    .problems
                    .push(format!("{name} {id:?} is not logically deleted"));
            }
        }

        if !report.passed() {
            report.path = snap.render(&self.arena);
        }
        report
    }
}

/// A quiescent walk of one list.
#[derive(Clone, Debug)]
pub struct ListSnapshot {
    pub list: End,
    /// Items from `head` onward.
    pub nodes: Vec<ItemId>,
    /// Whether the link into `nodes[i]` is marked (`true` for the head).
    pub incoming_marked: Vec<bool>,
    /// Length of the leading run of deleted items.
    pub prefix_len: usize,
    pub finite: bool,
    tail_marked: bool,
}

impl ListSnapshot {
    pub fn prefix(&self) -> &[ItemId] {
        &self.nodes[..self.prefix_len]
    }

    pub fn suffix(&self) -> &[ItemId] {
        &self.nodes[self.prefix_len..]
    }

    /// Renders `head -> 3 -m-> 5 -> 2` style paths; `*` is the sentinel.
    pub fn render(&self, arena: &ItemArena) -> String {
        let mut out = String::new();
        for (i, &id) in self.nodes.iter().enumerate() {
            let item = arena.peek(id);
            let label = if item.key().uid == u64::MAX {
                "*".to_string()
            } else {
                item.user_key().to_string()
            };
            if i > 0 {
                out.push_str(if self.incoming_marked[i] {
                    " -m-> "
                } else {
                    " -> "
                });
            }
            out.push_str(&label);
        }
        out
    }

    /// User keys along the whole walk (sentinels omitted).
    pub fn user_keys(&self, arena: &ItemArena) -> Vec<i64> {
        self.nodes
            .iter()
            .map(|&id| arena.peek(id))
            .filter(|item| item.key().uid != u64::MAX)
            .map(|item| item.user_key())
            .collect()
    }
}

/// Result of [`SortedList::audit`].
#[derive(Clone, Debug)]
pub struct ListAudit {
    pub list: End,
    pub finite: bool,
    pub deleted_prefix: bool,
    pub sorted: bool,
    pub last_deleted_position: bool,
    /// `head` and `last_deleted` are logically deleted.
    pub ends_deleted: bool,
    /// An extractor was between its mark and its `last_deleted` write.
    pub mark_pending: bool,
    pub problems: Vec<String>,
    /// Rendered path, filled in only on failure.
    pub path: String,
}

impl ListAudit {
    pub fn passed(&self) -> bool {
        self.finite
            && self.deleted_prefix
            && self.sorted
            && self.last_deleted_position
            && self.ends_deleted
    }
}

/// The standalone single-consumer priority queue: one sorted list, plain
/// extraction, head advanced after every extract.
///
/// Dropped items stay in the arena until it is dropped.
pub struct ListPq {
    list: SortedList,
}

impl ListPq {
    pub fn new(arena: Arc<ItemArena>, order: End) -> Result<Self> {
        Ok(ListPq {
            list: SortedList::new(arena, order)?,
        })
    }

    pub fn list(&self) -> &SortedList {
        &self.list
    }
}

impl PriorityQueue for ListPq {
    fn order(&self) -> End {
        self.list.list()
    }

    fn pq_insert(&self, item: ItemId) {
        self.list.insert(item);
    }

    fn pq_extract_first(&self) -> Option<ItemId> {
        let got = self.list.extract(false);
        self.list.update_head();
        got
    }

    fn contents(&self) -> Vec<ItemId> {
        self.list.snapshot().suffix().to_vec()
    }

    fn check(&self) -> bool {
        self.list.audit().passed()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list_with(order: End, keys: &[i64]) -> (Arc<ItemArena>, SortedList, Vec<ItemId>) {
        let arena = Arc::new(ItemArena::new());
        let list = SortedList::new(Arc::clone(&arena), order).unwrap();
        let ids = keys
            .iter()
            .map(|&k| {
                let id = arena.new_item(k).unwrap();
                list.insert(id);
                id
            })
            .collect();
        (arena, list, ids)
    }

    fn suffix_users(list: &SortedList) -> Vec<i64> {
        list.suffix_keys().iter().map(|k| k.user).collect()
    }

    #[test]
    fn link_word_packing() {
        let w = LinkWord::new(ItemId(42), true);
        assert_eq!(w.succ(), ItemId(42));
        assert!(w.marked());
        assert!(LinkWord::END.succ().is_none());
        assert!(!LinkWord::END.marked());
        let top = LinkWord::new(ItemId(u32::MAX - 1), false);
        assert_eq!(top.succ(), ItemId(u32::MAX - 1));
    }

    #[test]
    fn before_examples() {
        let three = Key::new(3, 0);
        let five = Key::new(5, 1);
        assert!(before(three, five, End::Min));
        assert!(!before(three, five, End::Max));
    }

    #[test]
    fn insert_into_empty_list() {
        let (arena, list, _) = list_with(End::Min, &[3]);
        let snap = list.snapshot();
        assert_eq!(snap.nodes.len(), 2);
        assert_eq!(snap.render(&arena), "* -> 3");
    }

    #[test]
    fn insert_keeps_min_order() {
        let (_, list, _) = list_with(End::Min, &[2, 4, 3]);
        assert_eq!(suffix_users(&list), vec![2, 3, 4]);
    }

    #[test]
    fn insert_keeps_max_order() {
        let (_, list, _) = list_with(End::Max, &[4, 2, 3]);
        assert_eq!(suffix_users(&list), vec![4, 3, 2]);
    }

    #[test]
    fn fao_mark_returns_prior_word() {
        let (arena, list, ids) = list_with(End::Min, &[7]);
        let head = list.head();
        let before = list.fao_mark(head);
        assert_eq!(before, LinkWord::new(ids[0], false));
        assert_eq!(
            arena.get(head).link_word(End::Min),
            LinkWord::new(ids[0], true)
        );
        let again = list.fao_mark(head);
        assert_eq!(again, LinkWord::new(ids[0], true));
        assert_eq!(
            arena.get(head).link_word(End::Min),
            LinkWord::new(ids[0], true)
        );
    }

    #[test]
    fn extract_from_fresh_list_is_none() {
        let (_, list, _) = list_with(End::Min, &[]);
        assert_eq!(list.extract(true), None);
        assert_eq!(list.extract(false), None);
    }

    #[test]
    fn plain_extract_returns_front() {
        let (_, list, ids) = list_with(End::Min, &[1, 2]);
        assert_eq!(list.extract(false), Some(ids[0]));
        assert_eq!(list.last_deleted(), ids[0]);
        assert!(list.audit().passed());
    }

    #[test]
    fn reserving_extract_skips_claimed_items() {
        let (arena, list, ids) = list_with(End::Min, &[1, 2]);
        assert!(arena.get(ids[0]).try_reserve());
        assert_eq!(list.extract(true), Some(ids[1]));
        assert!(arena.get(ids[0]).is_deleted_in(End::Min));
        assert!(arena.get(ids[1]).is_deleted_in(End::Min));
        assert_eq!(list.reserve_failures(), 1);
        assert_eq!(list.snapshot().prefix_len, 3);
    }

    #[test]
    fn update_head_is_noop_when_caught_up() {
        let (_, list, _) = list_with(End::Min, &[1]);
        let head = list.head();
        assert!(list.update_head().is_empty());
        assert_eq!(list.head(), head);
    }

    #[test]
    fn update_head_drops_prefix_but_last() {
        let (_, list, ids) = list_with(End::Min, &[1, 2]);
        let dummy = list.head();
        list.extract(false);
        assert_eq!(list.update_head(), vec![dummy]);
        assert_eq!(list.head(), ids[0]);

        let (_, list, ids) = list_with(End::Min, &[1, 2]);
        let dummy = list.head();
        list.extract(false);
        list.extract(false);
        assert_eq!(list.update_head(), vec![dummy, ids[0]]);
        assert_eq!(list.head(), ids[1]);
        assert!(list.audit().passed());
        assert_eq!(list.unmarked_removals(), 0);
    }

    #[test]
    fn initial_audit_passes() {
        let (_, list, _) = list_with(End::Max, &[]);
        let audit = list.audit();
        assert!(audit.passed(), "{audit:?}");
        assert_eq!(list.snapshot().prefix().len(), 1);
        assert!(list.snapshot().suffix().is_empty());
    }

    #[test]
    fn audit_catches_out_of_order_suffix() {
        let (arena, list, ids) = list_with(End::Min, &[1, 2, 3]);
        // Splice 3 ahead of 2 by hand.
        let head = list.head();
        arena
            .get(head)
            .link(End::Min)
            .store(LinkWord::new(ids[0], false).bits(), Ordering::Relaxed);
        arena
            .get(ids[0])
            .link(End::Min)
            .store(LinkWord::new(ids[2], false).bits(), Ordering::Relaxed);
        arena
            .get(ids[2])
            .link(End::Min)
            .store(LinkWord::new(ids[1], false).bits(), Ordering::Relaxed);
        arena
            .get(ids[1])
            .link(End::Min)
            .store(LinkWord::END.bits(), Ordering::Relaxed);
        let audit = list.audit();
        assert!(!audit.sorted);
        assert!(!audit.passed());
        assert_eq!(audit.path, "* -> 1 -> 3 -> 2");
    }

    #[test]
    fn audit_catches_mark_outside_prefix() {
        let (arena, list, ids) = list_with(End::Min, &[1, 2]);
        arena
            .get(ids[0])
            .link(End::Min)
            .fetch_or(1, Ordering::Relaxed);
        let audit = list.audit();
        assert!(!audit.deleted_prefix);
    }

    #[test]
    fn audit_catches_stale_last_deleted() {
        let (_, list, ids) = list_with(End::Min, &[1, 2]);
        list.extract(false);
        list.last_deleted.store(ids[1].0, Ordering::Relaxed);
        let audit = list.audit();
        assert!(!audit.last_deleted_position);
        assert!(!audit.ends_deleted);
    }

    #[test]
    fn list_pq_extracts_in_order() {
        let arena = Arc::new(ItemArena::new());
        let pq = ListPq::new(Arc::clone(&arena), End::Max).unwrap();
        for k in [5, 1, 3] {
            pq.pq_insert(arena.new_item(k).unwrap());
        }
        let got: Vec<i64> = std::iter::from_fn(|| pq.pq_extract_first())
            .map(|id| arena.get(id).user_key())
            .collect();
        assert_eq!(got, vec![5, 3, 1]);
        assert!(pq.list().audit().passed());
    }

    #[test]
    fn concurrent_inserts_stay_sorted() {
        let arena = Arc::new(ItemArena::new());
        let list = SortedList::new(Arc::clone(&arena), End::Min).unwrap();
        std::thread::scope(|s| {
            for t in 0..4i64 {
                let arena = &arena;
                let list = &list;
                s.spawn(move || {
                    for i in 0..500 {
                        list.insert(arena.new_item(i * 4 + t).unwrap());
                    }
                });
            }
        });
        let keys = suffix_users(&list);
        assert_eq!(keys, (0..2000).collect::<Vec<_>>());
        assert!(list.audit().passed());
    }
}

//! Queue-lock combining: one thread at a time serves a FIFO batch of
//! announced requests on behalf of the waiters.
//!
//! Each announcer swaps a fresh record into `tail`, gets the previous tail
//! record back, publishes its request there and spins on that record's
//! `wait` flag. When the flag drops, either `completed` is set and the
//! result is ready, or the announcer has become the combiner: it walks the
//! chain applying up to `batch_cap` requests, runs the finalizer once, and
//! hands the role to the next record by clearing its `wait` flag.
//!
//! Records are not tied to an instance. A thread keeps one spare record in
//! a thread-local pool; after every announce it owns the predecessor record
//! it was served through, which becomes its next spare.

use std::cell::{RefCell, UnsafeCell};
use std::marker::PhantomData;
use std::ptr;
use std::sync::atomic::{AtomicBool, AtomicPtr, AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use crossbeam_utils::{Backoff, CachePadded};

use crate::error::{Error, Result};

/// Default number of requests a combiner serves before handing off.
pub const DEFAULT_BATCH_CAP: usize = 64;

/// The work a combining instance performs.
pub trait BatchHandler: Send + Sync {
    type Request: Send;
    type Response: Send;

    fn apply(&self, req: Self::Request) -> Self::Response;

    /// Runs once at the end of every batch, before the combiner role moves on.
    fn finalize(&self);
}

/// Adapts a pair of closures into a [`BatchHandler`].
pub struct FnHandler<Req, Res, A, F> {
    apply: A,
    finalize: F,
    _io: PhantomData<fn(Req) -> Res>,
}

impl<Req, Res, A, F> FnHandler<Req, Res, A, F> {
    pub fn new(apply: A, finalize: F) -> Self {
        FnHandler {
            apply,
            finalize,
            _io: PhantomData,
        }
    }
}

impl<Req, Res, A, F> BatchHandler for FnHandler<Req, Res, A, F>
where
    Req: Send,
    Res: Send,
    A: Fn(Req) -> Res + Send + Sync,
    F: Fn() + Send + Sync,
{
    type Request = Req;
    type Response = Res;

    fn apply(&self, req: Req) -> Res {
        (self.apply)(req)
    }

    fn finalize(&self) {
        (self.finalize)()
    }
}

struct Record {
    wait: AtomicBool,
    completed: AtomicBool,
    next: AtomicPtr<Record>,
    // Points at the announcer's stack-held `Slot`.
    slot: AtomicPtr<()>,
    ticket: AtomicU64,
}

impl Record {
    fn boxed(wait: bool) -> *mut Record {
        Box::into_raw(Box::new(Record {
            wait: AtomicBool::new(wait),
            completed: AtomicBool::new(false),
            next: AtomicPtr::new(ptr::null_mut()),
            slot: AtomicPtr::new(ptr::null_mut()),
            ticket: AtomicU64::new(0),
        }))
    }
}

struct Slot<Req, Res> {
    req: Option<Req>,
    res: Option<Res>,
    ticket: u64,
}

struct RecordPool(Vec<*mut Record>);

impl Drop for RecordPool {
    fn drop(&mut self) {
        for &r in &self.0 {
            // SAFETY: pooled records are owned exclusively by this thread.
            drop(unsafe { Box::from_raw(r) });
        }
    }
}

thread_local! {
    static POOL: RefCell<RecordPool> = const { RefCell::new(RecordPool(Vec::new())) };
}

fn take_record() -> *mut Record {
    POOL.with(|p| p.borrow_mut().0.pop())
        .unwrap_or_else(|| Record::boxed(true))
}

fn give_record(r: *mut Record) {
    POOL.with(|p| p.borrow_mut().0.push(r));
}

const HIST_BUCKETS: usize = 12;

/// Counters kept by a combining instance.
#[derive(Default)]
pub struct CombinerStats {
    announces: AtomicU64,
    applies: AtomicU64,
    batches: AtomicU64,
    finalizes: AtomicU64,
    active: AtomicUsize,
    max_active: AtomicUsize,
    batch_hist: [AtomicU64; HIST_BUCKETS],
}

/// Plain copy of [`CombinerStats`].
#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct CombinerCounts {
    pub announces: u64,
    pub applies: u64,
    pub batches: u64,
    pub finalizes: u64,
    /// Most combiners ever observed active at once.
    pub max_concurrent_combiners: usize,
    /// `batch_sizes[i]` counts batches of size in `[2^i, 2^(i+1))`.
    pub batch_sizes: Vec<u64>,
}

impl CombinerCounts {
    /// Element-wise sum, for reporting both ends together.
    pub fn merged(&self, other: &CombinerCounts) -> CombinerCounts {
        CombinerCounts {
            announces: self.announces + other.announces,
            applies: self.applies + other.applies,
            batches: self.batches + other.batches,
            finalizes: self.finalizes + other.finalizes,
            max_concurrent_combiners: self
                .max_concurrent_combiners
                .max(other.max_concurrent_combiners),
            batch_sizes: self
                .batch_sizes
                .iter()
                .zip(&other.batch_sizes)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

/// A combining lock instance. See the module docs.
pub struct CcSynch<H: BatchHandler> {
    tail: CachePadded<AtomicPtr<Record>>,
    batch_cap: usize,
    handler: H,
    stats: CombinerStats,
    // Apply order by announce ticket, when tracing.
    trace: Option<Mutex<Vec<u64>>>,
}

// SAFETY: records are shared through atomics; request and response values
// cross threads only via the `Send` bounds on the handler's types.
unsafe impl<H: BatchHandler> Send for CcSynch<H> {}
unsafe impl<H: BatchHandler> Sync for CcSynch<H> {}

impl<Req, Res, A, F> CcSynch<FnHandler<Req, Res, A, F>>
where
    Req: Send,
    Res: Send,
    A: Fn(Req) -> Res + Send + Sync,
    F: Fn() + Send + Sync,
{
    /// Instance from an apply function and a batch finalizer.
    pub fn from_fns(batch_cap: usize, apply: A, finalize: F) -> Result<Self> {
        Self::new(batch_cap, FnHandler::new(apply, finalize))
    }
}

impl<H: BatchHandler> CcSynch<H> {
    pub fn new(batch_cap: usize, handler: H) -> Result<Self> {
        Self::build(batch_cap, handler, false)
    }

    /// Like [`CcSynch::new`], additionally recording the announce ticket of
    /// every applied request so FIFO service can be checked.
    pub fn traced(batch_cap: usize, handler: H) -> Result<Self> {
        Self::build(batch_cap, handler, true)
    }

    fn build(batch_cap: usize, handler: H, trace: bool) -> Result<Self> {
        if batch_cap == 0 {
            return Err(Error::ZeroBatchCap);
        }
        let tail = Record::boxed(false);
        // SAFETY: fresh allocation, not yet shared.
        unsafe { (*tail).ticket.store(1, Ordering::Relaxed) };
        Ok(CcSynch {
            tail: CachePadded::new(AtomicPtr::new(tail)),
            batch_cap,
            handler,
            stats: CombinerStats::default(),
            trace: trace.then(|| Mutex::new(Vec::new())),
        })
    }

    pub fn handler(&self) -> &H {
        &self.handler
    }

    pub fn batch_cap(&self) -> usize {
        self.batch_cap
    }

    /// Announces `req` and blocks until some combiner (possibly this
    /// thread) has applied it.
    pub fn announce(&self, req: H::Request) -> H::Response {
        self.stats.announces.fetch_add(1, Ordering::Relaxed);
        let slot = UnsafeCell::new(Slot::<H::Request, H::Response> {
            req: Some(req),
            res: None,
            ticket: 0,
        });

        let fresh = take_record();
        // SAFETY: `fresh` is exclusively ours until the swap publishes it.
        unsafe {
            (*fresh).wait.store(true, Ordering::Relaxed);
            (*fresh).completed.store(false, Ordering::Relaxed);
            (*fresh).next.store(ptr::null_mut(), Ordering::Relaxed);
            (*fresh).ticket.store(0, Ordering::Relaxed);
        }
        let cur = self.tail.swap(fresh, Ordering::AcqRel);
        // SAFETY: `cur` was the tail; only its announcer (us) writes its
        // request fields, and it stays alive until we own it below.
        let cur_ref = unsafe { &*cur };

        if self.trace.is_some() {
            let backoff = Backoff::new();
            let mut ticket = cur_ref.ticket.load(Ordering::Acquire);
            while ticket == 0 {
                backoff.snooze();
                ticket = cur_ref.ticket.load(Ordering::Acquire);
            }
            // SAFETY: the slot is not shared until `next` is stored below.
            unsafe { (*slot.get()).ticket = ticket };
            unsafe { (*fresh).ticket.store(ticket + 1, Ordering::Release) };
        }

        cur_ref.slot.store(slot.get() as *mut (), Ordering::Relaxed);
        cur_ref.next.store(fresh, Ordering::Release);

        let backoff = Backoff::new();
        while cur_ref.wait.load(Ordering::Acquire) {
            backoff.snooze();
        }
        if cur_ref.completed.load(Ordering::Acquire) {
            give_record(cur);
            // SAFETY: the combiner finished with the slot before `completed`.
            return unsafe { (*slot.get()).res.take() }.expect("combined request has a result");
        }

        self.combine(cur);
        give_record(cur);
        // SAFETY: we applied our own request in `combine`.
        unsafe { (*slot.get()).res.take() }.expect("own request applied")
    }

    fn combine(&self, start: *mut Record) {
        let active = self.stats.active.fetch_add(1, Ordering::AcqRel) + 1;
        self.stats.max_active.fetch_max(active, Ordering::Relaxed);

        let mut tmp = start;
        let mut served = 0usize;
        let mut tickets = self.trace.as_ref().map(|t| t.lock().unwrap());
        loop {
            // SAFETY: records in the chain from `start` up to the tail stay
            // alive until their `wait` flag is cleared by us.
            let rec = unsafe { &*tmp };
            let next = rec.next.load(Ordering::Acquire);
            if next.is_null() || served == self.batch_cap {
                break;
            }
            served += 1;
            let slot = rec.slot.load(Ordering::Relaxed) as *mut Slot<H::Request, H::Response>;
            // SAFETY: the announcer published `slot` before `next` and is
            // spinning, so its stack frame is live and untouched.
            unsafe {
                let req = (*slot).req.take().expect("request present");
                if let Some(t) = tickets.as_mut() {
                    t.push((*slot).ticket);
                }
                (*slot).res = Some(self.handler.apply(req));
            }
            rec.completed.store(true, Ordering::Release);
            rec.wait.store(false, Ordering::Release);
            tmp = next;
        }
        drop(tickets);

        self.stats
            .applies
            .fetch_add(served as u64, Ordering::Relaxed);
        self.stats.batches.fetch_add(1, Ordering::Relaxed);
        let bucket = (usize::BITS - 1 - served.max(1).leading_zeros()) as usize;
        self.stats.batch_hist[bucket.min(HIST_BUCKETS - 1)].fetch_add(1, Ordering::Relaxed);

        self.handler.finalize();
        self.stats.finalizes.fetch_add(1, Ordering::Relaxed);

        self.stats.active.fetch_sub(1, Ordering::AcqRel);
        // SAFETY: `tmp` is either the tail or an unserved record whose
        // announcer is spinning on it; clearing `wait` hands off the role.
        unsafe { (*tmp).wait.store(false, Ordering::Release) };
    }

    pub fn counts(&self) -> CombinerCounts {
        let s = &self.stats;
        CombinerCounts {
            announces: s.announces.load(Ordering::Relaxed),
            applies: s.applies.load(Ordering::Relaxed),
            batches: s.batches.load(Ordering::Relaxed),
            finalizes: s.finalizes.load(Ordering::Relaxed),
            max_concurrent_combiners: s.max_active.load(Ordering::Relaxed),
            batch_sizes: s
                .batch_hist
                .iter()
                .map(|b| b.load(Ordering::Relaxed))
                .collect(),
        }
    }

    /// Announce tickets in apply order (empty unless built with
    /// [`CcSynch::traced`]). Tickets start at 1.
    pub fn apply_trace(&self) -> Vec<u64> {
        self.trace
            .as_ref()
            .map(|t| t.lock().unwrap().clone())
            .unwrap_or_default()
    }
}

impl<H: BatchHandler> Drop for CcSynch<H> {
    fn drop(&mut self) {
        // With no announce in flight the tail record belongs to nobody else.
        let tail = self.tail.load(Ordering::Acquire);
        drop(unsafe { Box::from_raw(tail) });
    }
}

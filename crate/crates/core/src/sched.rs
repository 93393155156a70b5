//! Instrumented yield points for forcing specific interleavings.
//!
//! Queue operations call [`hit`] at a few named points. Normally that is a
//! single relaxed load. A thread that has installed a [`Gate`] for a point
//! blocks there until the controlling thread lets it through, which is how
//! tests and the `replay` command freeze a thread mid-operation and run
//! other operations around it.

use std::cell::RefCell;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use crate::pq_api::End;

/// Named points inside the queue algorithms.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Point {
    /// Sorted-list insert: successor written into the new node, CAS not yet tried.
    InsertBeforeCas(End),
    /// Sorted-list extract: link marked, `last_deleted` not yet advanced.
    ExtractAfterMark(End),
    /// Sorted-list extract: `last_deleted` advanced, reservation not yet tried.
    ExtractBeforeReserve(End),
    /// Generic construction insert: in the min queue, not yet in the max queue.
    DualBetweenInserts,
    /// Generic construction extract: top of the retry loop.
    DualLoopTop(End),
    /// Generic construction extract: item pulled from one queue, not yet reserved.
    DualAfterPqExtract(End),
}

static ARMED: AtomicUsize = AtomicUsize::new(0);

thread_local! {
    static GATES: RefCell<Vec<Arc<Gate>>> = const { RefCell::new(Vec::new()) };
}

/// Reports that the current thread reached `point`.
#[inline]
pub fn hit(point: Point) {
    if ARMED.load(Ordering::Relaxed) == 0 {
        return;
    }
    hit_slow(point);
}

#[cold]
fn hit_slow(point: Point) {
    let gates: Vec<Arc<Gate>> = GATES.with(|g| {
        g.borrow()
            .iter()
            .filter(|gate| gate.point == point)
            .cloned()
            .collect()
    });
    for gate in gates {
        gate.pass();
    }
}

#[derive(Default)]
struct GateState {
    arrivals: usize,
    skipped: usize,
    permits: usize,
    open: bool,
}

/// Blocks the thread that installed it each time it reaches one point.
///
/// Every arrival waits for a permit from [`Gate::release`] unless the gate has
/// been [opened](Gate::open). The first `skip` arrivals pass freely.
pub struct Gate {
    point: Point,
    skip: usize,
    state: Mutex<GateState>,
    cond: Condvar,
}

impl Gate {
    pub fn new(point: Point) -> Arc<Gate> {
        Self::skipping(point, 0)
    }

    /// A gate that lets the first `skip` arrivals through unblocked.
    pub fn skipping(point: Point, skip: usize) -> Arc<Gate> {
        Arc::new(Gate {
            point,
            skip,
            state: Mutex::new(GateState::default()),
            cond: Condvar::new(),
        })
    }

    pub fn point(&self) -> Point {
        self.point
    }

    /// Arms this gate for the calling thread. Dropping the guard disarms it.
    pub fn install(self: &Arc<Self>) -> GateGuard {
        GATES.with(|g| g.borrow_mut().push(Arc::clone(self)));
        ARMED.fetch_add(1, Ordering::SeqCst);
        GateGuard {
            gate: Arc::clone(self),
        }
    }

    fn pass(&self) {
        let mut st = self.state.lock().unwrap();
        if st.skipped < self.skip {
            st.skipped += 1;
            return;
        }
        st.arrivals += 1;
        self.cond.notify_all();
        while !st.open && st.permits == 0 {
            st = self.cond.wait(st).unwrap();
        }
        if !st.open {
            st.permits -= 1;
        }
    }

    /// Number of blocking arrivals so far.
    pub fn arrivals(&self) -> usize {
        self.state.lock().unwrap().arrivals
    }

    /// Waits until at least `n` blocking arrivals happened.
    pub fn wait_arrivals(&self, n: usize, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut st = self.state.lock().unwrap();
        while st.arrivals < n {
            let now = Instant::now();
            if now >= deadline {
                return false;
            }
            st = self.cond.wait_timeout(st, deadline - now).unwrap().0;
        }
        true
    }

    /// Lets `n` more arrivals through.
    pub fn release(&self, n: usize) {
        self.state.lock().unwrap().permits += n;
        self.cond.notify_all();
    }

    /// Stops blocking for good.
    pub fn open(&self) {
        self.state.lock().unwrap().open = true;
        self.cond.notify_all();
    }
}

/// Disarms a [`Gate`] for the installing thread when dropped.
pub struct GateGuard {
    gate: Arc<Gate>,
}

impl Drop for GateGuard {
    fn drop(&mut self) {
        GATES.with(|g| {
            let mut g = g.borrow_mut();
            if let Some(pos) = g.iter().position(|x| Arc::ptr_eq(x, &self.gate)) {
                g.remove(pos);
            }
        });
        ARMED.fetch_sub(1, Ordering::SeqCst);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WAIT: Duration = Duration::from_secs(5);

    #[test]
    fn unarmed_points_do_not_block() {
        hit(Point::DualBetweenInserts);
    }

    #[test]
    fn gate_freezes_and_releases() {
        let gate = Gate::new(Point::DualBetweenInserts);
        let g = Arc::clone(&gate);
        let h = std::thread::spawn(move || {
            let _guard = g.install();
            hit(Point::DualBetweenInserts);
            hit(Point::DualBetweenInserts);
            7
        });
        assert!(gate.wait_arrivals(1, WAIT));
        assert!(!h.is_finished());
        gate.release(1);
        assert!(gate.wait_arrivals(2, WAIT));
        gate.open();
        assert_eq!(h.join().unwrap(), 7);
    }

    #[test]
    fn gate_only_affects_installing_thread() {
        let gate = Gate::new(Point::DualLoopTop(End::Min));
        let _guard = gate.install();
        std::thread::spawn(|| hit(Point::DualLoopTop(End::Min)))
            .join()
            .unwrap();
        assert_eq!(gate.arrivals(), 0);
        gate.open();
    }

    #[test]
    fn skipping_gate_lets_early_arrivals_through() {
        let gate = Gate::skipping(Point::DualLoopTop(End::Max), 2);
        let g = Arc::clone(&gate);
        let h = std::thread::spawn(move || {
            let _guard = g.install();
            for _ in 0..3 {
                hit(Point::DualLoopTop(End::Max));
            }
        });
        assert!(gate.wait_arrivals(1, WAIT));
        gate.release(1);
        h.join().unwrap();
        assert_eq!(gate.arrivals(), 1);
    }
}

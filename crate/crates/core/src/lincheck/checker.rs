//! Linearizability decision for small histories.
//!
//! Depth-first search over candidate linearizations: at each step any
//! not-yet-placed operation invoked before the earliest pending response
//! may go next, provided the sequential queue reproduces its recorded
//! result. Completed operations must all be placed; pending ones may be
//! placed (with any result) or left out. Failed (placed set, queue
//! contents) pairs are memoized.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::lincheck::history::{Event, History};
use crate::oracle::{seq_apply, SeqDepq};

/// Default limit on completed operations per history.
pub const DEFAULT_BOUND: usize = 20;
/// Default limit on distinct search states.
pub const DEFAULT_BUDGET: usize = 2_000_000;
/// Hard limit on events, pending included.
pub const MAX_EVENTS: usize = 64;

#[derive(Copy, Clone, Debug)]
pub struct CheckConfig {
    pub bound: usize,
    pub budget: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            bound: DEFAULT_BOUND,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Event indices in linearization order. Dropped pending operations
    /// are absent.
    Linearizable(Vec<usize>),
    NotLinearizable,
}

impl Verdict {
    pub fn is_linearizable(&self) -> bool {
        matches!(self, Verdict::Linearizable(_))
    }
}

/// [`check_with`] under the default bound and budget.
pub fn check(h: &History) -> Result<Verdict> {
    check_with(h, CheckConfig::default())
}

pub fn check_with(h: &History, cfg: CheckConfig) -> Result<Verdict> {
    h.validate()?;
    if h.completed() > cfg.bound {
        return Err(Error::HistoryTooLarge {
            found: h.completed(),
            bound: cfg.bound,
        });
    }
    if h.len() > MAX_EVENTS {
        return Err(Error::HistoryTooLarge {
            found: h.len(),
            bound: MAX_EVENTS,
        });
    }
    let required = h
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.is_pending())
        .fold(0u64, |m, (i, _)| m | 1 << i);
    let mut s = Search {
        evs: &h.events,
        required,
        failed: HashSet::new(),
        budget: cfg.budget,
        order: Vec::with_capacity(h.len()),
    };
    if s.dfs(0, &SeqDepq::new())? {
        debug_assert!(verify_witness(h, &s.order));
        Ok(Verdict::Linearizable(s.order))
    } else {
        Ok(Verdict::NotLinearizable)
    }
}

struct Search<'a> {
    evs: &'a [Event],
    required: u64,
    failed: HashSet<(u64, Vec<i64>)>,
    budget: usize,
    order: Vec<usize>,
}

impl Search<'_> {
    fn dfs(&mut self, done: u64, state: &SeqDepq) -> Result<bool> {
        if done & self.required == self.required {
            return Ok(true);
        }
        let memo_key = (done, state.user_keys());
        if self.failed.contains(&memo_key) {
            return Ok(false);
        }
        if self.failed.len() >= self.budget {
            return Err(Error::SearchBudgetExceeded(self.budget));
        }
        let horizon = (0..self.evs.len())
            .filter(|&i| done & (1 << i) == 0)
            .filter_map(|i| self.evs[i].response)
            .min()
            .unwrap_or(u64::MAX);
        for i in 0..self.evs.len() {
            let e = &self.evs[i];
            if done & (1 << i) != 0 || e.invoke > horizon {
                continue;
            }
            let (next, r) = seq_apply(state, e.op());
            if e.result.is_some_and(|want| want.as_option() != r) {
                continue;
            }
            self.order.push(i);
            if self.dfs(done | 1 << i, &next)? {
                return Ok(true);
            }
            self.order.pop();
        }
        self.failed.insert(memo_key);
        Ok(false)
    }
}

/// Independently re-checks a witness: every completed event appears
/// exactly once, real-time order is kept, and replaying the order through
/// the sequential queue reproduces every recorded result.
pub fn verify_witness(h: &History, order: &[usize]) -> bool {
    let mut seen = vec![false; h.len()];
    for &i in order {
        if i >= h.len() || std::mem::replace(&mut seen[i], true) {
            return false;
        }
    }
    if h.events
        .iter()
        .zip(&seen)
        .any(|(e, &s)| !e.is_pending() && !s)
    {
        return false;
    }
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a + 1..] {
            if h.events[j].precedes(&h.events[i]) {
                return false;
            }
        }
    }
    let mut q = SeqDepq::new();
    order.iter().all(|&i| {
        let e = &h.events[i];
        let r = q.apply(e.op());
        e.result.is_none_or(|want| want.as_option() == r)
    })
}

/// Exhaustive enumeration of every ordering of every admissible subset,
/// with no memoization and no real-time pruning. Exponential; meant for
/// cross-checking [`check`] on histories of a handful of operations.
pub fn check_naive(h: &History) -> bool {
    fn go(h: &History, order: &mut Vec<usize>, used: &mut [bool], q: &SeqDepq) -> bool {
        if verify_witness(h, order) {
            return true;
        }
        for i in 0..h.len() {
            if used[i] {
                continue;
            }
            let e = &h.events[i];
            let (next, r) = seq_apply(q, e.op());
            if e.result.is_some_and(|want| want.as_option() != r) {
                continue;
            }
            used[i] = true;
            order.push(i);
            let found = go(h, order, used, &next);
            order.pop();
            used[i] = false;
            if found {
                return true;
            }
        }
        false
    }
    go(
        h,
        &mut Vec::new(),
        &mut vec![false; h.len()],
        &SeqDepq::new(),
    )
}

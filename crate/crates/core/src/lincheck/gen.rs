//! Random small histories for testing the checker itself.
//!
//! [`random_history`] simulates threads whose operations take effect at a
//! random instant inside their interval, so its output always has a
//! witness. [`mutate_result`] then corrupts one extract result, which
//! usually (not always) destroys every witness.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::lincheck::history::{Event, History, OpKind, Outcome};
use crate::oracle::{DepqOp, SeqDepq};

#[derive(Copy, Clone, Debug)]
pub struct GenConfig {
    pub ops: usize,
    pub threads: usize,
    pub key_range: i64,
    /// Chance that a thread's last operation is left pending.
    pub pending_prob: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            ops: 8,
            threads: 3,
            key_range: 5,
            pending_prob: 0.15,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq)]
enum Step {
    Invoke,
    Effect,
    Respond,
}

pub fn random_history<R: Rng>(rng: &mut R, cfg: GenConfig) -> History {
    let threads = cfg.threads.max(1);
    // Deal ops to threads; inserts are more likely so extracts find items.
    let mut plans: Vec<Vec<DepqOp>> = vec![Vec::new(); threads];
    for _ in 0..cfg.ops {
        let op = match rng.gen_range(0..5) {
            0..=1 => DepqOp::Insert(rng.gen_range(0..cfg.key_range.max(1))),
            2..=3 => DepqOp::ExtractMin,
            _ => DepqOp::ExtractMax,
        };
        plans[rng.gen_range(0..threads)].push(op);
    }
    // Where a thread with a pending last op stops: before or after its effect.
    let cut: Vec<Option<Step>> = plans
        .iter()
        .map(|p| {
            let pend = !p.is_empty() && rng.gen_bool(cfg.pending_prob);
            pend.then(|| {
                if rng.gen_bool(0.5) {
                    Step::Effect
                } else {
                    Step::Respond
                }
            })
        })
        .collect();

    // Each op is three steps; a thread runs its steps in order and the
    // scheduler picks a random thread for every step.
    let mut cursor = vec![(0usize, Step::Invoke); threads];
    let mut clock = 0u64;
    let mut q = SeqDepq::new();
    let mut events: Vec<Event> = Vec::new();
    let mut open: Vec<Option<usize>> = vec![None; threads];
    loop {
        let live: Vec<usize> = (0..threads)
            .filter(|&t| {
                let (i, step) = cursor[t];
                let last = plans[t].len().saturating_sub(1);
                i < plans[t].len() && !(i == last && cut[t] == Some(step))
            })
            .collect();
        let Some(&t) = live.choose(rng) else { break };
        let (i, step) = cursor[t];
        let op = plans[t][i];
        match step {
            Step::Invoke => {
                let (kind, arg) = match op {
                    DepqOp::Insert(k) => (OpKind::Insert, Some(k)),
                    DepqOp::ExtractMin => (OpKind::ExtractMin, None),
                    DepqOp::ExtractMax => (OpKind::ExtractMax, None),
                };
                events.push(Event {
                    thread: t as u32,
                    kind,
                    arg,
                    result: None,
                    invoke: clock,
                    response: None,
                });
                open[t] = Some(events.len() - 1);
                clock += 1;
                cursor[t].1 = Step::Effect;
            }
            Step::Effect => {
                let r = q.apply(op);
                let e = &mut events[open[t].unwrap()];
                if e.kind != OpKind::Insert {
                    e.result = Some(Outcome::from_option(r));
                }
                cursor[t].1 = Step::Respond;
            }
            Step::Respond => {
                events[open[t].take().unwrap()].response = Some(clock);
                clock += 1;
                cursor[t] = (i + 1, Step::Invoke);
            }
        }
    }
    // Pending extracts carry no result.
    for e in &mut events {
        if e.response.is_none() {
            e.result = None;
        }
    }
    History::new(events)
}

/// Replaces one completed extract's result with a different value, if the
/// history has any completed extract.
pub fn mutate_result<R: Rng>(rng: &mut R, h: &History, key_range: i64) -> Option<History> {
    let targets: Vec<usize> = (0..h.len())
        .filter(|&i| h.events[i].kind != OpKind::Insert && !h.events[i].is_pending())
        .collect();
    let &i = targets.choose(rng)?;
    let old = h.events[i].result.unwrap();
    let new = loop {
        let cand = if rng.gen_bool(0.25) {
            Outcome::Empty
        } else {
            Outcome::Key(rng.gen_range(0..key_range.max(1) + 1))
        };
        if cand != old {
            break cand;
        }
    };
    let mut out = h.clone();
    out.events[i].result = Some(new);
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lincheck::checker::check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_histories_are_valid_and_linearizable() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let h = random_history(&mut rng, GenConfig::default());
            h.validate().unwrap();
            assert!(h.len() <= 8);
            assert!(check(&h).unwrap().is_linearizable(), "{h}");
        }
    }

    #[test]
    fn mutation_changes_exactly_one_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut changed = 0;
        for _ in 0..100 {
            let h = random_history(&mut rng, GenConfig::default());
            if let Some(m) = mutate_result(&mut rng, &h, 5) {
                m.validate().unwrap();
                let diffs = h
                    .events
                    .iter()
                    .zip(&m.events)
                    .filter(|(a, b)| a != b)
                    .count();
                assert_eq!(diffs, 1);
                changed += 1;
            }
        }
        assert!(changed > 50);
    }
}

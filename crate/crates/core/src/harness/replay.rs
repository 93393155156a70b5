//! Forced interleavings, replayed with [`Gate`]s.
//!
//! * `counterexample`: the generic construction used with two min-extractors
//!   at once. One is frozen holding the smallest item while the other
//!   extractors run; the recorded history has no linearization.
//! * `twist`: an insert frozen just before its max-list CAS while the max
//!   end extracts the node it was about to link before. The insert lands
//!   after that node, so the two lists end up in non-mirrored orders.
//! * `single-item-race`: one item, one extractor per end, each end frozen
//!   in turn right before its reservation. Exactly one wins.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use crate::dual_depq::DualDepq;
use crate::error::{Error, Result};
use crate::lincheck::{check, Recorder, Verdict};
use crate::list_depq::ListDepq;
use crate::oracle::DepqOp;
use crate::pq_api::{Depq, End};
use crate::sched::{Gate, Point};

const ARRIVAL_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Scenario {
    Counterexample,
    Twist,
    SingleItemRace,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [
        Scenario::Counterexample,
        Scenario::Twist,
        Scenario::SingleItemRace,
    ];
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "counterexample" => Ok(Scenario::Counterexample),
            "twist" => Ok(Scenario::Twist),
            "single-item-race" => Ok(Scenario::SingleItemRace),
            other => Err(format!("unknown scenario `{other}`")),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Counterexample => "counterexample",
            Scenario::Twist => "twist",
            Scenario::SingleItemRace => "single-item-race",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ReplayReport {
    pub scenario: Scenario,
    /// The scenario's expectation held.
    pub passed: bool,
    /// One-line summary, e.g. `NOT_LINEARIZABLE`.
    pub verdict: String,
    /// Supporting detail: histories, list dumps, results.
    pub details: Vec<String>,
}

impl fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}: {}", self.scenario, self.verdict)?;
        for d in &self.details {
            writeln!(f, "  {d}")?;
        }
        Ok(())
    }
}

fn not_realized(what: impl Into<String>) -> Error {
    Error::ScheduleNotRealized(what.into())
}

pub fn replay(scenario: Scenario) -> Result<ReplayReport> {
    match scenario {
        Scenario::Counterexample => counterexample(),
        Scenario::Twist => twist(),
        Scenario::SingleItemRace => single_item_race(),
    }
}

fn counterexample() -> Result<ReplayReport> {
    let d = DualDepq::heap();
    let rec = Recorder::new();
    rec.call(0, &d, DepqOp::Insert(1));
    rec.call(0, &d, DepqOp::Insert(2));
    let gate = Gate::new(Point::DualAfterPqExtract(End::Min));
    let (e1, e2, e3) = std::thread::scope(|s| {
        let h = s.spawn(|| {
            let _g = gate.install();
            rec.call(1, &d, DepqOp::ExtractMin)
        });
        if !gate.wait_arrivals(1, ARRIVAL_TIMEOUT) {
            gate.open();
            let _ = h.join();
            return Err(not_realized("first min-extractor never pulled an item"));
        }
        let e2 = rec.call(2, &d, DepqOp::ExtractMin);
        let e3 = rec.call(3, &d, DepqOp::ExtractMax);
        gate.open();
        Ok((h.join().unwrap(), e2, e3))
    })?;
    if (e1, e2, e3) != (None, Some(2), Some(1)) {
        return Err(not_realized(format!("results {e1:?}, {e2:?}, {e3:?}")));
    }
    let history = rec.history();
    let verdict = check(&history)?;
    let mut details: Vec<String> = history.events.iter().map(|e| e.to_string()).collect();
    details.push("extract_min (frozen) -> NONE, extract_min -> 2, extract_max -> 1".into());
    Ok(ReplayReport {
        scenario: Scenario::Counterexample,
        passed: verdict == Verdict::NotLinearizable,
        verdict: match verdict {
            Verdict::NotLinearizable => "NOT_LINEARIZABLE".into(),
            Verdict::Linearizable(_) => "LINEARIZABLE".into(),
        },
        details,
    })
}

/// Keys common to both walks, in each list's order.
fn common_orders(min: &[i64], max: &[i64]) -> (Vec<i64>, Vec<i64>) {
    let a: Vec<i64> = min.iter().copied().filter(|k| max.contains(k)).collect();
    let b: Vec<i64> = max.iter().copied().filter(|k| min.contains(k)).collect();
    (a, b)
}

/// True when the max walk is not the reverse of the min walk over the
/// keys both contain.
pub fn lists_mirrored(q: &ListDepq) -> bool {
    let arena = q.arena();
    let min = q.snapshot(End::Min).user_keys(arena);
    let max = q.snapshot(End::Max).user_keys(arena);
    let (mut a, b) = common_orders(&min, &max);
    a.reverse();
    a == b
}

fn twist() -> Result<ReplayReport> {
    let q = ListDepq::new();
    let mut details = Vec::new();
    let mut audits_ok = true;
    for k in [1, 2, 5] {
        q.insert(k);
    }
    let setup = (q.extract_min(), q.extract_max());
    if setup != (Some(1), Some(5)) {
        return Err(not_realized(format!("setup extracts returned {setup:?}")));
    }
    q.insert(3);
    let gate = Gate::new(Point::InsertBeforeCas(End::Max));
    let got = std::thread::scope(|s| {
        let h = s.spawn(|| {
            let _g = gate.install();
            q.insert(4);
        });
        if !gate.wait_arrivals(1, ARRIVAL_TIMEOUT) {
            gate.open();
            let _ = h.join();
            return Err(not_realized("insert of 4 never reached the max-list CAS"));
        }
        let frozen = q.audit();
        audits_ok &= frozen.passed();
        details.push(format!("frozen insert: min {}", q.dump(End::Min)));
        details.push(format!("frozen insert: max {}", q.dump(End::Max)));
        let got = q.extract_max();
        audits_ok &= q.audit().passed();
        gate.open();
        h.join().unwrap();
        Ok(got)
    })?;
    if got != Some(3) || q.list(End::Max).insert_cas_failures() != 1 {
        return Err(not_realized(format!(
            "extract_max returned {got:?} before the insert retried"
        )));
    }
    audits_ok &= q.audit().passed();
    let mirrored = lists_mirrored(&q);
    details.push(format!("min {}", q.dump(End::Min)));
    details.push(format!("max {}", q.dump(End::Max)));

    let drain = [
        (End::Min, q.extract_min(), Some(2)),
        (End::Max, q.extract_max(), Some(4)),
        (End::Min, q.extract_min(), None),
        (End::Max, q.extract_max(), None),
    ];
    audits_ok &= q.audit().passed();
    let mut drain_ok = true;
    for (end, got, want) in drain {
        drain_ok &= got == want;
        let show = |r: Option<i64>| r.map_or("NONE".to_string(), |k| k.to_string());
        details.push(format!("extract_{end} -> {}", show(got)));
    }
    let passed = !mirrored && audits_ok && drain_ok;
    Ok(ReplayReport {
        scenario: Scenario::Twist,
        passed,
        verdict: format!(
            "lists {}, audits {}, drain {}",
            if mirrored { "mirrored" } else { "not mirrored" },
            if audits_ok { "pass" } else { "FAIL" },
            if drain_ok {
                "in priority order"
            } else {
                "WRONG"
            },
        ),
        details,
    })
}

fn single_item_race() -> Result<ReplayReport> {
    let mut details = Vec::new();
    let mut passed = true;
    for frozen in End::BOTH {
        let q = ListDepq::new();
        q.insert(7);
        let gate = Gate::new(Point::ExtractBeforeReserve(frozen));
        let (late, early) = std::thread::scope(|s| {
            let h = s.spawn(|| {
                let _g = gate.install();
                q.extract(frozen)
            });
            if !gate.wait_arrivals(1, ARRIVAL_TIMEOUT) {
                gate.open();
                let _ = h.join();
                return Err(not_realized(format!(
                    "extract_{frozen} never reached its reservation"
                )));
            }
            let early = q.extract(frozen.opposite());
            gate.open();
            Ok((h.join().unwrap(), early))
        })?;
        let winners = [late, early].iter().filter(|r| r.is_some()).count();
        passed &= winners == 1 && early == Some(7) && q.audit().passed();
        details.push(format!(
            "extract_{frozen} frozen before reserving: extract_{} -> {:?}, extract_{frozen} -> {:?}",
            frozen.opposite(),
            early,
            late
        ));
    }
    Ok(ReplayReport {
        scenario: Scenario::SingleItemRace,
        passed,
        verdict: if passed {
            "exactly one winner in both orders".into()
        } else {
            "FAILED".into()
        },
        details,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_scenario_passes() {
        for s in Scenario::ALL {
            let r = replay(s).unwrap();
            assert!(r.passed, "{r}");
            assert_eq!(s.to_string().parse::<Scenario>().unwrap(), s);
        }
    }

    #[test]
    fn twist_dumps_show_non_mirrored_lists() {
        let r = replay(Scenario::Twist).unwrap();
        assert!(r.details.iter().any(|d| d == "max 3 -> 4 -> 2 -> 1"), "{r}");
        assert!(
            r.details.iter().any(|d| d == "min 1 -> 2 -> 3 -> 4 -> 5"),
            "{r}"
        );
    }

    #[test]
    fn common_order_filter() {
        assert_eq!(
            common_orders(&[1, 2, 3], &[3, 9, 1]),
            (vec![1, 3], vec![3, 1])
        );
    }
}

//! Timestamped operation histories and their JSON-lines file format.
//!
//! One event per line, fields in this order:
//!
//! ```text
//! {"thread":0,"kind":"ExtractMin","arg":null,"result":"NONE","invoke":3,"response":4}
//! ```
//!
//! `arg` is set for inserts only. `result` is a key or `"NONE"` for a
//! completed extract and `null` for inserts and pending operations.
//! A pending operation has `"response":null`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::oracle::DepqOp;
use crate::pq_api::Depq;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    Insert,
    ExtractMin,
    ExtractMax,
}

/// What a completed extract returned.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Key(i64),
    Empty,
}

impl Outcome {
    pub fn from_option(r: Option<i64>) -> Self {
        r.map_or(Outcome::Empty, Outcome::Key)
    }

    pub fn as_option(self) -> Option<i64> {
        match self {
            Outcome::Key(k) => Some(k),
            Outcome::Empty => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Key(k) => write!(f, "{k}"),
            Outcome::Empty => f.write_str("NONE"),
        }
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Outcome::Key(k) => s.serialize_i64(*k),
            Outcome::Empty => s.serialize_str("NONE"),
        }
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Key(i64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Key(k) => Ok(Outcome::Key(k)),
            Raw::Tag(t) if t == "NONE" => Ok(Outcome::Empty),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("bad result `{t}`"))),
        }
    }
}

/// One invocation, with its response if it completed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub thread: u32,
    pub kind: OpKind,
    pub arg: Option<i64>,
    pub result: Option<Outcome>,
    pub invoke: u64,
    pub response: Option<u64>,
}

impl Event {
    pub fn op(&self) -> DepqOp {
        match self.kind {
            OpKind::Insert => DepqOp::Insert(self.arg.unwrap_or_default()),
            OpKind::ExtractMin => DepqOp::ExtractMin,
            OpKind::ExtractMax => DepqOp::ExtractMax,
        }
    }

    pub fn is_pending(&self) -> bool {
        self.response.is_none()
    }

    /// `self` responded before `other` was invoked.
    pub fn precedes(&self, other: &Event) -> bool {
        self.response.is_some_and(|r| r < other.invoke)
    }

    fn from_op(thread: u32, op: DepqOp, invoke: u64) -> Event {
        let (kind, arg) = match op {
            DepqOp::Insert(k) => (OpKind::Insert, Some(k)),
            DepqOp::ExtractMin => (OpKind::ExtractMin, None),
            DepqOp::ExtractMax => (OpKind::ExtractMax, None),
        };
        Event {
            thread,
            kind,
            arg,
            result: None,
            invoke,
            response: None,
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{} [{}, ", self.thread, self.invoke)?;
        match self.response {
            Some(r) => write!(f, "{r}] ")?,
            None => f.write_str("..) ")?,
        }
        match (self.kind, self.arg, self.result) {
            (OpKind::Insert, Some(k), _) => write!(f, "Insert({k})"),
            (kind, _, Some(r)) => write!(f, "{kind:?} -> {r}"),
            (kind, _, None) => write!(f, "{kind:?}"),
        }
    }
}

/// A finite set of events.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct History {
    pub events: Vec<Event>,
}

impl History {
    pub fn new(events: Vec<Event>) -> Self {
        History { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn completed(&self) -> usize {
        self.events.iter().filter(|e| !e.is_pending()).count()
    }

    /// Checks timestamps and per-thread nesting; see the module docs for
    /// field rules.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::MalformedHistory(msg));
        let mut stamps = HashSet::new();
        let mut per_thread: HashMap<u32, Vec<&Event>> = HashMap::new();
        for (i, e) in self.events.iter().enumerate() {
            if (e.kind == OpKind::Insert) != e.arg.is_some() {
                return bad(format!("event {i}: arg must be set exactly for inserts"));
            }
            if e.kind == OpKind::Insert && e.result.is_some() {
                return bad(format!("event {i}: insert with a result"));
            }
            if e.kind != OpKind::Insert && e.is_pending() != e.result.is_none() {
                return bad(format!(
                    "event {i}: extract result must be set iff it completed"
                ));
            }
            if let Some(r) = e.response {
                if r <= e.invoke {
                    return bad(format!(
                        "event {i}: response {r} not after invoke {}",
                        e.invoke
                    ));
                }
                if !stamps.insert(r) {
                    return bad(format!("event {i}: duplicate timestamp {r}"));
                }
            }
            if !stamps.insert(e.invoke) {
                return bad(format!("event {i}: duplicate timestamp {}", e.invoke));
            }
            per_thread.entry(e.thread).or_default().push(e);
        }
        for (t, mut evs) in per_thread {
            evs.sort_by_key(|e| e.invoke);
            for w in evs.windows(2) {
                if !w[0].precedes(w[1]) {
                    return bad(format!(
                        "thread {t}: overlapping or pending-then-more operations"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Serializes one event per line, each terminated by `\n`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses and validates. Blank lines are skipped.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut events = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e = serde_json::from_str(line)
                .map_err(|err| Error::MalformedHistory(format!("line {}: {err}", n + 1)))?;
            events.push(e);
        }
        let h = History { events };
        h.validate()?;
        Ok(h)
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.events {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Handle for an invoked, not yet answered, operation.
#[must_use]
#[derive(Debug)]
pub struct Pending(usize);

/// Thread-safe event log around one global timestamp counter.
#[derive(Debug, Default)]
pub struct Recorder {
    clock: AtomicU64,
    events: Mutex<Vec<Event>>,
}

impl Recorder {
    pub fn new() -> Self {
        Self::default()
    }

    fn tick(&self) -> u64 {
        self.clock.fetch_add(1, Ordering::SeqCst)
    }

    /// Stamps the invocation. Call immediately before running `op`.
    pub fn invoke(&self, thread: u32, op: DepqOp) -> Pending {
        let ts = self.tick();
        let mut evs = self.events.lock().unwrap();
        evs.push(Event::from_op(thread, op, ts));
        Pending(evs.len() - 1)
    }

    /// Stamps the response. `result` is ignored for inserts.
    pub fn respond(&self, p: Pending, result: Option<i64>) {
        let ts = self.tick();
        let mut evs = self.events.lock().unwrap();
        let e = &mut evs[p.0];
        e.response = Some(ts);
        if e.kind != OpKind::Insert {
            e.result = Some(Outcome::from_option(result));
        }
    }

    /// Runs `op` on `depq`, recording it.
    pub fn call<D: Depq + ?Sized>(&self, thread: u32, depq: &D, op: DepqOp) -> Option<i64> {
        let p = self.invoke(thread, op);
        let r = match op {
            DepqOp::Insert(k) => {
                depq.insert(k);
                None
            }
            DepqOp::ExtractMin => depq.extract_min(),
            DepqOp::ExtractMax => depq.extract_max(),
        };
        self.respond(p, r);
        r
    }

    /// Everything recorded so far, pending operations included, ordered by
    /// invocation.
    pub fn history(&self) -> History {
        let mut events = self.events.lock().unwrap().clone();
        events.sort_by_key(|e| e.invoke);
        History { events }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::LockedHeapPq;
    use crate::DualDepq;

    fn ev(
        thread: u32,
        kind: OpKind,
        arg: Option<i64>,
        result: Option<Outcome>,
        inv: u64,
        resp: Option<u64>,
    ) -> Event {
        Event {
            thread,
            kind,
            arg,
            result,
            invoke: inv,
            response: resp,
        }
    }

    #[test]
    fn sequential_stamps_alternate() {
        let d: DualDepq<LockedHeapPq> = DualDepq::heap();
        let r = Recorder::new();
        r.call(0, &d, DepqOp::Insert(5));
        assert_eq!(r.call(0, &d, DepqOp::ExtractMin), Some(5));
        let h = r.history();
        let stamps: Vec<_> = h
            .events
            .iter()
            .flat_map(|e| [e.invoke, e.response.unwrap()])
            .collect();
        assert_eq!(stamps, vec![0, 1, 2, 3]);
        assert_eq!(h.events[1].result, Some(Outcome::Key(5)));
        h.validate().unwrap();
    }

    #[test]
    fn overlapping_calls_interleave() {
        let r = Recorder::new();
        let a = r.invoke(0, DepqOp::Insert(1));
        let b = r.invoke(1, DepqOp::ExtractMax);
        r.respond(a, None);
        r.respond(b, Some(1));
        let h = r.history();
        h.validate().unwrap();
        assert!(!h.events[0].precedes(&h.events[1]));
        assert!(!h.events[1].precedes(&h.events[0]));
    }

    #[test]
    fn pending_is_kept() {
        let r = Recorder::new();
        let done = r.invoke(0, DepqOp::Insert(1));
        r.respond(done, None);
        let _never = r.invoke(1, DepqOp::ExtractMin);
        let h = r.history();
        assert_eq!(h.len(), 2);
        assert_eq!(h.completed(), 1);
        assert!(h.events[1].is_pending());
        assert_eq!(h.events[1].result, None);
        h.validate().unwrap();
    }

    #[test]
    fn jsonl_exact_format() {
        let h = History::new(vec![
            ev(0, OpKind::Insert, Some(7), None, 0, Some(1)),
            ev(
                1,
                OpKind::ExtractMin,
                None,
                Some(Outcome::Empty),
                2,
                Some(3),
            ),
            ev(
                1,
                OpKind::ExtractMax,
                None,
                Some(Outcome::Key(-4)),
                4,
                Some(5),
            ),
            ev(2, OpKind::ExtractMax, None, None, 6, None),
        ]);
        let text = h.to_jsonl();
        assert_eq!(
            text,
            concat!(
                r#"{"thread":0,"kind":"Insert","arg":7,"result":null,"invoke":0,"response":1}"#,
                "\n",
                r#"{"thread":1,"kind":"ExtractMin","arg":null,"result":"NONE","invoke":2,"response":3}"#,
                "\n",
                r#"{"thread":1,"kind":"ExtractMax","arg":null,"result":-4,"invoke":4,"response":5}"#,
                "\n",
                r#"{"thread":2,"kind":"ExtractMax","arg":null,"result":null,"invoke":6,"response":null}"#,
                "\n",
            )
        );
        let back = History::from_jsonl(&text).unwrap();
        assert_eq!(back, h);
        assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn rejects_malformed() {
        let cases = [
            r#"{"thread":0,"kind":"Insert","arg":null,"result":null,"invoke":0,"response":1}"#,
            r#"{"thread":0,"kind":"ExtractMin","arg":null,"result":"SOME","invoke":0,"response":1}"#,
            r#"{"thread":0,"kind":"ExtractMin","arg":null,"result":3,"invoke":2,"response":1}"#,
            r#"{"thread":0,"kind":"Pop","arg":null,"result":3,"invoke":0,"response":1}"#,
            "not json",
        ];
        for c in cases {
            assert!(
                matches!(History::from_jsonl(c), Err(Error::MalformedHistory(_))),
                "{c}"
            );
        }
        // Same thread, overlapping.
        let h = History::new(vec![
            ev(0, OpKind::Insert, Some(1), None, 0, Some(3)),
            ev(0, OpKind::Insert, Some(2), None, 1, Some(2)),
        ]);
        assert!(h.validate().is_err());
        // Duplicate stamp.
        let h = History::new(vec![
            ev(0, OpKind::Insert, Some(1), None, 0, Some(1)),
            ev(1, OpKind::Insert, Some(2), None, 1, Some(2)),
        ]);
        assert!(h.validate().is_err());
    }
}

//! Recording concurrent histories and deciding whether they are
//! linearizable with respect to [`SeqDepq`](crate::SeqDepq).

pub mod checker;
pub mod gen;
pub mod history;

pub use checker::{check, check_naive, check_with, verify_witness, CheckConfig, Verdict};
pub use history::{Event, History, OpKind, Outcome, Recorder};

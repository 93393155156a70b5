//! Concurrent double-ended priority queues built from two single-ended ones.
//!
//! Two implementations share the [`Depq`] interface:
//!
//! * [`DualDepq`] composes any two [`PriorityQueue`]s over a shared
//!   [`ItemArena`]; [`MultiConsumerDepq`] makes it safe for many
//!   extractors per end.
//! * [`ListDepq`] links every item into two lock-free sorted lists and
//!   serves each end through a combining instance ([`CcSynch`]).
//!
//! [`lincheck`] records concurrent histories and checks them against the
//! sequential [`SeqDepq`]; [`harness`] drives workloads for the `depq`
//! binary and the examples.

pub mod ccsynch;
pub mod dual_depq;
pub mod error;
pub mod harness;
pub mod lincheck;
pub mod list_depq;
pub mod oracle;
pub mod ordered_list;
pub mod pq_api;
pub mod reclaim;
pub mod sched;

pub use ccsynch::{BatchHandler, CcSynch, CombinerCounts, DEFAULT_BATCH_CAP};
pub use dual_depq::{make_multi_consumer, DualDepq, MultiConsumerDepq, MultiConsumerMode};
pub use error::{Error, Result};
pub use list_depq::{ListDepq, ListDepqConfig, ListDepqStats};
pub use oracle::{DepqOp, LockedHeapPq, SeqDepq};
pub use ordered_list::{ListPq, SortedList};
pub use pq_api::{Depq, End, Item, ItemArena, ItemId, Key, PriorityQueue};
pub use reclaim::{ReclaimMode, Reclaimer};

//! Concurrent ordered-set and queue structures tuned for many-core machines.
//!
//! The crate provides:
//!
//! * [`skiplist::Skiplist`], a concurrent deterministic 1-2-3-4 skiplist with a
//!   lock-free `find` and lock-coupled insertion/removal that re-balances top-down.
//! * [`queue::Queue`], an unbounded MPMC queue over array blocks that recycles
//!   consumed blocks instead of freeing them.
//! * [`arena::Arena`], a block allocator that recycles freed nodes through the queue
//!   and tags them with generation counters.
//! * [`hashmaps`], multi-writer/multi-reader hash sets with fixed slots, two-level
//!   slots, or a split-ordered list (flat or hierarchical).
//! * [`shard`] and [`bench`], the partitioning layer, workload generator, CSV reporter
//!   and a small-history linearizability checker.

pub mod arena;
pub mod bench;
pub mod error;
pub mod hashmaps;
pub mod primitives;
pub mod queue;
pub mod shard;
pub mod skiplist;

mod segmented;
mod sync;

pub use sync::lock_stats;

pub use error::{Error, Result};
pub use hashmaps::ConcurrentSet;
pub use primitives::{AtomicPacked, Key, NodeHandle, OpStatus, PackedWord, RESERVED_KEY};

//! Block arena with generation-tagged node headers.
//!
//! Nodes are carved out of fixed-capacity blocks. Freed handles go through a
//! [`Queue`] and are handed out again before any fresh slot, so a workload that
//! frees as fast as it allocates stays in the first block. Each reuse bumps the
//! slot's generation, which lets readers holding a stale handle notice the recycle.

use crate::error::{Error, Result};
use crate::primitives::{NodeHandle, MAX_BLOCKS};
use crate::queue::Queue;
use crate::segmented::Segmented;
use crate::sync::{lock_stats, Backoff};
use num_rational::Ratio;
use parking_lot::Mutex;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

const GEN_MASK: u64 = 0xFFFF_FFFF;
const MARK: u64 = 1 << 32;
const LOCK: u64 = 1 << 33;
const FREED: u64 = 1 << 34;

/// Generation counter, mark bit and a test-and-set lock packed in one word.
#[derive(Default)]
pub struct NodeHeader(AtomicU64);

impl NodeHeader {
    /// Raw word; compare two snapshots to detect a recycle, mark or relock.
    #[inline]
    pub fn snapshot(&self) -> u64 {
        self.0.load(Ordering::Acquire)
    }

    /// Generation and mark bits only, so lock traffic does not disturb readers
    /// comparing stamps.
    #[inline]
    pub fn stamp(&self) -> u64 {
        self.snapshot() & !(LOCK | FREED)
    }

    #[inline]
    pub const fn stamp_is_marked(stamp: u64) -> bool {
        stamp & MARK != 0
    }

    #[inline]
    pub fn generation(&self) -> u32 {
        (self.snapshot() & GEN_MASK) as u32
    }

    #[inline]
    pub fn is_marked(&self) -> bool {
        self.snapshot() & MARK != 0
    }

    #[inline]
    pub fn mark(&self) {
        self.0.fetch_or(MARK, Ordering::AcqRel);
    }

    #[inline]
    pub fn is_locked(&self) -> bool {
        self.snapshot() & LOCK != 0
    }

    /// Spins, then yields, until the lock is taken.
    pub fn lock(&self) {
        let mut backoff = Backoff::new();
        loop {
            if self.0.load(Ordering::Relaxed) & LOCK == 0
                && self.0.fetch_or(LOCK, Ordering::Acquire) & LOCK == 0
            {
                lock_stats::acquired();
                return;
            }
            backoff.snooze();
        }
    }

    pub fn try_lock(&self) -> bool {
        if self.0.fetch_or(LOCK, Ordering::Acquire) & LOCK == 0 {
            lock_stats::acquired();
            true
        } else {
            false
        }
    }

    pub fn unlock(&self) {
        let prev = self.0.fetch_and(!LOCK, Ordering::Release);
        debug_assert!(prev & LOCK != 0, "unlock of an unlocked node");
        lock_stats::released();
    }

    /// Returns whether the slot was already freed.
    fn set_freed(&self) -> bool {
        self.0.fetch_or(FREED, Ordering::AcqRel) & FREED != 0
    }

    /// Next generation, all flags cleared.
    fn recycle(&self) {
        let cur = self.0.load(Ordering::Acquire);
        self.0.store(cur.wrapping_add(1) & GEN_MASK, Ordering::Release);
    }
}

impl std::fmt::Debug for NodeHeader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let w = self.snapshot();
        f.debug_struct("NodeHeader")
            .field("generation", &(w & GEN_MASK))
            .field("marked", &(w & MARK != 0))
            .field("locked", &(w & LOCK != 0))
            .finish()
    }
}

/// A node type an [`Arena`] can store.
pub trait ArenaNode: Default + Send + Sync {
    fn header(&self) -> &NodeHeader;
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ArenaConfig {
    pub block_capacity: usize,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        ArenaConfig { block_capacity: 10_000 }
    }
}

pub struct Arena<T> {
    capacity: u64,
    blocks: Segmented<OnceLock<Box<[T]>>>,
    cursor: AtomicU64,
    recycle: Queue,
    blocks_allocated: AtomicU64,
    grow: Mutex<()>,
}

impl<T: ArenaNode> Arena<T> {
    pub fn new(config: ArenaConfig) -> Result<Arena<T>> {
        if config.block_capacity == 0 {
            return Err(crate::error::domain("block capacity must be at least 1"));
        }
        let arena = Arena {
            capacity: config.block_capacity as u64,
            blocks: Segmented::new(16),
            cursor: AtomicU64::new(0),
            recycle: Queue::with_block_size(config.block_capacity.clamp(64, 10_000)),
            blocks_allocated: AtomicU64::new(0),
            grow: Mutex::new(()),
        };
        arena.ensure_block(0)?;
        Ok(arena)
    }

    pub fn with_capacity(block_capacity: usize) -> Result<Arena<T>> {
        Arena::new(ArenaConfig { block_capacity })
    }

    pub fn block_capacity(&self) -> usize {
        self.capacity as usize
    }

    fn ensure_block(&self, block: u64) -> Result<&[T]> {
        if block >= MAX_BLOCKS {
            return Err(Error::AllocFailure(format!("block index {block} exceeds handle range")));
        }
        let cell = self.blocks.get_or_alloc(block as usize);
        if let Some(b) = cell.get() {
            return Ok(b);
        }
        let _g = self.grow.lock();
        if let Some(b) = cell.get() {
            return Ok(b);
        }
        let mut nodes = Vec::new();
        nodes
            .try_reserve_exact(self.capacity as usize)
            .map_err(|e| Error::AllocFailure(e.to_string()))?;
        nodes.resize_with(self.capacity as usize, T::default);
        let _ = cell.set(nodes.into_boxed_slice());
        self.blocks_allocated.fetch_add(1, Ordering::Relaxed);
        Ok(cell.get().expect("block just installed"))
    }

    /// A handle no other live handle equals. Recycled slots come first; their
    /// generation is one past the previous occupant's and their flags are clear.
    /// Callers initialize the node's other fields.
    pub fn alloc(&self) -> Result<NodeHandle> {
        if let Some(raw) = self.recycle.pop() {
            let h = NodeHandle::from_raw(raw);
            self.get(h).header().recycle();
            return Ok(h);
        }
        let i = self.cursor.fetch_add(1, Ordering::Relaxed);
        let (block, slot) = (i / self.capacity, i % self.capacity);
        self.ensure_block(block)?;
        Ok(NodeHandle::new(block, slot))
    }

    /// Returns `h` to the recycle queue. Panics in debug builds on a double free.
    pub fn free(&self, h: NodeHandle) {
        let already = self.get(h).header().set_freed();
        debug_assert!(!already, "double free of {h:?}");
        if already {
            return;
        }
        self.recycle.push(h.raw()).expect("handles never equal the queue's EMPTY marker");
    }

    /// The node behind `h`. Panics if `h` did not come from this arena.
    #[inline]
    pub fn get(&self, h: NodeHandle) -> &T {
        let block = self
            .blocks
            .get(h.block() as usize)
            .and_then(OnceLock::get)
            .unwrap_or_else(|| panic!("handle {h:?} is not from this arena"));
        &block[h.slot() as usize]
    }

    pub fn blocks_in_use(&self) -> u64 {
        self.blocks_allocated.load(Ordering::Relaxed)
    }

    /// Freed handles waiting for reuse (racy).
    pub fn recycled_len(&self) -> u64 {
        self.recycle.len()
    }
}

impl<T: ArenaNode> std::ops::Index<NodeHandle> for Arena<T> {
    type Output = T;

    fn index(&self, h: NodeHandle) -> &T {
        self.get(h)
    }
}

/// Mean number of blocks in use, in exact arithmetic, over every `k ≤ N` live
/// nodes and every `i ≤ k` of them freed back into recycling:
/// `Σ_{k=1..N} Σ_{i=0..k} ⌈(k−i)/C⌉ / Σ_{i=1..N} i`.
pub fn expected_average_blocks(n: u64, c: u64) -> Result<Ratio<u128>> {
    if n == 0 || c == 0 {
        return Err(crate::error::domain("expected_average_blocks needs N ≥ 1 and C ≥ 1"));
    }
    let (n, c) = (n as u128, c as u128);
    // Inner sum over i equals Σ_{j=0..k} ⌈j/C⌉; accumulate it as k grows.
    let (mut inner, mut total) = (0u128, 0u128);
    for k in 1..=n {
        inner += k.div_ceil(c);
        total += inner;
    }
    Ok(Ratio::new(total, n * (n + 1) / 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::sync::Arc;

    #[derive(Default)]
    struct Cell {
        header: NodeHeader,
        value: AtomicU64,
    }

    impl ArenaNode for Cell {
        fn header(&self) -> &NodeHeader {
            &self.header
        }
    }

    fn double_sum(n: u64, c: u64) -> Ratio<u128> {
        let mut num = 0u128;
        for k in 1..=n {
            for i in 0..=k {
                num += ((k - i) as u128).div_ceil(c as u128);
            }
        }
        Ratio::new(num, (1..=n as u128).sum())
    }

    #[test]
    fn distinct_handles_in_first_block() {
        let a = Arena::<Cell>::with_capacity(4).unwrap();
        let (x, y) = (a.alloc().unwrap(), a.alloc().unwrap());
        assert_ne!(x, y);
        assert_eq!((x.block(), y.block()), (0, 0));
        assert_eq!(a.blocks_in_use(), 1);
    }

    #[test]
    fn reuse_bumps_generation() {
        let a = Arena::<Cell>::with_capacity(4).unwrap();
        let h = a.alloc().unwrap();
        a[h].header.mark();
        let g = a[h].header.generation();
        a.free(h);
        let h2 = a.alloc().unwrap();
        assert_eq!(h2, h);
        assert_eq!(a[h2].header.generation(), g + 1);
        assert!(!a[h2].header.is_marked());
    }

    #[test]
    fn block_count_is_ceiling() {
        let a = Arena::<Cell>::with_capacity(10_000).unwrap();
        for _ in 0..25_000 {
            a.alloc().unwrap();
        }
        assert_eq!(a.blocks_in_use(), 3);
    }

    #[test]
    fn alternating_alloc_free_stays_in_one_block() {
        let a = Arena::<Cell>::with_capacity(2).unwrap();
        for _ in 0..10_000 {
            let h = a.alloc().unwrap();
            a.free(h);
        }
        assert_eq!(a.blocks_in_use(), 1);
    }

    #[test]
    #[cfg(debug_assertions)]
    #[should_panic(expected = "double free")]
    fn double_free_detected_in_debug() {
        let a = Arena::<Cell>::with_capacity(2).unwrap();
        let h = a.alloc().unwrap();
        a.free(h);
        a.free(h);
    }

    #[test]
    fn zero_capacity_rejected() {
        assert!(matches!(Arena::<Cell>::with_capacity(0), Err(Error::Domain(_))));
    }

    #[test]
    fn stale_reader_sees_generation_change() {
        let a = Arena::<Cell>::with_capacity(2).unwrap();
        let h = a.alloc().unwrap();
        let seen = a[h].header.snapshot();
        a.free(h);
        let h2 = a.alloc().unwrap();
        assert_eq!(h, h2);
        assert_ne!(a[h].header.snapshot(), seen);
    }

    // Replay oracle: recycle-first with bump allocation beyond, blocks = ⌈bump/C⌉.
    #[test]
    fn random_trace_matches_replay() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let c = 7u64;
        let a = Arena::<Cell>::with_capacity(c as usize).unwrap();
        let mut live = Vec::new();
        let (mut bump, mut free_count) = (0u64, 0u64);
        for _ in 0..10_000 {
            if live.is_empty() || rng.gen_bool(0.55) {
                live.push(a.alloc().unwrap());
                if free_count > 0 {
                    free_count -= 1;
                } else {
                    bump += 1;
                }
            } else {
                let i = rng.gen_range(0..live.len());
                a.free(live.swap_remove(i));
                free_count += 1;
            }
            assert_eq!(a.blocks_in_use(), bump.div_ceil(c).max(1));
        }
    }

    #[test]
    fn concurrent_handles_never_live_twice() {
        let a = Arc::new(Arena::<Cell>::with_capacity(64).unwrap());
        let registry = Arc::new(Mutex::new(HashSet::new()));
        let threads: Vec<_> = (0..4)
            .map(|t| {
                let (a, registry) = (a.clone(), registry.clone());
                std::thread::spawn(move || {
                    let mut mine = Vec::new();
                    for i in 0..100_000u64 {
                        if mine.len() < 8 && (i % 3 != 0 || mine.is_empty()) {
                            let h = a.alloc().unwrap();
                            a[h].value.store(t, Ordering::Relaxed);
                            assert!(registry.lock().insert(h), "{h:?} handed out while live");
                            mine.push(h);
                        } else {
                            let h = mine.pop().unwrap();
                            assert_eq!(a[h].value.load(Ordering::Relaxed), t);
                            registry.lock().remove(&h);
                            a.free(h);
                        }
                    }
                })
            })
            .collect();
        for t in threads {
            t.join().unwrap();
        }
    }

    #[test]
    fn average_blocks_small_cases() {
        assert_eq!(expected_average_blocks(1, 1).unwrap(), Ratio::from_integer(1));
        assert_eq!(expected_average_blocks(2, 1).unwrap(), Ratio::new(4, 3));
        assert_eq!(expected_average_blocks(4, 2).unwrap(), double_sum(4, 2));
        assert!(expected_average_blocks(0, 1).is_err());
        assert!(expected_average_blocks(1, 0).is_err());
    }

    #[test]
    fn average_blocks_matches_double_sum() {
        for n in 1..=64 {
            for c in 1..=8 {
                assert_eq!(expected_average_blocks(n, c).unwrap(), double_sum(n, c), "N={n} C={c}");
            }
        }
    }
}

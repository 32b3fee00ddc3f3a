//! Split-ordered list with a lazily filled, doubling slot directory.
//!
//! Every entry sits in one list sorted by bit-reversed hash. Slot `b` of a
//! directory of size `n` points at a dummy node heading the run of entries whose
//! hash is `b` modulo `n`. Doubling `n` moves nothing: a new slot's dummy is
//! spliced into its parent's run on first use.
//!
//! Locking: the table lock is held shared by every operation and exclusively
//! only to double `n`. Within that, the run following a slot's dummy is guarded
//! by the slot's lock, and inserting a new dummy takes the parent slot's lock.

use super::{hash64, so_order_key, ConcurrentSet, HashConfig};
use crate::arena::{Arena, ArenaNode, NodeHeader};
use crate::error::{domain, Error, Result};
use crate::primitives::{Key, NodeHandle, OpStatus, RESERVED_KEY};
use crate::segmented::Segmented;
use parking_lot::RwLock;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

#[derive(Default)]
pub(crate) struct SoNode {
    header: NodeHeader,
    order: AtomicU64,
    key: AtomicU64,
    next: AtomicU64,
}

impl ArenaNode for SoNode {
    fn header(&self) -> &NodeHeader {
        &self.header
    }
}

impl SoNode {
    #[inline]
    fn order(&self) -> u64 {
        self.order.load(Ordering::Acquire)
    }

    #[inline]
    fn key(&self) -> Key {
        self.key.load(Ordering::Acquire)
    }

    #[inline]
    fn next(&self) -> NodeHandle {
        NodeHandle::from_raw(self.next.load(Ordering::Acquire))
    }

    #[inline]
    fn set_next(&self, h: NodeHandle) {
        self.next.store(h.raw(), Ordering::Release)
    }

    #[inline]
    fn is_dummy(&self) -> bool {
        self.order() & 1 == 0
    }
}

struct Slot {
    lock: RwLock<()>,
    dummy: AtomicU64,
}

impl Default for Slot {
    fn default() -> Self {
        Slot { lock: RwLock::new(()), dummy: AtomicU64::new(NodeHandle::NIL.raw()) }
    }
}

/// One node of a full list walk.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct OrderEntry {
    pub order_key: u64,
    pub key: Key,
    pub dummy: bool,
}

/// Parent of bucket `b`: `b` with its most significant set bit cleared.
#[inline]
pub(crate) const fn parent_bucket(b: u64) -> u64 {
    if b == 0 {
        0
    } else {
        b & !(1 << (63 - b.leading_zeros()))
    }
}

pub struct SplitOrderTable {
    arena: Arena<SoNode>,
    slots: Segmented<Slot>,
    size: AtomicU64,
    seed: u64,
    max_collisions: u64,
    count: AtomicUsize,
    dummies: AtomicUsize,
    resizes: AtomicU64,
    table_lock: RwLock<()>,
}

impl SplitOrderTable {
    pub fn new(seed_slots: usize, max_collisions: usize) -> Result<SplitOrderTable> {
        SplitOrderTable::build(seed_slots, max_collisions, 10_000)
    }

    pub fn with_config(c: &HashConfig) -> Result<SplitOrderTable> {
        SplitOrderTable::build(c.seed_slots, c.max_collisions, c.block_capacity)
    }

    pub(crate) fn build(seed: usize, m: usize, block_capacity: usize) -> Result<SplitOrderTable> {
        if !seed.is_power_of_two() {
            return Err(domain(format!("seed slot count {seed} is not a power of two")));
        }
        if m == 0 {
            return Err(domain("max collisions must be positive"));
        }
        let t = SplitOrderTable {
            arena: Arena::with_capacity(block_capacity)?,
            slots: Segmented::new(seed),
            size: AtomicU64::new(seed as u64),
            seed: seed as u64,
            max_collisions: m as u64,
            count: AtomicUsize::new(0),
            dummies: AtomicUsize::new(0),
            resizes: AtomicU64::new(0),
            table_lock: RwLock::new(()),
        };
        let head = t.new_node(so_order_key(0, true), 0, NodeHandle::TAIL)?;
        t.slots.get_or_alloc(0).dummy.store(head.raw(), Ordering::Release);
        for b in 1..seed as u64 {
            t.ensure_slot(b)?;
        }
        Ok(t)
    }

    fn new_node(&self, order: u64, key: Key, next: NodeHandle) -> Result<NodeHandle> {
        let h = self.arena.alloc()?;
        let n = &self.arena[h];
        n.order.store(order, Ordering::Relaxed);
        n.key.store(key, Ordering::Relaxed);
        n.set_next(next);
        if order & 1 == 0 {
            self.dummies.fetch_add(1, Ordering::Relaxed);
        }
        Ok(h)
    }

    #[inline]
    fn node(&self, h: NodeHandle) -> &SoNode {
        &self.arena[h]
    }

    fn dummy_of(&self, b: u64) -> Option<NodeHandle> {
        let h = NodeHandle::from_raw(self.slots.get(b as usize)?.dummy.load(Ordering::Acquire));
        (h != NodeHandle::NIL).then_some(h)
    }

    /// Dummy node of bucket `b`, splicing it (and its missing ancestors) into
    /// the list first if needed. Holds one slot lock at a time.
    pub fn ensure_slot(&self, b: u64) -> Result<NodeHandle> {
        if let Some(h) = self.dummy_of(b) {
            return Ok(h);
        }
        let parent = parent_bucket(b);
        let start = self.ensure_slot(parent)?;
        let slot = self.slots.get_or_alloc(b as usize);
        let _g = self.slots.get_or_alloc(parent as usize).lock.write();
        if let Some(h) = self.dummy_of(b) {
            return Ok(h);
        }
        let order = so_order_key(b, true);
        let prev = self.walk(start, order, b);
        let h = self.new_node(order, b, self.node(prev).next())?;
        self.node(prev).set_next(h);
        slot.dummy.store(h.raw(), Ordering::Release);
        Ok(h)
    }

    /// Last node in the run from `start` sorting before `(order, key)`.
    fn walk(&self, start: NodeHandle, order: u64, key: Key) -> NodeHandle {
        let mut prev = start;
        loop {
            let next = self.node(prev).next();
            if next == NodeHandle::TAIL {
                return prev;
            }
            let n = self.node(next);
            if (n.order(), n.key()) >= (order, key) {
                return prev;
            }
            prev = next;
        }
    }

    #[inline]
    fn bucket(&self, h: u64) -> u64 {
        h & (self.size.load(Ordering::Acquire) - 1)
    }

    fn grow_if_needed(&self) {
        let limit = |n: u64| (self.count.load(Ordering::Relaxed) as u64) > n.saturating_mul(self.max_collisions);
        if limit(self.size.load(Ordering::Relaxed)) {
            let _g = self.table_lock.write();
            let n = self.size.load(Ordering::Relaxed);
            if limit(n) {
                self.size.store(n * 2, Ordering::Release);
                self.resizes.fetch_add(1, Ordering::Relaxed);
            }
        }
    }

    /// Doubles the directory unconditionally.
    pub fn resize(&self) {
        let _g = self.table_lock.write();
        let n = self.size.load(Ordering::Relaxed);
        self.size.store(n * 2, Ordering::Release);
        self.resizes.fetch_add(1, Ordering::Relaxed);
    }

    pub fn directory_size(&self) -> u64 {
        self.size.load(Ordering::Acquire)
    }

    pub fn seed_slots(&self) -> u64 {
        self.seed
    }

    pub fn resizes(&self) -> u64 {
        self.resizes.load(Ordering::Relaxed)
    }

    pub fn dummy_count(&self) -> usize {
        self.dummies.load(Ordering::Relaxed)
    }

    /// Buckets below the current directory size that hold a dummy.
    pub fn initialized_buckets(&self) -> Vec<u64> {
        (0..self.directory_size()).filter(|&b| self.dummy_of(b).is_some()).collect()
    }

    pub fn len(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn blocks_in_use(&self) -> u64 {
        self.arena.blocks_in_use()
    }

    /// Full list walk from bucket 0. Exact only when quiescent.
    pub fn order_scan(&self) -> Vec<OrderEntry> {
        let _g = self.table_lock.write();
        let mut out = Vec::with_capacity(self.len() + self.dummy_count());
        let mut h = self.dummy_of(0).expect("bucket 0 always initialized");
        while h != NodeHandle::TAIL {
            let n = self.node(h);
            out.push(OrderEntry { order_key: n.order(), key: n.key(), dummy: n.is_dummy() });
            h = n.next();
        }
        out
    }

    /// User keys, in list order.
    pub fn keys(&self) -> Vec<Key> {
        self.order_scan().into_iter().filter(|e| !e.dummy).map(|e| e.key).collect()
    }
}

impl ConcurrentSet for SplitOrderTable {
    fn insert(&self, key: Key) -> Result<OpStatus> {
        if key == RESERVED_KEY {
            return Err(Error::KeyReserved(key));
        }
        let h = hash64(key);
        let order = so_order_key(h, false);
        let added = {
            let _t = self.table_lock.read();
            let b = self.bucket(h);
            let start = self.ensure_slot(b)?;
            let _s = self.slots.get_or_alloc(b as usize).lock.write();
            let prev = self.walk(start, order, key);
            let next = self.node(prev).next();
            if next != NodeHandle::TAIL && self.node(next).key() == key && self.node(next).order() == order {
                false
            } else {
                let n = self.new_node(order, key, next)?;
                self.node(prev).set_next(n);
                self.count.fetch_add(1, Ordering::Relaxed);
                true
            }
        };
        if !added {
            return Ok(OpStatus::AlreadyPresent);
        }
        self.grow_if_needed();
        Ok(OpStatus::Added)
    }

    fn find(&self, key: Key) -> OpStatus {
        if key == RESERVED_KEY {
            return OpStatus::False;
        }
        let h = hash64(key);
        let order = so_order_key(h, false);
        let _t = self.table_lock.read();
        let b = self.bucket(h);
        // Allocation failure while splicing a dummy only delays the lookup to
        // the nearest initialized ancestor.
        let mut owner = b;
        let start = match self.ensure_slot(b) {
            Ok(s) => s,
            Err(_) => loop {
                owner = parent_bucket(owner);
                if let Some(s) = self.dummy_of(owner) {
                    break s;
                }
            },
        };
        let _s = self.slots.get_or_alloc(owner as usize).lock.read();
        let next = self.node(self.walk(start, order, key)).next();
        OpStatus::from_bool(next != NodeHandle::TAIL && self.node(next).key() == key && self.node(next).order() == order)
    }

    fn remove(&self, key: Key) -> Result<OpStatus> {
        if key == RESERVED_KEY {
            return Ok(OpStatus::NotFound);
        }
        let h = hash64(key);
        let order = so_order_key(h, false);
        let _t = self.table_lock.read();
        let b = self.bucket(h);
        let start = self.ensure_slot(b)?;
        let _s = self.slots.get_or_alloc(b as usize).lock.write();
        let prev = self.walk(start, order, key);
        let victim = self.node(prev).next();
        if victim == NodeHandle::TAIL || self.node(victim).key() != key || self.node(victim).order() != order {
            return Ok(OpStatus::NotFound);
        }
        self.node(prev).set_next(self.node(victim).next());
        self.count.fetch_sub(1, Ordering::Relaxed);
        self.arena.free(victim);
        Ok(OpStatus::Removed)
    }

    fn len(&self) -> usize {
        SplitOrderTable::len(self)
    }

    fn blocks_in_use(&self) -> u64 {
        SplitOrderTable::blocks_in_use(self)
    }
}

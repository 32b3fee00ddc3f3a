use super::bst::Tree;
use super::{hash64, ConcurrentSet};
use crate::error::{domain, Error, Result};
use crate::primitives::{Key, OpStatus, RESERVED_KEY};
use parking_lot::RwLock;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

enum Level1 {
    Direct(Tree),
    Expanded(Box<[RwLock<Tree>]>),
}

struct Slot {
    state: RwLock<Level1>,
    count: AtomicUsize,
}

/// Level-1 slots holding either one tree or, once crowded, a second-level array
/// of trees indexed by the hash bits just above the level-1 bits.
pub struct TwoLevelTable {
    mask1: u64,
    shift2: u32,
    mask2: u64,
    threshold: usize,
    slots: Box<[Slot]>,
    expansions: AtomicU64,
    shrinks: AtomicU64,
}

impl TwoLevelTable {
    pub fn new(slots: usize, second_slots: usize, threshold: usize) -> Result<TwoLevelTable> {
        if !slots.is_power_of_two() || !second_slots.is_power_of_two() {
            return Err(domain(format!("slot counts {slots}/{second_slots} must be powers of two")));
        }
        Ok(TwoLevelTable {
            mask1: slots as u64 - 1,
            shift2: slots.trailing_zeros(),
            mask2: second_slots as u64 - 1,
            threshold,
            slots: (0..slots)
                .map(|_| Slot { state: RwLock::new(Level1::Direct(Tree::default())), count: AtomicUsize::new(0) })
                .collect(),
            expansions: AtomicU64::new(0),
            shrinks: AtomicU64::new(0),
        })
    }

    #[inline]
    fn level1(&self, h: u64) -> usize {
        (h & self.mask1) as usize
    }

    #[inline]
    fn level2(&self, h: u64) -> usize {
        ((h >> self.shift2) & self.mask2) as usize
    }

    /// Second-level expansions performed so far.
    pub fn expansions(&self) -> u64 {
        self.expansions.load(Ordering::Relaxed)
    }

    pub fn shrinks(&self) -> u64 {
        self.shrinks.load(Ordering::Relaxed)
    }

    pub fn is_expanded(&self, slot: usize) -> bool {
        matches!(*self.slots[slot].state.read(), Level1::Expanded(_))
    }

    /// Moves slot `slot` to a second-level array if it holds more than the
    /// threshold. Takes the slot's level-1 lock exclusively.
    pub fn expand_second_level(&self, slot: usize) {
        let mut state = self.slots[slot].state.write();
        self.expand_locked(slot, &mut state);
    }

    fn expand_locked(&self, slot: usize, state: &mut Level1) {
        let Level1::Direct(tree) = state else { return };
        if self.slots[slot].count.load(Ordering::Relaxed) <= self.threshold {
            return;
        }
        let mut second: Vec<Tree> = (0..=self.mask2).map(|_| Tree::default()).collect();
        for (h, k) in tree.take().entries() {
            second[self.level2(h)].insert(h, k);
        }
        *state = Level1::Expanded(second.into_iter().map(RwLock::new).collect());
        self.expansions.fetch_add(1, Ordering::Relaxed);
    }

    fn shrink(&self, slot: usize) {
        let mut state = self.slots[slot].state.write();
        if self.slots[slot].count.load(Ordering::Relaxed) >= self.threshold {
            return;
        }
        let Level1::Expanded(second) = &mut *state else { return };
        let mut tree = Tree::default();
        for t in second.iter_mut() {
            for (h, k) in t.get_mut().entries() {
                tree.insert(h, k);
            }
        }
        *state = Level1::Direct(tree);
        self.shrinks.fetch_add(1, Ordering::Relaxed);
    }

    /// Level-1 slot a key hashes to.
    pub fn slot_of_key(&self, key: Key) -> usize {
        self.level1(hash64(key))
    }

    /// Keys stored under level-1 slot `slot`, unordered.
    pub fn slot_keys(&self, slot: usize) -> Vec<Key> {
        match &*self.slots[slot].state.read() {
            Level1::Direct(t) => t.entries().into_iter().map(|(_, k)| k).collect(),
            Level1::Expanded(second) => {
                second.iter().flat_map(|t| t.read().entries().into_iter().map(|(_, k)| k)).collect()
            }
        }
    }

    /// All keys, unordered. Requires quiescence for an exact snapshot.
    pub fn keys(&self) -> Vec<Key> {
        (0..self.slots.len()).flat_map(|i| self.slot_keys(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.slots.iter().map(|s| s.count.load(Ordering::Relaxed)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ConcurrentSet for TwoLevelTable {
    fn insert(&self, key: Key) -> Result<OpStatus> {
        if key == RESERVED_KEY {
            return Err(Error::KeyReserved(key));
        }
        let h = hash64(key);
        let i = self.level1(h);
        let slot = &self.slots[i];
        {
            let state = slot.state.read();
            if let Level1::Expanded(second) = &*state {
                let added = second[self.level2(h)].write().insert(h, key);
                if added {
                    slot.count.fetch_add(1, Ordering::Relaxed);
                }
                return Ok(if added { OpStatus::Added } else { OpStatus::AlreadyPresent });
            }
        }
        let mut state = slot.state.write();
        let added = match &mut *state {
            Level1::Direct(tree) => tree.insert(h, key),
            Level1::Expanded(second) => second[self.level2(h)].get_mut().insert(h, key),
        };
        if !added {
            return Ok(OpStatus::AlreadyPresent);
        }
        if slot.count.fetch_add(1, Ordering::Relaxed) + 1 > self.threshold {
            self.expand_locked(i, &mut state);
        }
        Ok(OpStatus::Added)
    }

    fn find(&self, key: Key) -> OpStatus {
        if key == RESERVED_KEY {
            return OpStatus::False;
        }
        let h = hash64(key);
        let found = match &*self.slots[self.level1(h)].state.read() {
            Level1::Direct(tree) => tree.contains(h),
            Level1::Expanded(second) => second[self.level2(h)].read().contains(h),
        };
        OpStatus::from_bool(found)
    }

    fn remove(&self, key: Key) -> Result<OpStatus> {
        let h = hash64(key);
        let i = self.level1(h);
        let slot = &self.slots[i];
        let (removed, expanded) = {
            let state = slot.state.upgradable_read();
            match &*state {
                Level1::Expanded(second) => (second[self.level2(h)].write().remove(h), true),
                Level1::Direct(_) => {
                    let mut state = parking_lot::RwLockUpgradableReadGuard::upgrade(state);
                    let Level1::Direct(tree) = &mut *state else { unreachable!() };
                    (tree.remove(h), false)
                }
            }
        };
        if !removed {
            return Ok(OpStatus::NotFound);
        }
        let left = slot.count.fetch_sub(1, Ordering::Relaxed) - 1;
        if expanded && left < self.threshold {
            self.shrink(i);
        }
        Ok(OpStatus::Removed)
    }

    fn len(&self) -> usize {
        TwoLevelTable::len(self)
    }
}

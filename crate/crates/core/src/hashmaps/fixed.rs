use super::bst::Tree;
use super::{hash64, ConcurrentSet};
use crate::error::{domain, Error, Result};
use crate::primitives::{Key, OpStatus, RESERVED_KEY};
use parking_lot::RwLock;

/// A fixed number of slots, each a binary tree behind a read-write lock.
pub struct FixedTable {
    mask: u64,
    slots: Box<[RwLock<Tree>]>,
}

impl FixedTable {
    pub fn new(slots: usize) -> Result<FixedTable> {
        if !slots.is_power_of_two() {
            return Err(domain(format!("slot count {slots} is not a power of two")));
        }
        Ok(FixedTable { mask: slots as u64 - 1, slots: (0..slots).map(|_| RwLock::default()).collect() })
    }

    #[inline]
    fn slot(&self, h: u64) -> &RwLock<Tree> {
        &self.slots[(h & self.mask) as usize]
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Keys stored in slot `i`.
    pub fn slot_keys(&self, i: usize) -> Vec<Key> {
        self.slots[i].read().entries().into_iter().map(|(_, k)| k).collect()
    }

    pub fn len(&self) -> usize {
        self.slots.iter().map(|s| s.read().len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ConcurrentSet for FixedTable {
    fn insert(&self, key: Key) -> Result<OpStatus> {
        if key == RESERVED_KEY {
            return Err(Error::KeyReserved(key));
        }
        let h = hash64(key);
        Ok(if self.slot(h).write().insert(h, key) { OpStatus::Added } else { OpStatus::AlreadyPresent })
    }

    fn find(&self, key: Key) -> OpStatus {
        let h = hash64(key);
        OpStatus::from_bool(key != RESERVED_KEY && self.slot(h).read().contains(h))
    }

    fn remove(&self, key: Key) -> Result<OpStatus> {
        let h = hash64(key);
        Ok(if self.slot(h).write().remove(h) { OpStatus::Removed } else { OpStatus::NotFound })
    }

    fn len(&self) -> usize {
        FixedTable::len(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_ops() {
        let t = FixedTable::new(8).unwrap();
        assert_eq!(t.find(3), OpStatus::False);
        assert_eq!(t.insert(3).unwrap(), OpStatus::Added);
        assert_eq!(t.insert(3).unwrap(), OpStatus::AlreadyPresent);
        assert_eq!(t.len(), 1);
        assert_eq!(t.find(3), OpStatus::True);
        assert_eq!(t.remove(3).unwrap(), OpStatus::Removed);
        assert_eq!(t.remove(3).unwrap(), OpStatus::NotFound);
        assert!(matches!(t.insert(RESERVED_KEY), Err(Error::KeyReserved(_))));
    }

    #[test]
    fn every_key_lives_in_its_slot() {
        let t = FixedTable::new(64).unwrap();
        for k in 0..5_000 {
            t.insert(k * 31).unwrap();
        }
        let mut total = 0;
        for i in 0..t.slot_count() {
            for k in t.slot_keys(i) {
                assert_eq!((hash64(k) & 63) as usize, i);
                total += 1;
            }
        }
        assert_eq!(total, 5_000);
    }
}

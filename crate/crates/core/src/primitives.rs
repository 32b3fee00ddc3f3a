//! Keys, arena handles, the packed 128-bit key+next word and operation status codes.

use portable_atomic::{AtomicU128, Ordering};
use std::fmt;

/// User keys are plain 64-bit unsigned integers.
pub type Key = u64;

/// Reserved for the head node and sentinels; never a valid user key.
pub const RESERVED_KEY: Key = u64::MAX;

pub(crate) const BLOCK_BITS: u32 = 24;
pub(crate) const SLOT_BITS: u32 = 40;
const SLOT_MASK: u64 = (1 << SLOT_BITS) - 1;
/// Block index reserved for sentinel handles.
pub(crate) const SENTINEL_BLOCK: u64 = (1 << BLOCK_BITS) - 1;
/// Largest block index an arena may hand out.
pub const MAX_BLOCKS: u64 = SENTINEL_BLOCK;
const _: () = assert!(MAX_BLOCKS >= 10_000_000 && SLOT_MASK >= 10_000);

/// Reference to a node slot inside an arena: high 24 bits block index, low 40 bits
/// slot offset.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeHandle(u64);

impl NodeHandle {
    /// Terminates every linked list.
    pub const TAIL: NodeHandle = NodeHandle(SENTINEL_BLOCK << SLOT_BITS);
    /// Bottom reference of terminal nodes.
    pub const TERMINAL: NodeHandle = NodeHandle((SENTINEL_BLOCK << SLOT_BITS) | 1);
    /// Absent reference, used by structures that need one (uninitialized slots).
    pub const NIL: NodeHandle = NodeHandle((SENTINEL_BLOCK << SLOT_BITS) | 2);

    #[inline]
    pub fn new(block: u64, slot: u64) -> NodeHandle {
        debug_assert!(block < SENTINEL_BLOCK, "block index {block} out of range");
        debug_assert!(slot <= SLOT_MASK, "slot offset {slot} out of range");
        NodeHandle((block << SLOT_BITS) | slot)
    }

    #[inline]
    pub const fn from_raw(raw: u64) -> NodeHandle {
        NodeHandle(raw)
    }

    #[inline]
    pub const fn raw(self) -> u64 {
        self.0
    }

    #[inline]
    pub const fn block(self) -> u64 {
        self.0 >> SLOT_BITS
    }

    #[inline]
    pub const fn slot(self) -> u64 {
        self.0 & SLOT_MASK
    }

    #[inline]
    pub const fn is_sentinel(self) -> bool {
        self.block() == SENTINEL_BLOCK
    }
}

impl fmt::Debug for NodeHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NodeHandle::TAIL => f.write_str("TAIL"),
            NodeHandle::TERMINAL => f.write_str("TERMINAL"),
            NodeHandle::NIL => f.write_str("NIL"),
            h => write!(f, "#{}:{}", h.block(), h.slot()),
        }
    }
}

/// A key in the upper 64 bits and a next handle in the lower 64 bits.
#[derive(Copy, Clone, PartialEq, Eq, Hash)]
pub struct PackedWord(u128);

impl PackedWord {
    #[inline]
    pub const fn pack(key: Key, next: NodeHandle) -> PackedWord {
        PackedWord(((key as u128) << 64) | next.0 as u128)
    }

    #[inline]
    pub const fn from_bits(bits: u128) -> PackedWord {
        PackedWord(bits)
    }

    #[inline]
    pub const fn bits(self) -> u128 {
        self.0
    }

    #[inline]
    pub const fn key(self) -> Key {
        (self.0 >> 64) as u64
    }

    #[inline]
    pub const fn next(self) -> NodeHandle {
        NodeHandle(self.0 as u64)
    }

    #[inline]
    pub const fn unpack(self) -> (Key, NodeHandle) {
        (self.key(), self.next())
    }
}

impl fmt::Debug for PackedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:#x}, {:?})", self.key(), self.next())
    }
}

/// Storage cell for a [`PackedWord`]. Loads and stores move the whole 128 bits at
/// once; without a native 16-byte compare-exchange the cell degrades to a
/// sequence-lock, which still never yields a torn key/next pair.
#[derive(Default)]
pub struct AtomicPacked(AtomicU128);

impl AtomicPacked {
    pub fn new(word: PackedWord) -> AtomicPacked {
        AtomicPacked(AtomicU128::new(word.0))
    }

    #[inline]
    pub fn load(&self) -> PackedWord {
        PackedWord(self.0.load(Ordering::Acquire))
    }

    #[inline]
    pub fn store(&self, word: PackedWord) {
        self.0.store(word.0, Ordering::Release)
    }

    #[inline]
    pub fn compare_exchange(&self, current: PackedWord, new: PackedWord) -> Result<PackedWord, PackedWord> {
        self.0
            .compare_exchange(current.0, new.0, Ordering::AcqRel, Ordering::Acquire)
            .map(PackedWord)
            .map_err(PackedWord)
    }

    /// Whether the 128-bit operations are native rather than lock-backed.
    pub fn is_lock_free() -> bool {
        AtomicU128::is_lock_free()
    }
}

impl fmt::Debug for AtomicPacked {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.load().fmt(f)
    }
}

/// Terminal outcome of a structure operation. `Retry` is internal only.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum OpStatus {
    True,
    False,
    Retry,
    Added,
    AlreadyPresent,
    Removed,
    NotFound,
    Empty,
}

impl OpStatus {
    pub fn from_bool(found: bool) -> OpStatus {
        if found {
            OpStatus::True
        } else {
            OpStatus::False
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicBool, Ordering as StdOrdering};
    use std::sync::Arc;

    #[test]
    fn pack_places_halves() {
        let w = PackedWord::pack(5, NodeHandle::from_raw(12));
        assert_eq!(w.bits() >> 64, 5);
        assert_eq!(w.bits() & u64::MAX as u128, 12);
        assert_eq!(PackedWord::from_bits(0).unpack(), (0, NodeHandle::from_raw(0)));
        assert_eq!(PackedWord::pack(7, NodeHandle::from_raw(3)).unpack(), (7, NodeHandle::from_raw(3)));
    }

    #[test]
    fn head_word() {
        let w = PackedWord::pack(RESERVED_KEY, NodeHandle::TAIL);
        assert_eq!(w.key(), u64::MAX);
        assert_eq!(w.next(), NodeHandle::TAIL);
    }

    #[test]
    fn pack_unpack_exhaustive_16_bit_scaled() {
        // 8-bit key x 8-bit handle covers every 16-bit combination.
        for k in 0..=255u64 {
            for n in 0..=255u64 {
                let key = k << 56 | k;
                let next = NodeHandle::from_raw(n << 56 | n);
                assert_eq!(PackedWord::pack(key, next).unpack(), (key, next));
            }
        }
    }

    proptest! {
        #[test]
        fn pack_unpack_roundtrip(key: u64, next: u64) {
            let h = NodeHandle::from_raw(next);
            prop_assert_eq!(PackedWord::pack(key, h).unpack(), (key, h));
        }
    }

    #[test]
    fn handle_encoding() {
        let h = NodeHandle::new(3, 9_999);
        assert_eq!((h.block(), h.slot()), (3, 9_999));
        assert!(!h.is_sentinel());
        assert!(NodeHandle::TAIL.is_sentinel());
        assert!(NodeHandle::TERMINAL.is_sentinel());
        assert_ne!(NodeHandle::TAIL, NodeHandle::TERMINAL);
    }

    #[test]
    fn no_torn_reads_under_racing_writer() {
        let a = PackedWord::pack(0x1111_1111_1111_1111, NodeHandle::from_raw(0x2222_2222_2222_2222));
        let b = PackedWord::pack(0xAAAA_AAAA_AAAA_AAAA, NodeHandle::from_raw(0xBBBB_BBBB_BBBB_BBBB));
        let cell = Arc::new(AtomicPacked::new(a));
        let stop = Arc::new(AtomicBool::new(false));
        let writer = {
            let (cell, stop) = (cell.clone(), stop.clone());
            std::thread::spawn(move || {
                let mut flip = false;
                while !stop.load(StdOrdering::Relaxed) {
                    cell.store(if flip { a } else { b });
                    flip = !flip;
                }
            })
        };
        let readers: Vec<_> = (0..3)
            .map(|_| {
                let cell = cell.clone();
                std::thread::spawn(move || {
                    for _ in 0..200_000 {
                        let w = cell.load();
                        assert!(w == a || w == b, "torn read {w:?}");
                    }
                })
            })
            .collect();
        for r in readers {
            r.join().unwrap();
        }
        stop.store(true, StdOrdering::Relaxed);
        writer.join().unwrap();
    }
}

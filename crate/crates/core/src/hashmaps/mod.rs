//! Multi-writer/multi-reader hash sets.
//!
//! * [`FixedTable`]: a fixed array of slots, each a read-write-locked binary tree.
//! * [`TwoLevelTable`]: level-1 slots that switch to a second-level array of
//!   trees once they hold more than a threshold of entries.
//! * [`SplitOrderTable`]: one list sorted by bit-reversed hash, with a dummy node
//!   per initialized slot; the slot directory doubles without moving entries.
//! * [`HierarchicalSplitOrder`]: a fixed first level of independent split-order
//!   tables.

mod bst;
mod fixed;
mod hierarchical;
mod split_order;
mod two_level;

pub use fixed::FixedTable;
pub use hierarchical::HierarchicalSplitOrder;
pub use split_order::{OrderEntry, SplitOrderTable};
pub use two_level::TwoLevelTable;

use crate::error::{domain, Result};
use crate::primitives::{Key, OpStatus};
use std::str::FromStr;

/// Operations shared by every set in the crate.
pub trait ConcurrentSet: Send + Sync {
    fn insert(&self, key: Key) -> Result<OpStatus>;
    fn find(&self, key: Key) -> OpStatus;
    fn remove(&self, key: Key) -> Result<OpStatus>;
    /// Stored keys. Exact only when quiescent.
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Arena blocks backing the structure, where it has an arena.
    fn blocks_in_use(&self) -> u64 {
        0
    }
}

impl<T: ConcurrentSet + ?Sized> ConcurrentSet for Box<T> {
    fn insert(&self, key: Key) -> Result<OpStatus> {
        (**self).insert(key)
    }

    fn find(&self, key: Key) -> OpStatus {
        (**self).find(key)
    }

    fn remove(&self, key: Key) -> Result<OpStatus> {
        (**self).remove(key)
    }

    fn len(&self) -> usize {
        (**self).len()
    }

    fn blocks_in_use(&self) -> u64 {
        (**self).blocks_in_use()
    }
}

impl ConcurrentSet for crate::skiplist::Skiplist {
    fn insert(&self, key: Key) -> Result<OpStatus> {
        crate::skiplist::Skiplist::insert(self, key)
    }

    fn find(&self, key: Key) -> OpStatus {
        crate::skiplist::Skiplist::find(self, key)
    }

    fn remove(&self, key: Key) -> Result<OpStatus> {
        crate::skiplist::Skiplist::remove(self, key)
    }

    fn len(&self) -> usize {
        crate::skiplist::Skiplist::len(self)
    }

    fn blocks_in_use(&self) -> u64 {
        crate::skiplist::Skiplist::blocks_in_use(self)
    }
}

/// Splitmix64 finalizer: a bijection on `u64` with full avalanche.
#[inline]
pub const fn hash64(key: Key) -> u64 {
    let mut h = key;
    h ^= h >> 30;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^= h >> 31;
    h
}

/// `h mod m` for a power-of-two `m`.
pub fn slot_of(h: u64, m: u64) -> Result<u64> {
    if !m.is_power_of_two() {
        return Err(domain(format!("slot count {m} is not a power of two")));
    }
    Ok(h & (m - 1))
}

/// Split-order sort key: dummies keep the reversed bucket (even), items the
/// reversed hash with the low bit set (odd).
#[inline]
pub const fn so_order_key(x: u64, dummy: bool) -> u64 {
    if dummy {
        x.reverse_bits()
    } else {
        x.reverse_bits() | 1
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Fixed,
    TwoLevel,
    Spo,
    TwoLevelSpo,
}

impl FromStr for Variant {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Variant> {
        Ok(match s {
            "fixed" => Variant::Fixed,
            "twolevel" => Variant::TwoLevel,
            "spo" => Variant::Spo,
            "twolevel-spo" => Variant::TwoLevelSpo,
            _ => return Err(domain(format!("unknown hash table variant {s:?}"))),
        })
    }
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Fixed, Variant::TwoLevel, Variant::Spo, Variant::TwoLevelSpo];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Fixed => "fixed",
            Variant::TwoLevel => "twolevel",
            Variant::Spo => "spo",
            Variant::TwoLevelSpo => "twolevel-spo",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct HashConfig {
    pub variant: Variant,
    /// Slots of a fixed table, or level-1 slots of a two-level table.
    pub slots: usize,
    /// Second-level slots of an expanded two-level slot.
    pub second_slots: usize,
    /// Entries in a level-1 slot above which it gets a second level.
    pub expand_threshold: usize,
    /// Initial split-order directory size.
    pub seed_slots: usize,
    /// Split-order occupancy divisor: the directory doubles past `n * m` entries.
    pub max_collisions: usize,
    /// Split-order tables in the first level of the hierarchical variant.
    pub first_level_tables: usize,
    /// Seed slots of each hierarchical sub-table.
    pub sub_seed_slots: usize,
    /// Arena block capacity for split-order nodes.
    pub block_capacity: usize,
    /// High hash bits already consumed by shard routing; the hierarchical
    /// variant selects its sub-table from the bits below them.
    pub shard_bits: u32,
}

impl Default for HashConfig {
    fn default() -> Self {
        HashConfig {
            variant: Variant::Fixed,
            slots: 8192,
            second_slots: 2048,
            expand_threshold: 10,
            seed_slots: 8192,
            max_collisions: 16,
            first_level_tables: 256,
            sub_seed_slots: 64,
            block_capacity: 10_000,
            shard_bits: 0,
        }
    }
}

impl HashConfig {
    pub fn with_variant(variant: Variant) -> HashConfig {
        HashConfig { variant, ..HashConfig::default() }
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [
            ("slots", self.slots),
            ("second_slots", self.second_slots),
            ("seed_slots", self.seed_slots),
            ("first_level_tables", self.first_level_tables),
            ("sub_seed_slots", self.sub_seed_slots),
        ] {
            if !v.is_power_of_two() {
                return Err(domain(format!("{name} = {v} is not a power of two")));
            }
        }
        if self.max_collisions == 0 || self.block_capacity == 0 {
            return Err(domain("max_collisions and block_capacity must be positive"));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn ConcurrentSet>> {
        self.check()?;
        Ok(match self.variant {
            Variant::Fixed => Box::new(FixedTable::new(self.slots)?),
            Variant::TwoLevel => {
                Box::new(TwoLevelTable::new(self.slots, self.second_slots, self.expand_threshold)?)
            }
            Variant::Spo => Box::new(SplitOrderTable::with_config(self)?),
            Variant::TwoLevelSpo => Box::new(HierarchicalSplitOrder::new(self)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::collections::{BTreeSet, HashSet};

    #[test]
    fn hash_fixed_points() {
        assert_eq!(hash64(0), 0);
        assert_ne!(hash64(1), 1);
    }

    #[test]
    fn hash_injective_on_16_bit_range() {
        let seen: HashSet<u64> = (0..1u64 << 16).map(hash64).collect();
        assert_eq!(seen.len(), 1 << 16);
    }

    #[test]
    fn hash_avalanche() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for bit in 0..64 {
            let mut flips = 0u64;
            for _ in 0..10_000 {
                let x: u64 = rng.gen();
                flips += u64::from((hash64(x) ^ hash64(x ^ (1 << bit))).count_ones());
            }
            let mean = flips as f64 / 10_000.0;
            assert!((26.0..=38.0).contains(&mean), "bit {bit}: {mean}");
        }
    }

    #[test]
    fn slot_of_masks() {
        assert_eq!(slot_of(13, 8).unwrap(), 5);
        assert_eq!(slot_of(12345, 1).unwrap(), 0);
        assert!(slot_of(13, 6).is_err());
    }

    #[test]
    fn slot_load_is_near_uniform() {
        let m = 8192u64;
        let mut load = vec![0u32; m as usize];
        for k in 0..1_000_000u64 {
            load[slot_of(hash64(k), m).unwrap() as usize] += 1;
        }
        let mean = 1_000_000.0 / m as f64;
        assert!(f64::from(*load.iter().max().unwrap()) <= 2.0 * mean);
    }

    #[test]
    fn order_keys() {
        assert_eq!(so_order_key(0, true), 0);
        assert_eq!(so_order_key(1, true), 1 << 63);
        assert_eq!(so_order_key(0, false) & 1, 1);
    }

    // Scaled to 16 bits: a key in bucket b of a 2^j directory sorts after dummy(b)
    // and before the dummy of the next bucket in split order.
    #[test]
    fn order_keys_respect_buckets_exhaustively() {
        for j in 0..=6u32 {
            let n = 1u64 << j;
            let mut dummies: Vec<(u64, u64)> = (0..n).map(|b| (so_order_key(b, true), b)).collect();
            dummies.sort();
            for k in 0..(1u64 << 16) {
                let b = k & (n - 1);
                let item = so_order_key(k, false);
                let pos = dummies.iter().position(|&(_, d)| d == b).unwrap();
                assert!(dummies[pos].0 < item);
                if let Some(&(next, _)) = dummies.get(pos + 1) {
                    assert!(item < next, "k={k} n={n}");
                }
            }
        }
        // Refinement: each dummy sorts right after its parent's subtree start.
        let sorted: BTreeSet<u64> = (0..64u64).map(|b| so_order_key(b, true)).collect();
        assert_eq!(sorted.len(), 64);
    }

    #[test]
    fn config_rejects_non_powers_of_two() {
        let c = HashConfig { slots: 1000, ..HashConfig::default() };
        assert!(c.build().is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
    }
}

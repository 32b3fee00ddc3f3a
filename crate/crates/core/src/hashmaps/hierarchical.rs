use super::split_order::SplitOrderTable;
use super::{hash64, ConcurrentSet, HashConfig};
use crate::error::{domain, Result};
use crate::primitives::{Key, OpStatus};

/// A fixed first level of independent split-order tables, each with its own
/// arena, selected by the hash bits just below the bits used for sharding.
pub struct HierarchicalSplitOrder {
    tables: Box<[SplitOrderTable]>,
    skip: u32,
    select_bits: u32,
}

impl HierarchicalSplitOrder {
    pub fn new(c: &HashConfig) -> Result<HierarchicalSplitOrder> {
        if !c.first_level_tables.is_power_of_two() {
            return Err(domain(format!("{} first-level tables is not a power of two", c.first_level_tables)));
        }
        let select_bits = c.first_level_tables.trailing_zeros();
        if c.shard_bits + select_bits > 64 {
            return Err(domain("shard and table selector bits exceed the hash width"));
        }
        let block = c.block_capacity.min(256);
        let tables = (0..c.first_level_tables)
            .map(|_| SplitOrderTable::build(c.sub_seed_slots, c.max_collisions, block))
            .collect::<Result<Vec<_>>>()?;
        Ok(HierarchicalSplitOrder { tables: tables.into_boxed_slice(), skip: c.shard_bits, select_bits })
    }

    #[inline]
    fn table_index(&self, h: u64) -> usize {
        if self.select_bits == 0 {
            return 0;
        }
        ((h << self.skip) >> (64 - self.select_bits)) as usize
    }

    fn table(&self, key: Key) -> &SplitOrderTable {
        &self.tables[self.table_index(hash64(key))]
    }

    pub fn tables(&self) -> &[SplitOrderTable] {
        &self.tables
    }

    pub fn len(&self) -> usize {
        self.tables.iter().map(SplitOrderTable::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ConcurrentSet for HierarchicalSplitOrder {
    fn insert(&self, key: Key) -> Result<OpStatus> {
        self.table(key).insert(key)
    }

    fn find(&self, key: Key) -> OpStatus {
        self.table(key).find(key)
    }

    fn remove(&self, key: Key) -> Result<OpStatus> {
        self.table(key).remove(key)
    }

    fn len(&self) -> usize {
        HierarchicalSplitOrder::len(self)
    }

    fn blocks_in_use(&self) -> u64 {
        self.tables.iter().map(SplitOrderTable::blocks_in_use).sum()
    }
}

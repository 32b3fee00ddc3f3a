//! Per-level re-balancing counters and the closed-form bound they are checked against.

use crate::error::{domain, Result};
use std::sync::atomic::{AtomicU64, Ordering};

pub(crate) const MAX_LEVELS: usize = 64;

/// Monotone counters of splits, merges and borrows, indexed by the level of the
/// node being re-balanced (level 1 holds the terminal list's parents).
pub struct RebalanceLedger {
    splits: [AtomicU64; MAX_LEVELS],
    merges: [AtomicU64; MAX_LEVELS],
    borrows: [AtomicU64; MAX_LEVELS],
    /// Minimum arity of a non-root node.
    pub a: u64,
    /// Maximum arity of a node.
    pub b: u64,
}

impl Default for RebalanceLedger {
    fn default() -> Self {
        RebalanceLedger {
            splits: std::array::from_fn(|_| AtomicU64::new(0)),
            merges: std::array::from_fn(|_| AtomicU64::new(0)),
            borrows: std::array::from_fn(|_| AtomicU64::new(0)),
            a: 2,
            b: 5,
        }
    }
}

impl RebalanceLedger {
    pub fn new(a: u64, b: u64) -> RebalanceLedger {
        RebalanceLedger { a, b, ..RebalanceLedger::default() }
    }

    pub(crate) fn split(&self, level: usize) {
        self.splits[level.min(MAX_LEVELS - 1)].fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn merge(&self, level: usize) {
        self.merges[level.min(MAX_LEVELS - 1)].fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn borrow(&self, level: usize) {
        self.borrows[level.min(MAX_LEVELS - 1)].fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        let load = |v: &[AtomicU64; MAX_LEVELS]| {
            let mut out: Vec<u64> = v.iter().map(|c| c.load(Ordering::Relaxed)).collect();
            while out.len() > 1 && out.last() == Some(&0) {
                out.pop();
            }
            out
        };
        let mut s = LedgerSnapshot {
            splits: load(&self.splits),
            merges: load(&self.merges),
            borrows: load(&self.borrows),
        };
        let len = s.splits.len().max(s.merges.len()).max(s.borrows.len());
        for v in [&mut s.splits, &mut s.merges, &mut s.borrows] {
            v.resize(len, 0);
        }
        s
    }
}

impl std::fmt::Debug for RebalanceLedger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RebalanceLedger")
            .field("a", &self.a)
            .field("b", &self.b)
            .field("counts", &self.snapshot())
            .finish()
    }
}

/// Counters copied out of a [`RebalanceLedger`]; index `h` is level `h`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LedgerSnapshot {
    pub splits: Vec<u64>,
    pub merges: Vec<u64>,
    pub borrows: Vec<u64>,
}

impl LedgerSnapshot {
    pub fn levels(&self) -> usize {
        self.splits.len()
    }

    /// Re-balancing operations at level `h`.
    pub fn at(&self, h: usize) -> u64 {
        let get = |v: &Vec<u64>| v.get(h).copied().unwrap_or(0);
        get(&self.splits) + get(&self.merges) + get(&self.borrows)
    }

    pub fn total_splits(&self) -> u64 {
        self.splits.iter().sum()
    }

    pub fn total_merges(&self) -> u64 {
        self.merges.iter().sum()
    }

    pub fn total_borrows(&self) -> u64 {
        self.borrows.iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.total_splits() + self.total_merges() + self.total_borrows()
    }
}

/// Slack constant of an `(a, b)` tree:
/// `min(min(2a−1, ⌈(b+1)/2⌉) − a, b − max(2a−1, ⌊(b+1)/2⌋))`.
#[allow(clippy::manual_div_ceil)]
pub fn slack(a: u64, b: u64) -> Result<u64> {
    if a < 2 {
        return Err(domain(format!("a must be at least 2, got {a}")));
    }
    if b <= 2 * a + 1 {
        return Err(domain(format!("bound needs b > 2a+1, got a={a} b={b}")));
    }
    let lo = (2 * a - 1).min((b + 1).div_ceil(2)) - a;
    let hi = b - (2 * a - 1).max((b + 1) / 2);
    Ok(lo.min(hi))
}

/// Upper bound `⌈2(c+2)n / (c+1)^h⌉` on the re-balancing operations at height `h`
/// after `n` additions and deletions in an `(a, b)` tree.
pub fn rebalance_bound(a: u64, b: u64, n: u64, h: u32) -> Result<u64> {
    if h == 0 {
        return Err(domain("height must be at least 1"));
    }
    let c = slack(a, b)? as u128;
    let num = 2 * (c + 2) * n as u128;
    Ok(match (c + 1).checked_pow(h) {
        Some(den) => num.div_ceil(den) as u64,
        // Denominator beyond u128: the quotient is below one.
        None => u64::from(n > 0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_for_two_six() {
        assert_eq!(slack(2, 6).unwrap(), 1);
        assert_eq!(rebalance_bound(2, 6, 100, 1).unwrap(), 300);
    }

    #[test]
    fn bound_rejects_tight_trees() {
        assert!(rebalance_bound(2, 5, 10, 1).is_err());
        assert!(rebalance_bound(2, 4, 10, 1).is_err());
        assert!(rebalance_bound(1, 9, 10, 1).is_err());
        assert!(rebalance_bound(2, 6, 10, 0).is_err());
    }

    #[test]
    fn bound_decreases_with_height() {
        for (a, b) in [(2, 6), (2, 9), (3, 8), (4, 20)] {
            let mut prev = u64::MAX;
            for h in 1..=40 {
                let v = rebalance_bound(a, b, 1_000_000, h).unwrap();
                assert!(v <= prev, "a={a} b={b} h={h}");
                prev = v;
            }
        }
    }

    #[test]
    fn huge_heights_do_not_overflow() {
        assert_eq!(rebalance_bound(2, 6, 5, 500).unwrap(), 1);
        assert_eq!(rebalance_bound(2, 6, 0, 500).unwrap(), 0);
    }

    #[test]
    fn snapshot_totals() {
        let l = RebalanceLedger::default();
        l.split(1);
        l.split(1);
        l.merge(2);
        l.borrow(3);
        let s = l.snapshot();
        assert_eq!(s.levels(), 4);
        assert_eq!((s.at(1), s.at(2), s.at(3), s.total()), (2, 1, 1, 4));
    }
}

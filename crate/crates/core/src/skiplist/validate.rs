//! Quiescent structural audit of a [`Skiplist`].

use super::{Skiplist, TAIL, TERMINAL};
use crate::primitives::{Key, NodeHandle, RESERVED_KEY};
use std::collections::{HashMap, HashSet};
use std::fmt;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    /// A non-head node outside `2..=max` children, or a head outside `1..=max`.
    Arity,
    /// Keys not increasing along a level, or a level not ending in the maximum key.
    Order,
    /// A key at some level missing from the level below.
    Subset,
    /// A sentinel that does not refer to itself, or a malformed bottom reference.
    Sentinel,
    /// A child key above its parent's key.
    KeyBound,
    /// The same key twice in the terminal list.
    Duplicate,
    /// A marked (removed) node still reachable.
    Marked,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Level of the offending node; 0 is the terminal list.
    pub level: usize,
    pub key: Key,
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    /// Levels above the terminal list, head included.
    pub depth: usize,
    /// User keys in the terminal list.
    pub keys: usize,
    /// `arity[k]` counts non-terminal, non-head nodes with `k` children.
    pub arity: Vec<u64>,
}

impl ValidationReport {
    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return write!(f, "ok (depth {}, {} keys)", self.depth, self.keys);
        }
        write!(f, "{} violation(s)", self.violations.len())?;
        for v in self.violations.iter().take(8) {
            write!(f, "; {:?} at level {} key {:#x}", v.kind, v.level, v.key)?;
        }
        Ok(())
    }
}

struct Audit<'a> {
    list: &'a Skiplist,
    report: ValidationReport,
}

impl Audit<'_> {
    fn flag(&mut self, kind: ViolationKind, level: usize, key: Key) {
        self.report.violations.push(Violation { kind, level, key });
    }

    /// Every node from `first` to the end of its level, bounded against cycles.
    fn level_nodes(&mut self, first: NodeHandle, level: usize, limit: usize) -> Vec<NodeHandle> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut h = first;
        while h != TAIL {
            if h.is_sentinel() || !seen.insert(h) || out.len() > limit {
                self.flag(ViolationKind::Sentinel, level, self.list.node(h).key());
                break;
            }
            out.push(h);
            h = self.list.node(h).next();
        }
        out
    }
}

pub(super) fn run(list: &Skiplist) -> ValidationReport {
    let mut a = Audit { list, report: ValidationReport::default() };
    use ViolationKind::*;

    for (h, node) in [(TAIL, &list.tail), (TERMINAL, &list.terminal)] {
        if node.next() != h || node.bottom() != h {
            a.flag(Sentinel, 0, node.key());
        }
    }
    let head = list.node(list.head);
    if head.key() != RESERVED_KEY || head.next() != TAIL {
        a.flag(Sentinel, usize::MAX, head.key());
    }

    let depth = list.level_of(list.head);
    a.report.depth = depth;
    let limit = list.arena.blocks_in_use() as usize * list.arena.block_capacity() + 1;
    let mut parents = vec![list.head];
    let mut level = depth;
    while level > 0 {
        level -= 1;
        let first = list.node(parents[0]).bottom();
        let nodes = a.level_nodes(first, level, limit);
        let position: HashMap<NodeHandle, usize> = nodes.iter().enumerate().map(|(i, &h)| (h, i)).collect();
        let keys: Vec<Key> = nodes.iter().map(|&h| list.node(h).key()).collect();

        for (i, &h) in nodes.iter().enumerate() {
            let n = list.node(h);
            if n.header.is_marked() {
                a.flag(Marked, level, keys[i]);
            }
            let b = n.bottom();
            if (level == 0) != (b == TERMINAL) || (level > 0 && b.is_sentinel()) {
                a.flag(Sentinel, level, keys[i]);
            }
            if i > 0 {
                if keys[i] == keys[i - 1] {
                    a.flag(if level == 0 { Duplicate } else { Order }, level, keys[i]);
                } else if keys[i] < keys[i - 1] {
                    a.flag(Order, level, keys[i]);
                }
            }
        }
        if keys.last() != Some(&RESERVED_KEY) {
            a.flag(Order, level, keys.last().copied().unwrap_or(0));
        }

        // Children of each parent: the run between its bottom and the next parent's.
        let key_set: HashSet<Key> = keys.iter().copied().collect();
        let starts: Vec<Option<usize>> =
            parents.iter().map(|&p| position.get(&list.node(p).bottom()).copied()).collect();
        if starts.first() != Some(&Some(0)) || starts.windows(2).any(|w| !matches!(w, [Some(x), Some(y)] if x < y)) {
            a.flag(Order, level + 1, list.node(parents[0]).key());
        }
        for (j, &p) in parents.iter().enumerate() {
            let pkey = list.node(p).key();
            let Some(from) = starts[j] else { continue };
            let to = starts.get(j + 1).copied().flatten().unwrap_or(nodes.len()).max(from);
            let arity = to - from;
            if p == list.head {
                if !(1..=list.max_children).contains(&arity) {
                    a.flag(Arity, level + 1, pkey);
                }
            } else {
                if a.report.arity.len() <= arity {
                    a.report.arity.resize(arity + 1, 0);
                }
                a.report.arity[arity] += 1;
                if !(2..=list.max_children).contains(&arity) {
                    a.flag(Arity, level + 1, pkey);
                }
            }
            if keys[from..to].iter().any(|&k| k > pkey) {
                a.flag(KeyBound, level + 1, pkey);
            }
            if !key_set.contains(&pkey) {
                a.flag(Subset, level + 1, pkey);
            }
        }

        if level == 0 {
            a.report.keys = nodes.len().saturating_sub(1);
        }
        parents = nodes;
        if parents.is_empty() {
            break;
        }
    }
    a.report.ok = a.report.violations.is_empty();
    a.report
}

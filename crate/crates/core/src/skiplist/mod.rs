//! Concurrent deterministic 1-2-3-4 skiplist.
//!
//! Every level is a sorted linked list ending in a node with key `u64::MAX`; the
//! bottom level (the terminal list) holds the keys. A non-terminal node's children
//! are the nodes of the level below from its `bottom` up to, but excluding, the
//! `bottom` of its successor. Keys of children never exceed their parent's key.
//!
//! `find` is lock-free: it walks each level to the right until it meets a key not
//! below the target, then drops a level, validating each node's header around its
//! reads and restarting when a node turns out to be marked.
//!
//! Writers couple locks down the tree. Any change to a node's child list, or to a
//! child's key, is made while that node is locked. Insertion splits a full node
//! (5 children by default, into 2+3) before stepping into it; removal fattens a 2-child node by merging it with
//! a sibling (and re-splitting when the sibling was large) before stepping into it.
//! Nodes leave the structure marked and are recycled through the arena only after
//! an epoch grace period, so concurrent readers never see a slot reused under them.

mod ledger;
mod validate;

pub use crate::sync::lock_stats;
pub use ledger::{rebalance_bound, slack, LedgerSnapshot, RebalanceLedger};
pub use validate::{ValidationReport, Violation, ViolationKind};

use crate::arena::{Arena, ArenaConfig, ArenaNode, NodeHeader};
use crate::error::{domain, Error, Result};
use crate::primitives::{AtomicPacked, Key, NodeHandle, OpStatus, PackedWord, RESERVED_KEY};
use crate::sync::Backoff;
use arrayvec::ArrayVec;
use crossbeam_epoch::{self as epoch, Guard};
use portable_atomic::AtomicU128;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

const TAIL: NodeHandle = NodeHandle::TAIL;
const TERMINAL: NodeHandle = NodeHandle::TERMINAL;

/// Largest supported maximum arity.
pub const MAX_CHILDREN: usize = 8;

#[derive(Default)]
pub struct SkipNode {
    header: NodeHeader,
    keynext: AtomicPacked,
    bottom: AtomicU64,
    /// `(key, value)` of a terminal node; readers compare the key half against
    /// the key they found to detect a concurrent copy.
    value: AtomicU128,
}

impl ArenaNode for SkipNode {
    fn header(&self) -> &NodeHeader {
        &self.header
    }
}

impl SkipNode {
    fn sentinel(this: NodeHandle) -> SkipNode {
        let n = SkipNode::default();
        n.keynext.store(PackedWord::pack(RESERVED_KEY, this));
        n.bottom.store(this.raw(), Ordering::Relaxed);
        n
    }

    #[inline]
    fn kn(&self) -> PackedWord {
        self.keynext.load()
    }

    #[inline]
    fn key(&self) -> Key {
        self.kn().key()
    }

    #[inline]
    fn next(&self) -> NodeHandle {
        self.kn().next()
    }

    #[inline]
    fn bottom(&self) -> NodeHandle {
        NodeHandle::from_raw(self.bottom.load(Ordering::Acquire))
    }

    fn set_bottom(&self, b: NodeHandle) {
        self.bottom.store(b.raw(), Ordering::Release)
    }

    fn set_value(&self, key: Key, value: u64) {
        self.value.store(((key as u128) << 64) | value as u128, Ordering::Release)
    }

    fn value_pair(&self) -> (Key, u64) {
        let v = self.value.load(Ordering::Acquire);
        ((v >> 64) as u64, v as u64)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct SkiplistConfig {
    pub block_capacity: usize,
    /// Child count at which a node is split, and the largest arity a node may
    /// have. 5 gives the 1-2-3-4 skiplist; anything in `5..=8` is accepted.
    pub max_children: usize,
}

impl Default for SkiplistConfig {
    fn default() -> Self {
        SkiplistConfig { block_capacity: 10_000, max_children: 5 }
    }
}

pub struct Skiplist {
    arena: Arc<Arena<SkipNode>>,
    head: NodeHandle,
    tail: SkipNode,
    terminal: SkipNode,
    levels: AtomicUsize,
    max_children: usize,
    ledger: RebalanceLedger,
}

struct Children {
    nodes: ArrayVec<NodeHandle, MAX_CHILDREN>,
    keys: ArrayVec<Key, MAX_CHILDREN>,
}

impl Children {
    fn len(&self) -> usize {
        self.nodes.len()
    }

    fn first_at_least(&self, x: Key) -> Option<usize> {
        self.keys.iter().position(|&k| k >= x)
    }
}

/// Node locks held by one writer; whatever is still held is released on drop.
struct Held<'a> {
    list: &'a Skiplist,
    nodes: ArrayVec<NodeHandle, 8>,
}

impl<'a> Held<'a> {
    fn new(list: &'a Skiplist) -> Self {
        Held { list, nodes: ArrayVec::new() }
    }

    fn lock(&mut self, h: NodeHandle) {
        self.list.node(h).header.lock();
        self.nodes.push(h);
    }

    fn unlock(&mut self, h: NodeHandle) {
        let i = self.nodes.iter().position(|&n| n == h).expect("node not held");
        self.nodes.swap_remove(i);
        self.list.node(h).header.unlock();
    }

    fn release_all_but(&mut self, keep: NodeHandle) {
        for h in std::mem::take(&mut self.nodes) {
            if h == keep {
                self.nodes.push(h);
            } else {
                self.list.node(h).header.unlock();
            }
        }
    }
}

impl Drop for Held<'_> {
    fn drop(&mut self) {
        for &h in &self.nodes {
            self.list.node(h).header.unlock();
        }
    }
}

enum Step<T> {
    Done(T),
    Retry,
}

impl Default for Skiplist {
    fn default() -> Self {
        Skiplist::new()
    }
}

impl Skiplist {
    pub fn new() -> Skiplist {
        Skiplist::with_config(SkiplistConfig::default()).expect("default arena configuration is valid")
    }

    pub fn with_config(config: SkiplistConfig) -> Result<Skiplist> {
        if !(5..=MAX_CHILDREN).contains(&config.max_children) {
            return Err(domain(format!("max_children must be in 5..={MAX_CHILDREN}, got {}", config.max_children)));
        }
        let arena = Arc::new(Arena::<SkipNode>::new(ArenaConfig { block_capacity: config.block_capacity })?);
        let last = arena.alloc()?;
        let head = arena.alloc()?;
        let (l, h) = (arena.get(last), arena.get(head));
        l.keynext.store(PackedWord::pack(RESERVED_KEY, TAIL));
        l.set_bottom(TERMINAL);
        l.set_value(RESERVED_KEY, 0);
        h.keynext.store(PackedWord::pack(RESERVED_KEY, TAIL));
        h.set_bottom(last);
        Ok(Skiplist {
            arena,
            head,
            tail: SkipNode::sentinel(TAIL),
            terminal: SkipNode::sentinel(TERMINAL),
            levels: AtomicUsize::new(1),
            max_children: config.max_children,
            ledger: RebalanceLedger::new(2, config.max_children as u64),
        })
    }

    #[inline]
    fn node(&self, h: NodeHandle) -> &SkipNode {
        match h {
            TAIL => &self.tail,
            TERMINAL => &self.terminal,
            _ => self.arena.get(h),
        }
    }

    fn is_terminal(&self, h: NodeHandle) -> bool {
        self.node(h).bottom() == TERMINAL
    }

    /// Levels above the terminal list, head included. Advisory under concurrency.
    pub fn depth(&self) -> usize {
        self.levels.load(Ordering::Relaxed)
    }

    /// Maximum arity of a node.
    pub fn max_children(&self) -> usize {
        self.max_children
    }

    pub fn ledger(&self) -> &RebalanceLedger {
        &self.ledger
    }

    /// Blocks held by the node arena.
    pub fn blocks_in_use(&self) -> u64 {
        self.arena.blocks_in_use()
    }

    fn check_key(key: Key) -> Result<()> {
        if key == RESERVED_KEY {
            Err(Error::KeyReserved(key))
        } else {
            Ok(())
        }
    }

    // ---- lock-free readers ----

    /// Consistent `(keynext, bottom)` of an unmarked node, or `None` to retry.
    #[inline]
    fn read(&self, h: NodeHandle) -> Option<(PackedWord, NodeHandle)> {
        let n = self.node(h);
        let s1 = n.header.stamp();
        let kn = n.kn();
        let b = n.bottom();
        let s2 = n.header.stamp();
        (s1 == s2 && !NodeHeader::stamp_is_marked(s1)).then_some((kn, b))
    }

    /// First terminal node whose key is `>= x`, or `None` to retry.
    fn seek(&self, x: Key) -> Option<(NodeHandle, PackedWord)> {
        let (mut kn, mut below) = self.read(self.head)?;
        if kn.next() != TAIL {
            return None;
        }
        let mut cur = self.head;
        loop {
            if below == TERMINAL {
                return Some((cur, kn));
            }
            let mut n = below;
            loop {
                if n.is_sentinel() {
                    return None;
                }
                let (nkn, nb) = self.read(n)?;
                if nkn.key() < x {
                    n = nkn.next();
                    continue;
                }
                (cur, kn, below) = (n, nkn, nb);
                break;
            }
        }
    }

    fn seek_retrying(&self, x: Key) -> (NodeHandle, PackedWord) {
        let mut backoff = Backoff::new();
        loop {
            if let Some(found) = self.seek(x) {
                return found;
            }
            backoff.snooze();
        }
    }

    /// `True` iff `key` was in the set at some instant during the call. Takes no locks.
    pub fn find(&self, key: Key) -> OpStatus {
        OpStatus::from_bool(self.contains(key))
    }

    pub fn contains(&self, key: Key) -> bool {
        if key == RESERVED_KEY {
            return false;
        }
        let _guard = epoch::pin();
        self.seek_retrying(key).1.key() == key
    }

    /// Value stored with `key`, if present.
    pub fn get(&self, key: Key) -> Option<u64> {
        if key == RESERVED_KEY {
            return None;
        }
        let _guard = epoch::pin();
        let mut backoff = Backoff::new();
        loop {
            let (t, kn) = self.seek_retrying(key);
            if kn.key() != key {
                return None;
            }
            let (k, v) = self.node(t).value_pair();
            if k == key && self.read(t).is_some_and(|(now, _)| now.key() == key) {
                return Some(v);
            }
            backoff.snooze();
        }
    }

    /// Keys in `[lo, hi]`, ascending. Each returned key was present at some point
    /// during the scan.
    pub fn range_scan(&self, lo: Key, hi: Key) -> Result<Vec<Key>> {
        if lo > hi {
            return Err(domain(format!("empty range [{lo}, {hi}]")));
        }
        let _guard = epoch::pin();
        let (mut t, _) = self.seek_retrying(lo);
        let mut out: Vec<Key> = Vec::new();
        while !t.is_sentinel() {
            let n = self.node(t);
            let s1 = n.header.stamp();
            let kn = n.kn();
            let live = n.header.stamp() == s1 && !NodeHeader::stamp_is_marked(s1);
            let k = kn.key();
            if k > hi || k == RESERVED_KEY {
                break;
            }
            if live && k >= lo && out.last().is_none_or(|&l| k > l) {
                out.push(k);
            }
            t = kn.next();
        }
        Ok(out)
    }

    /// Number of keys, by walking the terminal list.
    pub fn len(&self) -> usize {
        self.range_scan(0, RESERVED_KEY - 1).map_or(0, |v| v.len())
    }

    pub fn is_empty(&self) -> bool {
        let _guard = epoch::pin();
        self.seek_retrying(0).1.key() == RESERVED_KEY
    }

    // ---- writer helpers (callers hold the relevant parent lock) ----

    fn children(&self, p: NodeHandle) -> Children {
        let pn = self.node(p);
        let next = pn.next();
        let end = if next == TAIL { TAIL } else { self.node(next).bottom() };
        let mut out = Children { nodes: ArrayVec::new(), keys: ArrayVec::new() };
        let mut h = pn.bottom();
        while h != end && !h.is_sentinel() {
            let kn = self.node(h).kn();
            out.nodes.push(h);
            out.keys.push(kn.key());
            h = kn.next();
        }
        out
    }

    /// Levels between `h` and the terminal list (terminal nodes are level 0).
    fn level_of(&self, mut h: NodeHandle) -> usize {
        let mut level = 0;
        while !h.is_sentinel() && !self.is_terminal(h) {
            h = self.node(h).bottom();
            level += 1;
        }
        level
    }

    /// Lowers a locked node's key to its largest child key. Returns the key.
    fn fix_key(&self, c: NodeHandle) -> Key {
        let n = self.node(c);
        let kn = n.kn();
        if n.bottom() == TERMINAL {
            return kn.key();
        }
        let ch = self.children(c);
        match ch.keys.last() {
            Some(&max) if max < kn.key() => {
                n.keynext.store(PackedWord::pack(max, kn.next()));
                max
            }
            _ => kn.key(),
        }
    }

    fn retire(&self, h: NodeHandle, guard: &Guard) {
        let arena = Arc::clone(&self.arena);
        guard.defer(move || arena.free(h));
    }

    fn new_node(&self, kn: PackedWord, bottom: NodeHandle) -> Result<NodeHandle> {
        let h = self.arena.alloc()?;
        let n = self.node(h);
        n.keynext.store(kn);
        n.set_bottom(bottom);
        Ok(h)
    }

    /// Head has a full child list: push everything one level down under a new node.
    fn grow_root(&self) -> Result<()> {
        let head = self.node(self.head);
        let n = self.new_node(PackedWord::pack(RESERVED_KEY, TAIL), head.bottom())?;
        head.set_bottom(n);
        self.levels.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    /// Head has a single non-terminal child: adopt its children and drop it.
    fn shrink_root(&self, only: NodeHandle, held: &mut Held<'_>, guard: &Guard) {
        held.lock(only);
        let c = self.node(only);
        c.header.mark();
        self.node(self.head).set_bottom(c.bottom());
        held.unlock(only);
        self.retire(only, guard);
        self.levels.fetch_sub(1, Ordering::Relaxed);
    }

    /// Splits locked `c` (a full child list) in half, the right half one larger
    /// when odd (2+3 for five children). Returns the new right node, locked, and
    /// the key `c` keeps.
    fn split(&self, c: NodeHandle, ch: &Children, held: &mut Held<'_>) -> Result<(NodeHandle, Key)> {
        let half = ch.len() / 2;
        let kn = self.node(c).kn();
        let nn = self.new_node(kn, ch.nodes[half])?;
        held.lock(nn);
        self.node(c).keynext.store(PackedWord::pack(ch.keys[half - 1], nn));
        self.ledger.split(self.level_of(c));
        Ok((nn, ch.keys[half - 1]))
    }

    /// Fattens whichever of the adjacent locked pair `(left, right)` the key routes
    /// to when it has only 2 children: `right` is merged into `left`, and if that
    /// overfills the result a new node takes back part of the children.
    fn merge_borrow(
        &self,
        left: NodeHandle,
        right: NodeHandle,
        x: Key,
        held: &mut Held<'_>,
        guard: &Guard,
    ) -> Result<()> {
        let (ln, rn) = (self.node(left), self.node(right));
        let (lc, rc) = (self.children(left), self.children(right));
        let into_left = x <= ln.key();
        let left_thin = into_left && lc.len() == 2;
        let right_thin = !into_left && rc.len() == 2;
        if !(left_thin || right_thin) {
            return Ok(());
        }
        let rkn = rn.kn();
        // (bottom of the replacement node, key left keeps afterwards)
        let resplit = if left_thin && rc.len() > 2 {
            Some((rc.nodes[1], rc.keys[0]))
        } else if right_thin && lc.len() > 2 {
            let p = lc.len();
            Some((lc.nodes[p - 1], lc.keys[p - 2]))
        } else {
            None
        };
        let fresh = match resplit {
            Some((bottom, _)) => {
                let nn = self.new_node(rkn, bottom)?;
                held.lock(nn);
                Some(nn)
            }
            None => None,
        };
        rn.header.mark();
        ln.keynext.store(rkn);
        held.unlock(right);
        self.retire(right, guard);
        let level = self.level_of(left);
        match (fresh, resplit) {
            (Some(nn), Some((_, left_key))) => {
                ln.keynext.store(PackedWord::pack(left_key, nn));
                self.ledger.borrow(level);
            }
            _ => self.ledger.merge(level),
        }
        Ok(())
    }

    // ---- insert ----

    pub fn insert(&self, key: Key) -> Result<OpStatus> {
        self.insert_with_value(key, 0)
    }

    /// Adds `key` with a satellite `value`. An existing key keeps its value.
    pub fn insert_with_value(&self, key: Key, value: u64) -> Result<OpStatus> {
        Self::check_key(key)?;
        let mut backoff = Backoff::new();
        loop {
            match self.try_insert(key, value)? {
                Step::Done(s) => return Ok(s),
                Step::Retry => backoff.snooze(),
            }
        }
    }

    fn try_insert(&self, x: Key, value: u64) -> Result<Step<OpStatus>> {
        let _guard = epoch::pin();
        let mut held = Held::new(self);
        held.lock(self.head);
        let mut p = self.head;
        loop {
            let mut ch = self.children(p);
            if p == self.head && ch.len() >= self.max_children {
                self.grow_root()?;
                ch = self.children(p);
            }
            let Some(i) = ch.first_at_least(x) else { return Ok(Step::Retry) };
            let c = ch.nodes[i];
            if self.is_terminal(c) {
                if ch.keys[i] == x {
                    return Ok(Step::Done(OpStatus::AlreadyPresent));
                }
                self.link_terminal(&ch, i, x, value)?;
                return Ok(Step::Done(OpStatus::Added));
            }
            held.lock(c);
            if self.fix_key(c) < x {
                held.unlock(c);
                continue;
            }
            let cch = self.children(c);
            let mut next = c;
            if cch.len() >= self.max_children {
                let (nn, left_max) = self.split(c, &cch, &mut held)?;
                if x <= left_max {
                    held.unlock(nn);
                } else {
                    held.unlock(c);
                    next = nn;
                }
            }
            held.unlock(p);
            p = next;
        }
    }

    /// Links a terminal node for `x` in front of child `i`. Parent lock held.
    fn link_terminal(&self, ch: &Children, i: usize, x: Key, value: u64) -> Result<()> {
        let c = ch.nodes[i];
        if i > 0 {
            let pred = self.node(ch.nodes[i - 1]);
            let t = self.new_node(PackedWord::pack(x, c), TERMINAL)?;
            self.node(t).set_value(x, value);
            pred.keynext.store(PackedWord::pack(pred.key(), t));
        } else {
            // `c` is referenced from the level above: keep it in place, move its
            // contents to a fresh successor and reuse it for `x`.
            let cn = self.node(c);
            let kn = cn.kn();
            let d = self.new_node(kn, TERMINAL)?;
            self.node(d).set_value(kn.key(), cn.value_pair().1);
            cn.set_value(x, value);
            cn.keynext.store(PackedWord::pack(x, d));
        }
        Ok(())
    }

    // ---- remove ----

    pub fn remove(&self, key: Key) -> Result<OpStatus> {
        Self::check_key(key)?;
        let mut backoff = Backoff::new();
        loop {
            match self.try_remove(key)? {
                Step::Done((status, repair)) => {
                    if repair {
                        while self.repair_pass(key) {}
                    }
                    return Ok(status);
                }
                Step::Retry => backoff.snooze(),
            }
        }
    }

    /// Returns the status and whether upper levels may still carry `x` as a key.
    fn try_remove(&self, x: Key) -> Result<Step<(OpStatus, bool)>> {
        let guard = epoch::pin();
        let mut held = Held::new(self);
        held.lock(self.head);
        let mut p = self.head;
        loop {
            let ch = self.children(p);
            if ch.len() == 0 {
                return Ok(Step::Retry);
            }
            let leaf = self.is_terminal(ch.nodes[0]);
            if p == self.head && ch.len() == 1 && !leaf {
                self.shrink_root(ch.nodes[0], &mut held, &guard);
                continue;
            }
            let Some(i) = ch.first_at_least(x) else { return Ok(Step::Retry) };
            if leaf {
                if ch.keys[i] != x {
                    return Ok(Step::Done((OpStatus::NotFound, false)));
                }
                self.unlink_terminal(&ch, i, &guard);
                let stale = p != self.head && self.node(p).key() == x;
                if stale {
                    self.fix_key(p);
                }
                return Ok(Step::Done((OpStatus::Removed, stale)));
            }
            let c = ch.nodes[i];
            held.lock(c);
            if self.fix_key(c) < x {
                held.unlock(c);
                continue;
            }
            if self.children(c).len() > 2 {
                held.unlock(p);
                p = c;
                continue;
            }
            if ch.len() < 2 {
                return Ok(Step::Retry);
            }
            // Relock the pair left to right, then fatten and choose again.
            held.unlock(c);
            let (l, r) = if i > 0 { (ch.nodes[i - 1], c) } else { (c, ch.nodes[i + 1]) };
            held.lock(l);
            held.lock(r);
            self.fix_key(l);
            self.fix_key(r);
            self.merge_borrow(l, r, x, &mut held, &guard)?;
            held.release_all_but(p);
        }
    }

    /// Unlinks terminal child `i` (key `x`). Parent lock held.
    fn unlink_terminal(&self, ch: &Children, i: usize, guard: &Guard) {
        let c = ch.nodes[i];
        let cn = self.node(c);
        if i > 0 {
            let pred = self.node(ch.nodes[i - 1]);
            cn.header.mark();
            pred.keynext.store(PackedWord::pack(pred.key(), cn.next()));
            self.retire(c, guard);
        } else {
            // First child: absorb the successor instead of unlinking `c`.
            let s = cn.next();
            let sn = self.node(s);
            let skn = sn.kn();
            sn.header.mark();
            cn.set_value(skn.key(), sn.value_pair().1);
            cn.keynext.store(skn);
            self.retire(s, guard);
        }
    }

    /// One locked descent toward `x`, lowering stale keys on the way. Returns
    /// whether any key changed; each pass repairs the lowest stale level left.
    fn repair_pass(&self, x: Key) -> bool {
        let _guard = epoch::pin();
        let mut held = Held::new(self);
        held.lock(self.head);
        let mut p = self.head;
        let mut changed = false;
        loop {
            let ch = self.children(p);
            let Some(i) = ch.first_at_least(x) else { return changed };
            let c = ch.nodes[i];
            if self.is_terminal(c) {
                return changed;
            }
            held.lock(c);
            let after = self.fix_key(c);
            changed |= after != ch.keys[i];
            if after < x {
                held.unlock(c);
                continue;
            }
            held.unlock(p);
            p = c;
        }
    }

    /// Adds a level when the head's child list is full. No-op otherwise.
    pub fn increase_depth(&self) -> Result<()> {
        let _guard = epoch::pin();
        let mut held = Held::new(self);
        held.lock(self.head);
        if self.children(self.head).len() >= self.max_children {
            self.grow_root()?;
        }
        Ok(())
    }

    /// Removes a level when the head has a single non-terminal child. No-op otherwise.
    pub fn decrease_depth(&self) {
        let guard = epoch::pin();
        let mut held = Held::new(self);
        held.lock(self.head);
        let ch = self.children(self.head);
        if ch.len() == 1 && !self.is_terminal(ch.nodes[0]) {
            self.shrink_root(ch.nodes[0], &mut held, &guard);
        }
    }

    /// Full structural check. Requires quiescence.
    pub fn validate(&self) -> ValidationReport {
        validate::run(self)
    }
}

impl std::fmt::Debug for Skiplist {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Skiplist").field("depth", &self.depth()).field("ledger", &self.ledger).finish()
    }
}

#[cfg(test)]
mod tests;

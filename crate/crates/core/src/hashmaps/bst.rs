//! Unbalanced binary search tree backing a single hash slot.
//!
//! Nodes live in a slab with an intrusive free list and are ordered by the key's
//! hash, so insertion order of user keys does not skew the shape. An empty tree
//! owns no heap memory.

use crate::primitives::Key;

const NIL: u32 = u32::MAX;

struct Node {
    hash: u64,
    key: Key,
    left: u32,
    right: u32,
}

struct Slab {
    nodes: Vec<Node>,
    root: u32,
    free: u32,
    len: u32,
}

#[derive(Default)]
pub(crate) struct Tree(Option<Box<Slab>>);

impl Tree {
    pub(crate) fn len(&self) -> usize {
        self.0.as_ref().map_or(0, |s| s.len as usize)
    }

    /// Slot index holding `hash`, or the link that would hold it.
    fn locate(s: &Slab, hash: u64) -> (Option<u32>, Option<(u32, bool)>) {
        let (mut cur, mut parent) = (s.root, None);
        while cur != NIL {
            let n = &s.nodes[cur as usize];
            if hash == n.hash {
                return (Some(cur), parent);
            }
            let go_left = hash < n.hash;
            parent = Some((cur, go_left));
            cur = if go_left { n.left } else { n.right };
        }
        (None, parent)
    }

    pub(crate) fn contains(&self, hash: u64) -> bool {
        self.0.as_ref().is_some_and(|s| Self::locate(s, hash).0.is_some())
    }

    /// Returns false if the key was already present.
    pub(crate) fn insert(&mut self, hash: u64, key: Key) -> bool {
        let s = self.0.get_or_insert_with(|| {
            Box::new(Slab { nodes: Vec::new(), root: NIL, free: NIL, len: 0 })
        });
        let (found, parent) = Self::locate(s, hash);
        if found.is_some() {
            return false;
        }
        let node = Node { hash, key, left: NIL, right: NIL };
        let idx = if s.free != NIL {
            let i = s.free;
            s.free = s.nodes[i as usize].left;
            s.nodes[i as usize] = node;
            i
        } else {
            s.nodes.push(node);
            (s.nodes.len() - 1) as u32
        };
        match parent {
            None => s.root = idx,
            Some((p, true)) => s.nodes[p as usize].left = idx,
            Some((p, false)) => s.nodes[p as usize].right = idx,
        }
        s.len += 1;
        true
    }

    /// Returns false if the key was absent.
    pub(crate) fn remove(&mut self, hash: u64) -> bool {
        let Some(s) = self.0.as_mut() else { return false };
        let (Some(target), parent) = Self::locate(s, hash) else { return false };
        let (l, r) = (s.nodes[target as usize].left, s.nodes[target as usize].right);
        let replacement = if l == NIL {
            r
        } else if r == NIL {
            l
        } else {
            // Detach the in-order successor and move it into the target's place.
            let (mut succ_parent, mut succ) = (target, r);
            while s.nodes[succ as usize].left != NIL {
                succ_parent = succ;
                succ = s.nodes[succ as usize].left;
            }
            if succ_parent != target {
                s.nodes[succ_parent as usize].left = s.nodes[succ as usize].right;
                s.nodes[succ as usize].right = r;
            }
            s.nodes[succ as usize].left = l;
            succ
        };
        match parent {
            None => s.root = replacement,
            Some((p, true)) => s.nodes[p as usize].left = replacement,
            Some((p, false)) => s.nodes[p as usize].right = replacement,
        }
        s.nodes[target as usize].left = s.free;
        s.free = target;
        s.len -= 1;
        if s.len == 0 {
            self.0 = None;
        }
        true
    }

    /// `(hash, key)` pairs in hash order.
    pub(crate) fn entries(&self) -> Vec<(u64, Key)> {
        let Some(s) = self.0.as_ref() else { return Vec::new() };
        let mut out = Vec::with_capacity(s.len as usize);
        let mut stack = Vec::new();
        let mut cur = s.root;
        while cur != NIL || !stack.is_empty() {
            while cur != NIL {
                stack.push(cur);
                cur = s.nodes[cur as usize].left;
            }
            let n = &s.nodes[stack.pop().expect("stack non-empty") as usize];
            out.push((n.hash, n.key));
            cur = n.right;
        }
        out
    }

    pub(crate) fn take(&mut self) -> Tree {
        Tree(self.0.take())
    }
}

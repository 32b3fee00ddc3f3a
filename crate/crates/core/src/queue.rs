//! Unbounded MPMC queue over fixed-size array blocks.
//!
//! `head` and `tail` are monotone logical positions advanced by compare-exchange.
//! Position `p` lives in block `(p - shift) / C`, cell `(p - shift) % C`. When a pop
//! consumes the last cell of the head block, the block is reset and moved to the end
//! of the block vector and `shift` grows by `C`, so blocks are reused rather than
//! freed. Pushes that run past the last block append a new one.
//!
//! Every operation registers on a gate word. Appending or recycling a block needs
//! the gate exclusively, which blocks new operations and waits for active ones to
//! drain; the block vector is only mutated in that window.

use crate::error::{Error, Result};
use crate::sync::Backoff;
use crossbeam_utils::CachePadded;
use std::cell::UnsafeCell;
use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

/// Cell value meaning "not yet written" in [`CellMode::Sentinel`] queues.
pub const EMPTY: u64 = u64::MAX;

/// Default block size, in payloads.
pub const DEFAULT_BLOCK_SIZE: usize = 10_000;

const EXCLUSIVE: u64 = 1 << 63;

/// How a cell signals that its push has landed.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum CellMode {
    /// [`EMPTY`] marks unwritten cells; pushing `EMPTY` is rejected.
    #[default]
    Sentinel,
    /// A separate valid flag per cell; every `u64` is a legal payload.
    ValidBit,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct QueueConfig {
    pub block_size: usize,
    pub cell_mode: CellMode,
}

impl Default for QueueConfig {
    fn default() -> Self {
        QueueConfig { block_size: DEFAULT_BLOCK_SIZE, cell_mode: CellMode::Sentinel }
    }
}

struct Block {
    cells: Box<[AtomicU64]>,
    valid: Option<Box<[AtomicBool]>>,
}

impl Block {
    fn new(len: usize, mode: CellMode) -> Block {
        Block {
            cells: (0..len).map(|_| AtomicU64::new(EMPTY)).collect(),
            valid: match mode {
                CellMode::Sentinel => None,
                CellMode::ValidBit => Some((0..len).map(|_| AtomicBool::new(false)).collect()),
            },
        }
    }

    fn reset(&mut self) {
        for c in self.cells.iter_mut() {
            *c.get_mut() = EMPTY;
        }
        if let Some(valid) = &mut self.valid {
            for v in valid.iter_mut() {
                *v.get_mut() = false;
            }
        }
    }

    #[inline]
    fn write(&self, off: usize, value: u64) {
        match &self.valid {
            None => self.cells[off].store(value, Ordering::Release),
            Some(valid) => {
                self.cells[off].store(value, Ordering::Relaxed);
                valid[off].store(true, Ordering::Release);
            }
        }
    }

    /// Waits for the push that claimed `off` to publish its value.
    #[inline]
    fn take(&self, off: usize) -> u64 {
        let mut backoff = Backoff::new();
        match &self.valid {
            None => loop {
                let v = self.cells[off].load(Ordering::Acquire);
                if v != EMPTY {
                    return v;
                }
                backoff.snooze();
            },
            Some(valid) => loop {
                if valid[off].load(Ordering::Acquire) {
                    return self.cells[off].load(Ordering::Relaxed);
                }
                backoff.snooze();
            },
        }
    }
}

/// Observability counters.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct QueueStats {
    pub blocks: u64,
    pub peak_blocks: u64,
    pub recycles: u64,
    pub shift: u64,
    pub head: u64,
    pub tail: u64,
}

pub struct Queue {
    block_size: u64,
    mode: CellMode,
    head: CachePadded<AtomicU64>,
    tail: CachePadded<AtomicU64>,
    gate: CachePadded<AtomicU64>,
    // Written only while the gate is held exclusively.
    shift: AtomicU64,
    blocks: UnsafeCell<VecDeque<Block>>,
    peak_blocks: AtomicU64,
    recycles: AtomicU64,
}

// The block vector is only mutated under the exclusive gate, with no other
// operation in flight; shared access reads immutable block pointers.
unsafe impl Sync for Queue {}
unsafe impl Send for Queue {}

impl Default for Queue {
    fn default() -> Self {
        Queue::new(QueueConfig::default())
    }
}

impl Queue {
    pub fn new(config: QueueConfig) -> Queue {
        let block_size = config.block_size.max(1);
        let mut blocks = VecDeque::new();
        blocks.push_back(Block::new(block_size, config.cell_mode));
        Queue {
            block_size: block_size as u64,
            mode: config.cell_mode,
            head: CachePadded::new(AtomicU64::new(0)),
            tail: CachePadded::new(AtomicU64::new(0)),
            gate: CachePadded::new(AtomicU64::new(0)),
            shift: AtomicU64::new(0),
            blocks: UnsafeCell::new(blocks),
            peak_blocks: AtomicU64::new(1),
            recycles: AtomicU64::new(0),
        }
    }

    pub fn with_block_size(block_size: usize) -> Queue {
        Queue::new(QueueConfig { block_size, ..QueueConfig::default() })
    }

    pub fn config(&self) -> QueueConfig {
        QueueConfig { block_size: self.block_size as usize, cell_mode: self.mode }
    }

    fn enter(&self) {
        let mut backoff = Backoff::new();
        loop {
            let g = self.gate.load(Ordering::Acquire);
            if g & EXCLUSIVE == 0
                && self
                    .gate
                    .compare_exchange_weak(g, g + 1, Ordering::AcqRel, Ordering::Relaxed)
                    .is_ok()
            {
                return;
            }
            backoff.snooze();
        }
    }

    fn exit(&self) {
        self.gate.fetch_sub(1, Ordering::Release);
    }

    /// Caller must be registered. Returns false if another thread holds the gate;
    /// the caller then has to step out so that thread can proceed.
    fn try_exclusive(&self) -> bool {
        if self.gate.fetch_or(EXCLUSIVE, Ordering::AcqRel) & EXCLUSIVE != 0 {
            return false;
        }
        let mut backoff = Backoff::new();
        while self.gate.load(Ordering::Acquire) != EXCLUSIVE | 1 {
            backoff.snooze();
        }
        true
    }

    fn release_exclusive(&self) {
        self.gate.fetch_and(!EXCLUSIVE, Ordering::Release);
    }

    /// Caller must be registered on the gate.
    #[inline]
    unsafe fn blocks(&self) -> &VecDeque<Block> {
        &*self.blocks.get()
    }

    /// Caller must hold the gate exclusively.
    #[allow(clippy::mut_from_ref)]
    unsafe fn blocks_mut(&self) -> &mut VecDeque<Block> {
        &mut *self.blocks.get()
    }

    #[inline]
    fn locate(&self, pos: u64) -> (usize, usize) {
        let rel = pos - self.shift.load(Ordering::Relaxed);
        ((rel / self.block_size) as usize, (rel % self.block_size) as usize)
    }

    /// Appends `value` at the tail.
    pub fn push(&self, value: u64) -> Result<()> {
        if self.mode == CellMode::Sentinel && value == EMPTY {
            return Err(Error::ValueReserved(value));
        }
        self.enter();
        let mut backoff = Backoff::new();
        loop {
            let t = self.tail.load(Ordering::Acquire);
            let (idx, off) = self.locate(t);
            let missing = unsafe { idx >= self.blocks().len() };
            if missing {
                if self.try_exclusive() {
                    self.grow();
                    self.release_exclusive();
                } else {
                    self.exit();
                    self.enter();
                }
                continue;
            }
            if self
                .tail
                .compare_exchange(t, t + 1, Ordering::AcqRel, Ordering::Relaxed)
                .is_ok()
            {
                unsafe { self.blocks()[idx].write(off, value) };
                break;
            }
            backoff.snooze();
        }
        self.exit();
        Ok(())
    }

    /// Appends blocks until the tail position is backed. Exclusive gate held.
    fn grow(&self) {
        let blocks = unsafe { self.blocks_mut() };
        let (idx, _) = self.locate(self.tail.load(Ordering::Acquire));
        while blocks.len() <= idx {
            blocks.push_back(Block::new(self.block_size as usize, self.mode));
        }
        self.peak_blocks.fetch_max(blocks.len() as u64, Ordering::Relaxed);
    }

    /// Removes the value at the head, or `None` when the queue is empty.
    pub fn pop(&self) -> Option<u64> {
        self.enter();
        let mut backoff = Backoff::new();
        let value = loop {
            let h = self.head.load(Ordering::Acquire);
            let t = self.tail.load(Ordering::Acquire);
            if h >= t {
                break None;
            }
            if self
                .head
                .compare_exchange(h, h + 1, Ordering::AcqRel, Ordering::Relaxed)
                .is_ok()
            {
                let (idx, off) = self.locate(h);
                let v = unsafe { self.blocks()[idx].take(off) };
                if off as u64 == self.block_size - 1 && self.try_exclusive() {
                    self.recycle_blocks();
                    self.release_exclusive();
                }
                break Some(v);
            }
            backoff.snooze();
        };
        self.exit();
        value
    }

    /// Moves every fully consumed leading block to the back. Exclusive gate held.
    fn recycle_blocks(&self) {
        let blocks = unsafe { self.blocks_mut() };
        let head = self.head.load(Ordering::Acquire);
        while head - self.shift.load(Ordering::Relaxed) >= self.block_size {
            let mut b = blocks.pop_front().expect("queue owns at least one block");
            b.reset();
            blocks.push_back(b);
            self.shift.fetch_add(self.block_size, Ordering::Relaxed);
            self.recycles.fetch_add(1, Ordering::Relaxed);
        }
    }

    /// Number of elements pushed and not yet popped (racy under concurrency).
    pub fn len(&self) -> u64 {
        let h = self.head.load(Ordering::Acquire);
        self.tail.load(Ordering::Acquire).saturating_sub(h)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Blocks currently owned by the queue.
    pub fn blocks_in_use(&self) -> u64 {
        self.enter();
        let n = unsafe { self.blocks().len() as u64 };
        self.exit();
        n
    }

    pub fn stats(&self) -> QueueStats {
        self.enter();
        let s = QueueStats {
            blocks: unsafe { self.blocks().len() as u64 },
            peak_blocks: self.peak_blocks.load(Ordering::Relaxed),
            recycles: self.recycles.load(Ordering::Relaxed),
            shift: self.shift.load(Ordering::Relaxed),
            head: self.head.load(Ordering::Acquire),
            tail: self.tail.load(Ordering::Acquire),
        };
        self.exit();
        s
    }
}

impl std::fmt::Debug for Queue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Queue").field("config", &self.config()).field("stats", &self.stats()).finish()
    }
}

/// `(max(1, ceil((n1 - n2) / C)), max(1, ceil(n1 / C)))`: the fewest and most blocks
/// a sequential trace of `n1` pushes and `n2` pops can leave allocated.
pub fn allocation_bounds(n1: u64, n2: u64, block_size: u64) -> Result<(u64, u64)> {
    if block_size == 0 {
        return Err(crate::error::domain("block size must be at least 1"));
    }
    if n2 > n1 {
        return Err(crate::error::domain(format!("pops ({n2}) exceed pushes ({n1})")));
    }
    // The first block is allocated eagerly, so both bounds are at least one.
    let min = (n1 - n2).div_ceil(block_size).max(1);
    let max = n1.div_ceil(block_size).max(1);
    Ok((min, max))
}

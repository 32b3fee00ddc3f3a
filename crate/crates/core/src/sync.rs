//! Spin/backoff helper and the per-node test-and-set lock bookkeeping.

use std::cell::Cell;

const SPIN_LIMIT: u32 = 6; // 2^6 = 64 spins before yielding

pub(crate) struct Backoff {
    step: u32,
}

impl Backoff {
    pub(crate) fn new() -> Self {
        Backoff { step: 0 }
    }

    /// Exponential spin capped at 64 iterations, then yield to the scheduler.
    pub(crate) fn snooze(&mut self) {
        if self.step <= SPIN_LIMIT {
            for _ in 0..(1u32 << self.step) {
                std::hint::spin_loop();
            }
            self.step += 1;
        } else {
            std::thread::yield_now();
        }
    }
}

thread_local! {
    static HELD: Cell<usize> = const { Cell::new(0) };
    static PEAK: Cell<usize> = const { Cell::new(0) };
    static TOTAL: Cell<u64> = const { Cell::new(0) };
}

/// Per-thread lock accounting, used to check lock footprints in tests.
pub mod lock_stats {
    use super::*;

    pub(crate) fn acquired() {
        HELD.with(|h| {
            let n = h.get() + 1;
            h.set(n);
            PEAK.with(|p| p.set(p.get().max(n)));
        });
        TOTAL.with(|t| t.set(t.get() + 1));
    }

    pub(crate) fn released() {
        HELD.with(|h| h.set(h.get() - 1));
    }

    /// Node locks currently held by this thread.
    pub fn held() -> usize {
        HELD.with(|h| h.get())
    }

    /// Largest number of node locks this thread held at once since the last reset.
    pub fn peak() -> usize {
        PEAK.with(|p| p.get())
    }

    /// Node lock acquisitions by this thread since the last reset.
    pub fn total() -> u64 {
        TOTAL.with(|t| t.get())
    }

    pub fn reset() {
        PEAK.with(|p| p.set(HELD.with(|h| h.get())));
        TOTAL.with(|t| t.set(0));
    }
}

//! Append-only vector whose elements never move once allocated.
//!
//! Storage is a fixed table of segments; segment `k` holds `base << k` elements and
//! is allocated on first demand. Readers index without locking; growth serializes on
//! a mutex.

use parking_lot::Mutex;
use std::ptr;
use std::sync::atomic::{AtomicPtr, Ordering};

const SEGMENTS: usize = 48;

pub(crate) struct Segmented<T> {
    base_log: u32,
    segments: [AtomicPtr<T>; SEGMENTS],
    grow: Mutex<()>,
}

unsafe impl<T: Send + Sync> Send for Segmented<T> {}
unsafe impl<T: Send + Sync> Sync for Segmented<T> {}

impl<T: Default> Segmented<T> {
    /// `base` is rounded up to a power of two.
    pub(crate) fn new(base: usize) -> Self {
        let base_log = base.max(1).next_power_of_two().trailing_zeros();
        Segmented {
            base_log,
            segments: std::array::from_fn(|_| AtomicPtr::new(ptr::null_mut())),
            grow: Mutex::new(()),
        }
    }

    #[inline]
    fn locate(&self, index: usize) -> (usize, usize) {
        let j = index + (1usize << self.base_log);
        let top = usize::BITS - 1 - j.leading_zeros();
        ((top - self.base_log) as usize, j - (1usize << top))
    }

    #[inline]
    fn segment_len(&self, seg: usize) -> usize {
        1usize << (self.base_log as usize + seg)
    }

    /// Element at `index`, if its segment has been allocated.
    #[inline]
    pub(crate) fn get(&self, index: usize) -> Option<&T> {
        let (seg, off) = self.locate(index);
        let p = self.segments.get(seg)?.load(Ordering::Acquire);
        if p.is_null() {
            None
        } else {
            // Segments are never freed before `self` and `off` is in bounds.
            Some(unsafe { &*p.add(off) })
        }
    }

    /// Element at `index`, allocating its segment when missing.
    pub(crate) fn get_or_alloc(&self, index: usize) -> &T {
        if let Some(v) = self.get(index) {
            return v;
        }
        let (seg, off) = self.locate(index);
        assert!(seg < SEGMENTS, "segmented index {index} out of range");
        let _g = self.grow.lock();
        let slot = &self.segments[seg];
        let mut p = slot.load(Ordering::Acquire);
        if p.is_null() {
            let boxed: Box<[T]> = (0..self.segment_len(seg)).map(|_| T::default()).collect();
            p = Box::into_raw(boxed) as *mut T;
            slot.store(p, Ordering::Release);
        }
        unsafe { &*p.add(off) }
    }
}

impl<T> Drop for Segmented<T> {
    fn drop(&mut self) {
        for (seg, slot) in self.segments.iter_mut().enumerate() {
            let p = *slot.get_mut();
            if !p.is_null() {
                let len = 1usize << (self.base_log as usize + seg);
                unsafe { drop(Box::from_raw(ptr::slice_from_raw_parts_mut(p, len))) };
            }
        }
    }
}

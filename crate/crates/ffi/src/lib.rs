//! C ABI over the `ordset` structures.
//!
//! Every structure is an opaque handle created by a `*_new` function and
//! released by the matching `*_free`. Functions return an [`OrdsetStatus`]:
//! non-negative values are operation outcomes, negative values are errors.
//! Panics never cross the boundary; they surface as `ORDSET_STATUS_PANIC`.
//! All handles may be shared between threads once created.

use ordset::hashmaps::{ConcurrentSet, HashConfig, Variant};
use ordset::queue::{Queue, QueueConfig};
use ordset::skiplist::{Skiplist, SkiplistConfig};
use ordset::{Error, OpStatus};
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

#[repr(i32)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum OrdsetStatus {
    Ok = 0,
    True = 1,
    False = 2,
    Added = 3,
    AlreadyPresent = 4,
    Removed = 5,
    NotFound = 6,
    Empty = 7,
    KeyReserved = -1,
    ValueReserved = -2,
    Domain = -3,
    AllocFailure = -4,
    NullPointer = -5,
    Panic = -6,
    Other = -7,
}

#[repr(i32)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum OrdsetHashVariant {
    Fixed = 0,
    TwoLevel = 1,
    Spo = 2,
    TwoLevelSpo = 3,
}

/// Opaque skiplist handle.
pub struct OrdsetSkiplist(Skiplist);

/// Opaque queue handle.
pub struct OrdsetQueue(Queue);

/// Opaque hash set handle.
pub struct OrdsetHashSet(Box<dyn ConcurrentSet>);

impl From<OpStatus> for OrdsetStatus {
    fn from(s: OpStatus) -> Self {
        match s {
            OpStatus::True => OrdsetStatus::True,
            OpStatus::False => OrdsetStatus::False,
            OpStatus::Added => OrdsetStatus::Added,
            OpStatus::AlreadyPresent => OrdsetStatus::AlreadyPresent,
            OpStatus::Removed => OrdsetStatus::Removed,
            OpStatus::NotFound => OrdsetStatus::NotFound,
            OpStatus::Empty => OrdsetStatus::Empty,
            OpStatus::Retry => OrdsetStatus::Other,
        }
    }
}

impl From<Error> for OrdsetStatus {
    fn from(e: Error) -> Self {
        match e {
            Error::KeyReserved(_) => OrdsetStatus::KeyReserved,
            Error::ValueReserved(_) => OrdsetStatus::ValueReserved,
            Error::Domain(_) => OrdsetStatus::Domain,
            Error::AllocFailure(_) => OrdsetStatus::AllocFailure,
            _ => OrdsetStatus::Other,
        }
    }
}

fn guarded(f: impl FnOnce() -> Result<OrdsetStatus, Error>) -> OrdsetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(e)) => e.into(),
        Err(_) => OrdsetStatus::Panic,
    }
}

macro_rules! deref {
    ($p:expr) => {
        match unsafe { $p.as_ref() } {
            Some(r) => r,
            None => return OrdsetStatus::NullPointer,
        }
    };
}

unsafe fn publish<T>(out: *mut *mut T, value: T) -> OrdsetStatus {
    if out.is_null() {
        return OrdsetStatus::NullPointer;
    }
    *out = Box::into_raw(Box::new(value));
    OrdsetStatus::Ok
}

impl OrdsetStatus {
    const ALL: [OrdsetStatus; 15] = [
        OrdsetStatus::Ok,
        OrdsetStatus::True,
        OrdsetStatus::False,
        OrdsetStatus::Added,
        OrdsetStatus::AlreadyPresent,
        OrdsetStatus::Removed,
        OrdsetStatus::NotFound,
        OrdsetStatus::Empty,
        OrdsetStatus::KeyReserved,
        OrdsetStatus::ValueReserved,
        OrdsetStatus::Domain,
        OrdsetStatus::AllocFailure,
        OrdsetStatus::NullPointer,
        OrdsetStatus::Panic,
        OrdsetStatus::Other,
    ];
}

/// Static, NUL-terminated description of an `OrdsetStatus` value.
#[no_mangle]
pub extern "C" fn ordset_status_message(status: i32) -> *const c_char {
    let Some(status) = OrdsetStatus::ALL.into_iter().find(|&s| s as i32 == status) else {
        return c"unknown status".as_ptr();
    };
    let s: &'static CStr = match status {
        OrdsetStatus::Ok => c"ok",
        OrdsetStatus::True => c"true",
        OrdsetStatus::False => c"false",
        OrdsetStatus::Added => c"added",
        OrdsetStatus::AlreadyPresent => c"already present",
        OrdsetStatus::Removed => c"removed",
        OrdsetStatus::NotFound => c"not found",
        OrdsetStatus::Empty => c"empty",
        OrdsetStatus::KeyReserved => c"key 2^64-1 is reserved",
        OrdsetStatus::ValueReserved => c"value 2^64-1 is reserved",
        OrdsetStatus::Domain => c"argument out of domain",
        OrdsetStatus::AllocFailure => c"allocation failure",
        OrdsetStatus::NullPointer => c"null pointer",
        OrdsetStatus::Panic => c"internal panic",
        OrdsetStatus::Other => c"unexpected error",
    };
    s.as_ptr()
}

// ---- skiplist ----

/// Creates a skiplist whose arena allocates `block_capacity` nodes per block
/// (0 selects the default).
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ordset_skiplist_new(block_capacity: usize, out: *mut *mut OrdsetSkiplist) -> OrdsetStatus {
    guarded(|| {
        let mut c = SkiplistConfig::default();
        if block_capacity > 0 {
            c.block_capacity = block_capacity;
        }
        Ok(publish(out, OrdsetSkiplist(Skiplist::with_config(c)?)))
    })
}

/// # Safety
/// `s` must come from `ordset_skiplist_new` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ordset_skiplist_free(s: *mut OrdsetSkiplist) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Returns `ADDED` or `ALREADY_PRESENT`.
///
/// # Safety
/// `s` must be a live skiplist handle.
#[no_mangle]
pub unsafe extern "C" fn ordset_skiplist_insert(s: *const OrdsetSkiplist, key: u64) -> OrdsetStatus {
    let s = deref!(s);
    guarded(|| s.0.insert(key).map(Into::into))
}

/// Returns `TRUE` or `FALSE`.
///
/// # Safety
/// `s` must be a live skiplist handle.
#[no_mangle]
pub unsafe extern "C" fn ordset_skiplist_find(s: *const OrdsetSkiplist, key: u64) -> OrdsetStatus {
    let s = deref!(s);
    guarded(|| Ok(s.0.find(key).into()))
}

/// Returns `REMOVED` or `NOT_FOUND`.
///
/// # Safety
/// `s` must be a live skiplist handle.
#[no_mangle]
pub unsafe extern "C" fn ordset_skiplist_remove(s: *const OrdsetSkiplist, key: u64) -> OrdsetStatus {
    let s = deref!(s);
    guarded(|| s.0.remove(key).map(Into::into))
}

/// Copies up to `capacity` keys in `[lo, hi]` into `keys` in ascending order
/// and stores the total number of keys in range in `*count`.
///
/// # Safety
/// `s` must be a live skiplist handle, `keys` valid for `capacity` writes (may
/// be null when `capacity` is 0) and `count` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ordset_skiplist_range(
    s: *const OrdsetSkiplist,
    lo: u64,
    hi: u64,
    keys: *mut u64,
    capacity: usize,
    count: *mut usize,
) -> OrdsetStatus {
    let s = deref!(s);
    if count.is_null() || (keys.is_null() && capacity > 0) {
        return OrdsetStatus::NullPointer;
    }
    guarded(|| {
        let found = s.0.range_scan(lo, hi)?;
        let n = found.len().min(capacity);
        if n > 0 {
            std::ptr::copy_nonoverlapping(found.as_ptr(), keys, n);
        }
        *count = found.len();
        Ok(OrdsetStatus::Ok)
    })
}

/// # Safety
/// `s` must be a live skiplist handle and `len` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ordset_skiplist_len(s: *const OrdsetSkiplist, len: *mut usize) -> OrdsetStatus {
    let s = deref!(s);
    if len.is_null() {
        return OrdsetStatus::NullPointer;
    }
    guarded(|| {
        *len = s.0.len();
        Ok(OrdsetStatus::Ok)
    })
}

/// Structural audit; `TRUE` when no violation was found. Requires that no
/// other thread is mutating the skiplist.
///
/// # Safety
/// `s` must be a live skiplist handle.
#[no_mangle]
pub unsafe extern "C" fn ordset_skiplist_validate(s: *const OrdsetSkiplist) -> OrdsetStatus {
    let s = deref!(s);
    guarded(|| Ok(OpStatus::from_bool(s.0.validate().ok).into()))
}

// ---- queue ----

/// Creates a queue with `block_size` cells per block (0 selects the default).
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ordset_queue_new(block_size: usize, out: *mut *mut OrdsetQueue) -> OrdsetStatus {
    guarded(|| {
        let mut c = QueueConfig::default();
        if block_size > 0 {
            c.block_size = block_size;
        }
        Ok(publish(out, OrdsetQueue(Queue::new(c))))
    })
}

/// # Safety
/// `q` must come from `ordset_queue_new` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ordset_queue_free(q: *mut OrdsetQueue) {
    if !q.is_null() {
        drop(Box::from_raw(q));
    }
}

/// Returns `OK`, or `VALUE_RESERVED` for 2^64-1.
///
/// # Safety
/// `q` must be a live queue handle.
#[no_mangle]
pub unsafe extern "C" fn ordset_queue_push(q: *const OrdsetQueue, value: u64) -> OrdsetStatus {
    let q = deref!(q);
    guarded(|| q.0.push(value).map(|()| OrdsetStatus::Ok))
}

/// Returns `TRUE` with the value in `*value`, or `EMPTY`.
///
/// # Safety
/// `q` must be a live queue handle and `value` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ordset_queue_pop(q: *const OrdsetQueue, value: *mut u64) -> OrdsetStatus {
    let q = deref!(q);
    if value.is_null() {
        return OrdsetStatus::NullPointer;
    }
    guarded(|| {
        Ok(match q.0.pop() {
            Some(v) => {
                *value = v;
                OrdsetStatus::True
            }
            None => OrdsetStatus::Empty,
        })
    })
}

/// # Safety
/// `q` must be a live queue handle and `len` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ordset_queue_len(q: *const OrdsetQueue, len: *mut u64) -> OrdsetStatus {
    let q = deref!(q);
    if len.is_null() {
        return OrdsetStatus::NullPointer;
    }
    *len = q.0.len();
    OrdsetStatus::Ok
}

// ---- hash sets ----

/// Creates a hash set of an `OrdsetHashVariant` with default sizing. Unknown
/// variants give `DOMAIN`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ordset_hashset_new(variant: i32, out: *mut *mut OrdsetHashSet) -> OrdsetStatus {
    guarded(|| {
        let v = match variant {
            x if x == OrdsetHashVariant::Fixed as i32 => Variant::Fixed,
            x if x == OrdsetHashVariant::TwoLevel as i32 => Variant::TwoLevel,
            x if x == OrdsetHashVariant::Spo as i32 => Variant::Spo,
            x if x == OrdsetHashVariant::TwoLevelSpo as i32 => Variant::TwoLevelSpo,
            _ => return Ok(OrdsetStatus::Domain),
        };
        Ok(publish(out, OrdsetHashSet(HashConfig::with_variant(v).build()?)))
    })
}

/// # Safety
/// `h` must come from `ordset_hashset_new` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ordset_hashset_free(h: *mut OrdsetHashSet) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `h` must be a live hash set handle.
#[no_mangle]
pub unsafe extern "C" fn ordset_hashset_insert(h: *const OrdsetHashSet, key: u64) -> OrdsetStatus {
    let h = deref!(h);
    guarded(|| h.0.insert(key).map(Into::into))
}

/// # Safety
/// `h` must be a live hash set handle.
#[no_mangle]
pub unsafe extern "C" fn ordset_hashset_find(h: *const OrdsetHashSet, key: u64) -> OrdsetStatus {
    let h = deref!(h);
    guarded(|| Ok(h.0.find(key).into()))
}

/// # Safety
/// `h` must be a live hash set handle.
#[no_mangle]
pub unsafe extern "C" fn ordset_hashset_remove(h: *const OrdsetHashSet, key: u64) -> OrdsetStatus {
    let h = deref!(h);
    guarded(|| h.0.remove(key).map(Into::into))
}

/// # Safety
/// `h` must be a live hash set handle and `len` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ordset_hashset_len(h: *const OrdsetHashSet, len: *mut usize) -> OrdsetStatus {
    let h = deref!(h);
    if len.is_null() {
        return OrdsetStatus::NullPointer;
    }
    *len = h.0.len();
    OrdsetStatus::Ok
}

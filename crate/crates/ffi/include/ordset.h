#ifndef ORDSET_H
#define ORDSET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

enum OrdsetHashVariant
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  ORDSET_HASH_VARIANT_FIXED = 0,
  ORDSET_HASH_VARIANT_TWO_LEVEL = 1,
  ORDSET_HASH_VARIANT_SPO = 2,
  ORDSET_HASH_VARIANT_TWO_LEVEL_SPO = 3,
};
#ifndef __cplusplus
typedef int32_t OrdsetHashVariant;
#endif // __cplusplus

enum OrdsetStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  ORDSET_STATUS_OK = 0,
  ORDSET_STATUS_TRUE = 1,
  ORDSET_STATUS_FALSE = 2,
  ORDSET_STATUS_ADDED = 3,
  ORDSET_STATUS_ALREADY_PRESENT = 4,
  ORDSET_STATUS_REMOVED = 5,
  ORDSET_STATUS_NOT_FOUND = 6,
  ORDSET_STATUS_EMPTY = 7,
  ORDSET_STATUS_KEY_RESERVED = -1,
  ORDSET_STATUS_VALUE_RESERVED = -2,
  ORDSET_STATUS_DOMAIN = -3,
  ORDSET_STATUS_ALLOC_FAILURE = -4,
  ORDSET_STATUS_NULL_POINTER = -5,
  ORDSET_STATUS_PANIC = -6,
  ORDSET_STATUS_OTHER = -7,
};
#ifndef __cplusplus
typedef int32_t OrdsetStatus;
#endif // __cplusplus

/**
 * Opaque hash set handle.
 */
typedef struct OrdsetHashSet OrdsetHashSet;

/**
 * Opaque queue handle.
 */
typedef struct OrdsetQueue OrdsetQueue;

/**
 * Opaque skiplist handle.
 */
typedef struct OrdsetSkiplist OrdsetSkiplist;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static, NUL-terminated description of an `OrdsetStatus` value.
 */
const char *ordset_status_message(int32_t status);

/**
 * Creates a skiplist whose arena allocates `block_capacity` nodes per block
 * (0 selects the default).
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
OrdsetStatus ordset_skiplist_new(size_t block_capacity, struct OrdsetSkiplist **out);

/**
 * # Safety
 * `s` must come from `ordset_skiplist_new` and not be used afterwards. Null is ignored.
 */
void ordset_skiplist_free(struct OrdsetSkiplist *s);

/**
 * Returns `ADDED` or `ALREADY_PRESENT`.
 *
 * # Safety
 * `s` must be a live skiplist handle.
 */
OrdsetStatus ordset_skiplist_insert(const struct OrdsetSkiplist *s, uint64_t key);

/**
 * Returns `TRUE` or `FALSE`.
 *
 * # Safety
 * `s` must be a live skiplist handle.
 */
OrdsetStatus ordset_skiplist_find(const struct OrdsetSkiplist *s, uint64_t key);

/**
 * Returns `REMOVED` or `NOT_FOUND`.
 *
 * # Safety
 * `s` must be a live skiplist handle.
 */
OrdsetStatus ordset_skiplist_remove(const struct OrdsetSkiplist *s, uint64_t key);

/**
 * Copies up to `capacity` keys in `[lo, hi]` into `keys` in ascending order
 * and stores the total number of keys in range in `*count`.
 *
 * # Safety
 * `s` must be a live skiplist handle, `keys` valid for `capacity` writes (may
 * be null when `capacity` is 0) and `count` valid for a write.
 */
OrdsetStatus ordset_skiplist_range(const struct OrdsetSkiplist *s,
                                   uint64_t lo,
                                   uint64_t hi,
                                   uint64_t *keys,
                                   size_t capacity,
                                   size_t *count);

/**
 * # Safety
 * `s` must be a live skiplist handle and `len` valid for a write.
 */
OrdsetStatus ordset_skiplist_len(const struct OrdsetSkiplist *s, size_t *len);

/**
 * Structural audit; `TRUE` when no violation was found. Requires that no
 * other thread is mutating the skiplist.
 *
 * # Safety
 * `s` must be a live skiplist handle.
 */
OrdsetStatus ordset_skiplist_validate(const struct OrdsetSkiplist *s);

/**
 * Creates a queue with `block_size` cells per block (0 selects the default).
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
OrdsetStatus ordset_queue_new(size_t block_size, struct OrdsetQueue **out);

/**
 * # Safety
 * `q` must come from `ordset_queue_new` and not be used afterwards. Null is ignored.
 */
void ordset_queue_free(struct OrdsetQueue *q);

/**
 * Returns `OK`, or `VALUE_RESERVED` for 2^64-1.
 *
 * # Safety
 * `q` must be a live queue handle.
 */
OrdsetStatus ordset_queue_push(const struct OrdsetQueue *q, uint64_t value);

/**
 * Returns `TRUE` with the value in `*value`, or `EMPTY`.
 *
 * # Safety
 * `q` must be a live queue handle and `value` valid for a write.
 */
OrdsetStatus ordset_queue_pop(const struct OrdsetQueue *q, uint64_t *value);

/**
 * # Safety
 * `q` must be a live queue handle and `len` valid for a write.
 */
OrdsetStatus ordset_queue_len(const struct OrdsetQueue *q, uint64_t *len);

/**
 * Creates a hash set of an `OrdsetHashVariant` with default sizing. Unknown
 * variants give `DOMAIN`.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
OrdsetStatus ordset_hashset_new(int32_t variant, struct OrdsetHashSet **out);

/**
 * # Safety
 * `h` must come from `ordset_hashset_new` and not be used afterwards. Null is ignored.
 */
void ordset_hashset_free(struct OrdsetHashSet *h);

/**
 * # Safety
 * `h` must be a live hash set handle.
 */
OrdsetStatus ordset_hashset_insert(const struct OrdsetHashSet *h, uint64_t key);

/**
 * # Safety
 * `h` must be a live hash set handle.
 */
OrdsetStatus ordset_hashset_find(const struct OrdsetHashSet *h, uint64_t key);

/**
 * # Safety
 * `h` must be a live hash set handle.
 */
OrdsetStatus ordset_hashset_remove(const struct OrdsetHashSet *h, uint64_t key);

/**
 * # Safety
 * `h` must be a live hash set handle and `len` valid for a write.
 */
OrdsetStatus ordset_hashset_len(const struct OrdsetHashSet *h, size_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ORDSET_H */

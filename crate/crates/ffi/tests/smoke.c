#include <stdio.h>
#include "ordset.h"

#define CHECK(expr, want)                                                          \
    do {                                                                           \
        OrdsetStatus got_ = (expr);                                                \
        if (got_ != (want)) {                                                      \
            fprintf(stderr, "%s: %s\n", #expr, ordset_status_message(got_));       \
            return 1;                                                              \
        }                                                                          \
    } while (0)

int main(void) {
    OrdsetSkiplist *s = NULL;
    CHECK(ordset_skiplist_new(0, &s), ORDSET_STATUS_OK);
    CHECK(ordset_skiplist_insert(s, 7), ORDSET_STATUS_ADDED);
    CHECK(ordset_skiplist_insert(s, 3), ORDSET_STATUS_ADDED);
    CHECK(ordset_skiplist_insert(s, 11), ORDSET_STATUS_ADDED);
    CHECK(ordset_skiplist_insert(s, UINT64_MAX), ORDSET_STATUS_KEY_RESERVED);
    CHECK(ordset_skiplist_find(s, 3), ORDSET_STATUS_TRUE);

    size_t len = 0;
    CHECK(ordset_skiplist_len(s, &len), ORDSET_STATUS_OK);
    ordset_skiplist_free(s);

    OrdsetQueue *q = NULL;
    uint64_t v = 0;
    CHECK(ordset_queue_new(0, &q), ORDSET_STATUS_OK);
    CHECK(ordset_queue_push(q, 5), ORDSET_STATUS_OK);
    CHECK(ordset_queue_pop(q, &v), ORDSET_STATUS_TRUE);
    CHECK(ordset_queue_pop(q, &v), ORDSET_STATUS_EMPTY);
    ordset_queue_free(q);

    OrdsetHashSet *h = NULL;
    CHECK(ordset_hashset_new(ORDSET_HASH_VARIANT_SPO, &h), ORDSET_STATUS_OK);
    CHECK(ordset_hashset_insert(h, 99), ORDSET_STATUS_ADDED);
    CHECK(ordset_hashset_find(h, 99), ORDSET_STATUS_TRUE);
    ordset_hashset_free(h);

    printf("ok %zu\n", len);
    return 0;
}

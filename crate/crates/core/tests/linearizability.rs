//! Recorded concurrent histories on the queue and every hash table variant.

use ordset::bench::linearizability::*;
use ordset::hashmaps::{HashConfig, Variant};
use ordset::queue::Queue;
use ordset::ConcurrentSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[test]
fn queue_histories() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..2_000 {
        let threads = rng.gen_range(2..=4);
        let per_thread = rng.gen_range(1..=6);
        let ops = random_queue_ops(&mut rng, threads, per_thread);
        let h = record_queue_history(Arc::new(Queue::with_block_size(rng.gen_range(1..=3))), ops).unwrap();
        assert_eq!(check_linearizable(&h, Semantics::Fifo).unwrap(), Verdict::Ok, "history {i}: {h:?}");
    }
}

#[test]
fn hash_table_histories() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for v in Variant::ALL {
        // Tiny tables so that expansions, shrinks and resizes happen mid-history.
        let c = HashConfig {
            variant: v,
            slots: 2,
            second_slots: 2,
            expand_threshold: 1,
            seed_slots: 1,
            max_collisions: 1,
            first_level_tables: 2,
            sub_seed_slots: 1,
            ..HashConfig::default()
        };
        for i in 0..500 {
            let threads = rng.gen_range(2..=4);
            let per_thread = rng.gen_range(1..=6);
            let ops = random_set_ops(&mut rng, threads, per_thread, 8);
            let set: Arc<dyn ConcurrentSet> = Arc::from(c.build().unwrap());
            let h = record_set_history(set, ops).unwrap();
            assert_eq!(check_linearizable(&h, Semantics::Set).unwrap(), Verdict::Ok, "{} history {i}: {h:?}", v.name());
        }
    }
}

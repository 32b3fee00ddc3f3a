use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

fn assert_valid(s: &Skiplist) {
    let r = s.validate();
    assert!(r.ok, "{r}");
}

#[test]
fn empty_list() {
    let s = Skiplist::new();
    assert_eq!(s.find(5), OpStatus::False);
    assert_eq!(s.remove(5).unwrap(), OpStatus::NotFound);
    assert_eq!(s.range_scan(0, 100).unwrap(), Vec::<Key>::new());
    assert!(s.is_empty());
    assert_valid(&s);
}

#[test]
fn insert_find_remove() {
    let s = Skiplist::new();
    assert_eq!(s.insert(5).unwrap(), OpStatus::Added);
    assert_eq!(s.insert(5).unwrap(), OpStatus::AlreadyPresent);
    assert_eq!(s.find(5), OpStatus::True);
    assert_eq!(s.range_scan(0, 10).unwrap(), vec![5]);
    assert_eq!(s.remove(5).unwrap(), OpStatus::Removed);
    assert_eq!(s.find(5), OpStatus::False);
    assert_valid(&s);
}

#[test]
fn reserved_key_rejected() {
    let s = Skiplist::new();
    assert!(matches!(s.insert(RESERVED_KEY), Err(Error::KeyReserved(_))));
    assert!(matches!(s.remove(RESERVED_KEY), Err(Error::KeyReserved(_))));
    assert_eq!(s.find(RESERVED_KEY), OpStatus::False);
}

#[test]
fn range_scan_bounds() {
    let s = Skiplist::new();
    for k in [1, 3, 5, 7] {
        s.insert(k).unwrap();
    }
    assert_eq!(s.range_scan(2, 6).unwrap(), vec![3, 5]);
    assert_eq!(s.range_scan(7, 7).unwrap(), vec![7]);
    assert!(matches!(s.range_scan(6, 2), Err(Error::Domain(_))));
}

#[test]
fn ascending_inserts_grow_depth() {
    let s = Skiplist::new();
    for k in 1..=6 {
        s.insert(k).unwrap();
    }
    assert!(s.depth() >= 2);
    let r = s.validate();
    assert!(r.ok, "{r}");
    assert!(r.arity.iter().enumerate().all(|(k, &n)| n == 0 || (2..=5).contains(&k)));
}

#[test]
fn satellite_values_survive_copies() {
    let s = Skiplist::new();
    // Descending inserts always land in front of the first child.
    for k in (1..=200).rev() {
        s.insert_with_value(k, k * 10).unwrap();
    }
    for k in 1..=200 {
        assert_eq!(s.get(k), Some(k * 10));
    }
    // Removing ascending unlinks first children by absorbing their successor.
    for k in 1..=150 {
        s.remove(k).unwrap();
    }
    for k in 151..=200 {
        assert_eq!(s.get(k), Some(k * 10), "key {k}");
    }
    assert_eq!(s.get(3), None);
    assert_valid(&s);
}

#[test]
fn depth_returns_to_minimum() {
    let s = Skiplist::new();
    for k in 0..500 {
        s.insert(k * 7).unwrap();
    }
    assert!(s.depth() >= 4);
    for k in 1..500 {
        s.remove(k * 7).unwrap();
        if k % 50 == 0 {
            assert_valid(&s);
        }
    }
    // One more removal pass from the head collapses single-child roots.
    s.remove(1).unwrap();
    assert_eq!(s.depth(), 1);
    assert_eq!(s.range_scan(0, u64::MAX - 1).unwrap(), vec![0]);
    assert_valid(&s);
}

#[test]
fn depth_adjustments_are_noops_when_not_needed() {
    let s = Skiplist::new();
    s.increase_depth().unwrap();
    s.decrease_depth();
    assert_eq!(s.depth(), 1);
    assert_valid(&s);
}

#[test]
fn random_set_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = Skiplist::new();
    let mut oracle = BTreeSet::new();
    for _ in 0..1_000 {
        let k = rng.gen::<u64>() >> 1;
        assert_eq!(s.insert(k).unwrap() == OpStatus::Added, oracle.insert(k));
    }
    let present: Vec<Key> = oracle.iter().copied().collect();
    for i in 0..1_000 {
        let k = if i % 2 == 0 { present[rng.gen_range(0..present.len())] } else { rng.gen::<u64>() >> 1 };
        assert_eq!(s.contains(k), oracle.contains(&k));
    }
    for _ in 0..100 {
        let (a, b) = (rng.gen::<u64>() >> 1, rng.gen::<u64>() >> 1);
        let (lo, hi) = (a.min(b), a.max(b));
        let want: Vec<Key> = oracle.range(lo..=hi).copied().collect();
        assert_eq!(s.range_scan(lo, hi).unwrap(), want);
    }
    assert_valid(&s);
}

#[test]
fn mixed_trace_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = Skiplist::new();
    let mut oracle = BTreeSet::new();
    for step in 0..10_000 {
        let k = rng.gen_range(0..512u64);
        if rng.gen_bool(0.5) {
            assert_eq!(s.insert(k).unwrap() == OpStatus::Added, oracle.insert(k), "step {step}");
        } else {
            assert_eq!(s.remove(k).unwrap() == OpStatus::Removed, oracle.remove(&k), "step {step}");
        }
        assert_eq!(s.contains(k), oracle.contains(&k));
        if step % 1_000 == 0 {
            assert_valid(&s);
        }
    }
    assert_eq!(s.range_scan(0, 1024).unwrap(), oracle.iter().copied().collect::<Vec<_>>());
    assert_valid(&s);
}

#[test]
fn six_children_reported() {
    let s = Skiplist::new();
    for k in 0..200 {
        s.insert(k).unwrap();
    }
    assert_valid(&s);
    // Fold right siblings into the first level-1 node until it has 6+ children.
    let head_child = s.node(s.head).bottom();
    let mut n = head_child;
    while !s.is_terminal(s.node(n).bottom()) {
        n = s.node(n).bottom();
    }
    while s.children(n).len() < 6 {
        let next = s.node(n).next();
        s.node(n).keynext.store(s.node(next).kn());
    }
    let r = s.validate();
    assert!(!r.ok);
    assert!(r.count(ViolationKind::Arity) >= 1, "{r}");
}

#[test]
fn lock_footprint_and_lock_free_find() {
    let s = Skiplist::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    lock_stats::reset();
    for _ in 0..5_000 {
        s.insert(rng.gen_range(0..10_000)).unwrap();
    }
    assert!(lock_stats::peak() <= 6, "insert held {} locks", lock_stats::peak());
    lock_stats::reset();
    for _ in 0..5_000 {
        s.remove(rng.gen_range(0..10_000)).unwrap();
    }
    assert!(lock_stats::peak() <= 12, "remove held {} locks", lock_stats::peak());
    lock_stats::reset();
    for k in 0..5_000 {
        s.contains(k);
        s.range_scan(k, k + 10).unwrap();
    }
    assert_eq!(lock_stats::total(), 0);
    assert_eq!(lock_stats::held(), 0);
}

#[test]
fn concurrent_disjoint_and_shared_keys() {
    let s = Arc::new(Skiplist::new());
    let threads: Vec<_> = (0..8u64)
        .map(|t| {
            let s = s.clone();
            std::thread::spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(t);
                for i in 0..20_000u64 {
                    // Own keys: inserted and kept.
                    s.insert(i * 8 + t).unwrap();
                    // Shared keys: contended churn.
                    let k = 1_000_000 + rng.gen_range(0..256);
                    if rng.gen_bool(0.5) {
                        s.insert(k).unwrap();
                    } else {
                        s.remove(k).unwrap();
                    }
                    assert!(s.contains(i * 8 + t));
                }
            })
        })
        .collect();
    for t in threads {
        t.join().unwrap();
    }
    assert_valid(&s);
    for k in 0..160_000 {
        assert!(s.contains(k), "lost key {k}");
    }
}

#[test]
fn wider_nodes() {
    assert!(Skiplist::with_config(SkiplistConfig { max_children: 4, ..Default::default() }).is_err());
    assert!(Skiplist::with_config(SkiplistConfig { max_children: 9, ..Default::default() }).is_err());
    let s = Skiplist::with_config(SkiplistConfig { max_children: 6, ..Default::default() }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut oracle = BTreeSet::new();
    for _ in 0..20_000 {
        let k = rng.gen_range(0..2_000u64);
        if rng.gen_bool(0.6) {
            assert_eq!(s.insert(k).unwrap() == OpStatus::Added, oracle.insert(k));
        } else {
            assert_eq!(s.remove(k).unwrap() == OpStatus::Removed, oracle.remove(&k));
        }
    }
    let r = s.validate();
    assert!(r.ok, "{r}");
    assert!(r.arity.len() <= 7 && r.arity[6] > 0, "{:?}", r.arity);
    assert_eq!(s.range_scan(0, 2_000).unwrap(), oracle.into_iter().collect::<Vec<_>>());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_sequence_keeps_invariants(ops in proptest::collection::vec((any::<bool>(), 0u64..64), 0..400)) {
        let s = Skiplist::new();
        let mut oracle = BTreeSet::new();
        for (add, k) in ops {
            if add {
                prop_assert_eq!(s.insert(k).unwrap() == OpStatus::Added, oracle.insert(k));
            } else {
                prop_assert_eq!(s.remove(k).unwrap() == OpStatus::Removed, oracle.remove(&k));
            }
        }
        let r = s.validate();
        prop_assert!(r.ok, "{}", r);
        prop_assert_eq!(r.keys, oracle.len());
        prop_assert_eq!(s.range_scan(0, 64).unwrap(), oracle.into_iter().collect::<Vec<_>>());
    }
}

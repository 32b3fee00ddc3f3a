//! Exhaustive linearizability checking for small histories.
//!
//! The search linearizes one completed operation at a time, choosing only
//! operations invoked before every pending operation's response, and memoizes
//! `(linearized set, model state)` pairs already shown to be dead ends.

use crate::error::{Error, Result};
use crate::hashmaps::ConcurrentSet;
use crate::primitives::{Key, OpStatus};
use crate::queue::Queue;
use crate::shard::OpKind;
use rand::Rng;
use std::collections::{BTreeSet, HashSet, VecDeque};
use std::sync::{Arc, Barrier};
use std::time::Instant;

/// Largest history the checker accepts.
pub const MAX_EVENTS: usize = 64;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub thread: usize,
    pub kind: OpKind,
    pub arg: Key,
    /// Nanoseconds since the recording began.
    pub invoke: u64,
    pub response: u64,
    pub status: OpStatus,
    /// Value returned by a pop.
    pub value: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct History {
    pub events: Vec<Event>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Semantics {
    Set,
    Fifo,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    Violation,
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Model {
    Set(BTreeSet<Key>),
    Fifo(VecDeque<u64>),
}

impl Model {
    /// The model after `e`, if `e`'s observed result is legal here.
    fn step(&self, e: &Event) -> Option<Model> {
        match self {
            Model::Set(s) => {
                let present = s.contains(&e.arg);
                let (want, next) = match e.kind {
                    OpKind::Add if present => (OpStatus::AlreadyPresent, None),
                    OpKind::Add => (OpStatus::Added, Some(true)),
                    OpKind::Find => (OpStatus::from_bool(present), None),
                    OpKind::Del if present => (OpStatus::Removed, Some(false)),
                    OpKind::Del => (OpStatus::NotFound, None),
                    OpKind::Push | OpKind::Pop => return None,
                };
                if e.status != want {
                    return None;
                }
                let mut s = s.clone();
                match next {
                    Some(true) => s.insert(e.arg),
                    Some(false) => s.remove(&e.arg),
                    None => false,
                };
                Some(Model::Set(s))
            }
            Model::Fifo(q) => {
                let mut q = q.clone();
                match e.kind {
                    OpKind::Push => q.push_back(e.arg),
                    OpKind::Pop => {
                        if q.pop_front() != e.value {
                            return None;
                        }
                    }
                    _ => return None,
                }
                Some(Model::Fifo(q))
            }
        }
    }
}

struct Search<'a> {
    events: &'a [Event],
    dead: HashSet<(u64, Model)>,
}

impl Search<'_> {
    fn explore(&mut self, done: u64, model: Model) -> bool {
        let all = if self.events.len() == 64 { u64::MAX } else { (1u64 << self.events.len()) - 1 };
        if done == all {
            return true;
        }
        if self.dead.contains(&(done, model.clone())) {
            return false;
        }
        let horizon = (0..self.events.len())
            .filter(|&i| done & (1 << i) == 0)
            .map(|i| self.events[i].response)
            .min()
            .expect("an operation remains");
        for i in 0..self.events.len() {
            let e = &self.events[i];
            if done & (1 << i) != 0 || e.invoke > horizon {
                continue;
            }
            if let Some(next) = model.step(e) {
                if self.explore(done | (1 << i), next) {
                    return true;
                }
            }
        }
        self.dead.insert((done, model));
        false
    }
}

/// Whether some order of `h`'s operations respecting real time explains every
/// observed result under `semantics`, starting from an empty structure.
pub fn check_linearizable(h: &History, semantics: Semantics) -> Result<Verdict> {
    if h.events.len() > MAX_EVENTS {
        return Err(Error::Size { ops: h.events.len(), max: MAX_EVENTS });
    }
    let model = match semantics {
        Semantics::Set => Model::Set(BTreeSet::new()),
        Semantics::Fifo => Model::Fifo(VecDeque::new()),
    };
    let mut search = Search { events: &h.events, dead: HashSet::new() };
    Ok(if search.explore(0, model) { Verdict::Ok } else { Verdict::Violation })
}

fn merge(logs: Vec<Vec<Event>>) -> History {
    let mut events: Vec<Event> = logs.into_iter().flatten().collect();
    events.sort_by_key(|e| (e.invoke, e.thread));
    History { events }
}

/// Runs `ops[t]` on thread `t` against `set`, all threads released together,
/// and records the history.
pub fn record_set_history<S>(set: Arc<S>, ops: Vec<Vec<(OpKind, Key)>>) -> Result<History>
where
    S: ConcurrentSet + ?Sized + 'static,
{
    let barrier = Arc::new(Barrier::new(ops.len()));
    let base = Instant::now();
    let handles: Vec<_> = ops
        .into_iter()
        .enumerate()
        .map(|(thread, mine)| {
            let (set, barrier) = (set.clone(), barrier.clone());
            std::thread::spawn(move || -> Result<Vec<Event>> {
                barrier.wait();
                let mut log = Vec::with_capacity(mine.len());
                for (kind, arg) in mine {
                    let invoke = base.elapsed().as_nanos() as u64;
                    let status = match kind {
                        OpKind::Add => set.insert(arg)?,
                        OpKind::Find => set.find(arg),
                        OpKind::Del => set.remove(arg)?,
                        OpKind::Push | OpKind::Pop => return Err(crate::error::domain("queue op on a set")),
                    };
                    let response = base.elapsed().as_nanos() as u64;
                    log.push(Event { thread, kind, arg, invoke, response, status, value: None });
                }
                Ok(log)
            })
        })
        .collect();
    let logs = handles.into_iter().map(|h| h.join().expect("recording thread panicked")).collect::<Result<_>>()?;
    Ok(merge(logs))
}

/// Queue counterpart of [`record_set_history`]; push arguments are the values.
pub fn record_queue_history(queue: Arc<Queue>, ops: Vec<Vec<(OpKind, u64)>>) -> Result<History> {
    let barrier = Arc::new(Barrier::new(ops.len()));
    let base = Instant::now();
    let handles: Vec<_> = ops
        .into_iter()
        .enumerate()
        .map(|(thread, mine)| {
            let (queue, barrier) = (queue.clone(), barrier.clone());
            std::thread::spawn(move || -> Result<Vec<Event>> {
                barrier.wait();
                let mut log = Vec::with_capacity(mine.len());
                for (kind, arg) in mine {
                    let invoke = base.elapsed().as_nanos() as u64;
                    let (status, value) = match kind {
                        OpKind::Push => (queue.push(arg).map(|()| OpStatus::Added)?, None),
                        OpKind::Pop => match queue.pop() {
                            Some(v) => (OpStatus::True, Some(v)),
                            None => (OpStatus::Empty, None),
                        },
                        _ => return Err(crate::error::domain("set op on a queue")),
                    };
                    let response = base.elapsed().as_nanos() as u64;
                    log.push(Event { thread, kind, arg, invoke, response, status, value });
                }
                Ok(log)
            })
        })
        .collect();
    let logs = handles.into_iter().map(|h| h.join().expect("recording thread panicked")).collect::<Result<_>>()?;
    Ok(merge(logs))
}

/// Per-thread random set operations over keys `0..key_range`.
pub fn random_set_ops<R: Rng>(rng: &mut R, threads: usize, per_thread: usize, key_range: u64) -> Vec<Vec<(OpKind, Key)>> {
    (0..threads)
        .map(|_| {
            (0..per_thread)
                .map(|_| {
                    let kind = [OpKind::Add, OpKind::Find, OpKind::Del][rng.gen_range(0..3)];
                    (kind, rng.gen_range(0..key_range))
                })
                .collect()
        })
        .collect()
}

/// Per-thread random queue operations; pushed values are unique.
pub fn random_queue_ops<R: Rng>(rng: &mut R, threads: usize, per_thread: usize) -> Vec<Vec<(OpKind, u64)>> {
    (0..threads)
        .map(|t| {
            (0..per_thread)
                .map(|i| {
                    if rng.gen_bool(0.5) {
                        (OpKind::Push, (t * per_thread + i) as u64)
                    } else {
                        (OpKind::Pop, 0)
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skiplist::Skiplist;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ev(thread: usize, kind: OpKind, arg: u64, invoke: u64, response: u64, status: OpStatus) -> Event {
        Event { thread, kind, arg, invoke, response, status, value: None }
    }

    fn pop(thread: usize, invoke: u64, response: u64, value: Option<u64>) -> Event {
        let status = if value.is_some() { OpStatus::True } else { OpStatus::Empty };
        Event { thread, kind: OpKind::Pop, arg: 0, invoke, response, status, value }
    }

    #[test]
    fn sequential_set_history() {
        let h = History {
            events: vec![
                ev(0, OpKind::Add, 1, 0, 1, OpStatus::Added),
                ev(0, OpKind::Find, 1, 2, 3, OpStatus::True),
                ev(0, OpKind::Del, 1, 4, 5, OpStatus::Removed),
                ev(0, OpKind::Find, 1, 6, 7, OpStatus::False),
            ],
        };
        assert_eq!(check_linearizable(&h, Semantics::Set).unwrap(), Verdict::Ok);
    }

    #[test]
    fn overlap_allows_reordering() {
        // The find overlaps the add, so it may see the key.
        let h = History {
            events: vec![ev(0, OpKind::Add, 1, 0, 10, OpStatus::Added), ev(1, OpKind::Find, 1, 5, 6, OpStatus::True)],
        };
        assert_eq!(check_linearizable(&h, Semantics::Set).unwrap(), Verdict::Ok);
        // Without overlap it may not.
        let h = History {
            events: vec![ev(1, OpKind::Find, 1, 0, 1, OpStatus::True), ev(0, OpKind::Add, 1, 2, 3, OpStatus::Added)],
        };
        assert_eq!(check_linearizable(&h, Semantics::Set).unwrap(), Verdict::Violation);
    }

    #[test]
    fn pop_of_unpushed_value_is_a_violation() {
        let h = History { events: vec![ev(0, OpKind::Push, 1, 0, 1, OpStatus::Added), pop(1, 2, 3, Some(2))] };
        assert_eq!(check_linearizable(&h, Semantics::Fifo).unwrap(), Verdict::Violation);
    }

    #[test]
    fn fifo_order_enforced() {
        let mut h = History {
            events: vec![
                ev(0, OpKind::Push, 1, 0, 1, OpStatus::Added),
                ev(0, OpKind::Push, 2, 2, 3, OpStatus::Added),
                pop(1, 4, 5, Some(2)),
            ],
        };
        assert_eq!(check_linearizable(&h, Semantics::Fifo).unwrap(), Verdict::Violation);
        h.events[2].value = Some(1);
        assert_eq!(check_linearizable(&h, Semantics::Fifo).unwrap(), Verdict::Ok);
        h.events.push(pop(1, 6, 7, None));
        assert_eq!(check_linearizable(&h, Semantics::Fifo).unwrap(), Verdict::Violation);
    }

    #[test]
    fn too_many_events() {
        let h = History { events: vec![ev(0, OpKind::Find, 0, 0, 1, OpStatus::False); MAX_EVENTS + 1] };
        assert!(matches!(check_linearizable(&h, Semantics::Set), Err(Error::Size { .. })));
    }

    // Replays a random sequential execution, then widens every interval so
    // that operations overlap: the true order stays a witness.
    fn synthesized(rng: &mut ChaCha8Rng, inject: bool) -> History {
        let mut model = BTreeSet::new();
        let mut events = Vec::new();
        for i in 0..12u64 {
            let key = rng.gen_range(0..3);
            let kind = [OpKind::Add, OpKind::Find, OpKind::Del][rng.gen_range(0..3)];
            let status = match kind {
                OpKind::Add => if model.insert(key) { OpStatus::Added } else { OpStatus::AlreadyPresent },
                OpKind::Find => OpStatus::from_bool(model.contains(&key)),
                _ => if model.remove(&key) { OpStatus::Removed } else { OpStatus::NotFound },
            };
            let stretch = rng.gen_range(0..30);
            events.push(ev((i % 4) as usize, kind, key, i * 10, i * 10 + 5 + stretch, status));
        }
        if inject {
            // A find of a never-inserted key that claims success.
            events.push(ev(4, OpKind::Find, 99, 0, 500, OpStatus::True));
        }
        History { events }
    }

    #[test]
    fn soundness_both_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let ok = synthesized(&mut rng, false);
            assert_eq!(check_linearizable(&ok, Semantics::Set).unwrap(), Verdict::Ok);
            let bad = synthesized(&mut rng, true);
            assert_eq!(check_linearizable(&bad, Semantics::Set).unwrap(), Verdict::Violation);
        }
    }

    #[test]
    fn recorded_histories_check_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let set = Arc::new(Skiplist::new());
            let h = record_set_history(set, random_set_ops(&mut rng, 3, 5, 4)).unwrap();
            assert_eq!(check_linearizable(&h, Semantics::Set).unwrap(), Verdict::Ok, "{h:?}");
            let q = Arc::new(Queue::with_block_size(2));
            let h = record_queue_history(q, random_queue_ops(&mut rng, 3, 5)).unwrap();
            assert_eq!(check_linearizable(&h, Semantics::Fifo).unwrap(), Verdict::Ok, "{h:?}");
        }
    }
}

//! Key partitioning across independent structure instances.
//!
//! A [`ShardPlan`] groups worker threads into logical CPU groups, assigns each
//! shard to a group, and routes every operation to a random worker of the group
//! owning the key's shard. [`run_pipeline`] first distributes a whole workload
//! into per-worker queues and then lets every worker drain its own queue.

use crate::error::{domain, Error, Result};
use crate::hashmaps::ConcurrentSet;
use crate::primitives::{Key, OpStatus};
use crate::queue::Queue;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Barrier};
use std::time::{Duration, Instant};

pub const DEFAULT_CPUS_PER_GROUP: usize = 16;
pub const DEFAULT_SHARDS: usize = 8;
pub const CPUS_PER_GROUP_ENV: &str = "ORDSET_CPUS_PER_GROUP";

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Add,
    Find,
    Del,
    Push,
    Pop,
}

impl OpKind {
    pub const ALL: [OpKind; 5] = [OpKind::Add, OpKind::Find, OpKind::Del, OpKind::Push, OpKind::Pop];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Op {
    pub kind: OpKind,
    pub key: Key,
}

/// Where a routed operation is queued.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum QueueTarget {
    /// A random worker of the group that owns the key's shard.
    #[default]
    ShardGroup,
    /// A random worker of the routing thread's own group.
    LocalGroup,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct RoutedOp {
    pub op: Op,
    pub shard: usize,
    pub target_queue: usize,
}

/// `n_cpu` from the environment, falling back to 16.
pub fn cpus_per_group_from_env() -> usize {
    std::env::var(CPUS_PER_GROUP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or(DEFAULT_CPUS_PER_GROUP)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShardPlan {
    pub threads: usize,
    pub cpus_per_group: usize,
    /// Groups with at least one worker: `ceil(threads / cpus_per_group)`.
    pub groups_in_use: usize,
    pub shard_count: usize,
    /// `assignment[s]` is the group that drains shard `s`.
    pub assignment: Vec<usize>,
    /// `pinning[t]` is the CPU worker `t` asks to run on.
    pub pinning: Vec<usize>,
    pub target: QueueTarget,
    shard_bits: u32,
    workers_by_group: Vec<Vec<usize>>,
}

pub fn plan_shards(threads: usize, cpus_per_group: usize, shard_count: usize) -> Result<ShardPlan> {
    if threads == 0 || cpus_per_group == 0 {
        return Err(domain("thread count and CPUs per group must be at least 1"));
    }
    if !shard_count.is_power_of_two() {
        return Err(domain(format!("shard count {shard_count} is not a power of two")));
    }
    let groups_in_use = threads.div_ceil(cpus_per_group);
    let mut workers_by_group = vec![Vec::new(); groups_in_use];
    for t in 0..threads {
        workers_by_group[t / cpus_per_group].push(t);
    }
    Ok(ShardPlan {
        threads,
        cpus_per_group,
        groups_in_use,
        shard_count,
        assignment: (0..shard_count).map(|s| s % groups_in_use).collect(),
        pinning: (0..threads).collect(),
        target: QueueTarget::ShardGroup,
        shard_bits: shard_count.trailing_zeros(),
        workers_by_group,
    })
}

impl ShardPlan {
    /// Bits of the key consumed by routing.
    pub fn shard_bits(&self) -> u32 {
        self.shard_bits
    }

    #[inline]
    pub fn shard_of(&self, key: Key) -> usize {
        if self.shard_bits == 0 {
            0
        } else {
            (key >> (64 - self.shard_bits)) as usize
        }
    }

    pub fn group_of_worker(&self, worker: usize) -> usize {
        worker / self.cpus_per_group
    }

    pub fn workers_in_group(&self, group: usize) -> &[usize] {
        &self.workers_by_group[group]
    }

    /// Routes `op` issued by worker `from`.
    pub fn route<R: Rng + ?Sized>(&self, op: Op, from: usize, rng: &mut R) -> RoutedOp {
        let shard = self.shard_of(op.key);
        let group = match self.target {
            QueueTarget::ShardGroup => self.assignment[shard],
            QueueTarget::LocalGroup => self.group_of_worker(from),
        };
        let workers = &self.workers_by_group[group];
        let target_queue = workers[rng.gen_range(0..workers.len())];
        RoutedOp { op, shard, target_queue }
    }
}

/// Deterministic per-worker generator derived from a run seed.
pub fn worker_rng(seed: u64, worker: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker as u64);
    rng
}

/// Asks the OS to keep the calling thread on `cpu` (modulo the host's CPU
/// count). Returns whether the request was accepted.
pub fn pin_current_thread(cpu: usize) -> bool {
    #[cfg(target_os = "linux")]
    {
        let host = std::thread::available_parallelism().map_or(1, |n| n.get());
        // SAFETY: `set` is a plain bitmask owned by this frame.
        unsafe {
            let mut set: libc::cpu_set_t = std::mem::zeroed();
            libc::CPU_SET(cpu % host, &mut set);
            libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
        }
    }
    #[cfg(not(target_os = "linux"))]
    {
        let _ = cpu;
        false
    }
}

/// A per-shard structure the pipeline can apply operations to.
pub trait ShardTarget: Send + Sync {
    fn apply(&self, op: Op) -> Result<OpStatus>;
}

impl<T: ConcurrentSet + ?Sized> ShardTarget for T {
    fn apply(&self, op: Op) -> Result<OpStatus> {
        match op.kind {
            OpKind::Add => self.insert(op.key),
            OpKind::Find => Ok(self.find(op.key)),
            OpKind::Del => self.remove(op.key),
            OpKind::Push | OpKind::Pop => Err(domain(format!("{:?} is not a set operation", op.kind))),
        }
    }
}

impl ShardTarget for Queue {
    fn apply(&self, op: Op) -> Result<OpStatus> {
        match op.kind {
            OpKind::Push => self.push(op.key).map(|()| OpStatus::Added),
            OpKind::Pop => Ok(self.pop().map_or(OpStatus::Empty, |_| OpStatus::True)),
            _ => Err(domain(format!("{:?} is not a queue operation", op.kind))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineReport {
    pub fill: Duration,
    pub drain: Duration,
    pub total: Duration,
    /// Operations queued per [`OpKind`].
    pub enqueued: [u64; 5],
    /// Operations applied per [`OpKind`].
    pub applied: [u64; 5],
    /// Outcome of every operation, in workload order.
    pub results: Vec<OpStatus>,
    /// Workers whose affinity request succeeded.
    pub pinned: usize,
}

#[derive(Copy, Clone, Debug)]
pub struct PipelineConfig {
    pub seed: u64,
    pub watchdog: Duration,
    pub pin: bool,
    /// Block size of the per-worker distribution queues.
    pub queue_block: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { seed: 0, watchdog: Duration::from_secs(120), pin: true, queue_block: 10_000 }
    }
}

struct WorkerOut {
    fill_done: Instant,
    drain_done: Instant,
    enqueued: [u64; 5],
    applied: [u64; 5],
    results: Vec<(usize, OpStatus)>,
    pinned: bool,
}

/// Two phases over `plan.threads` workers. Fill: worker `t` routes its
/// contiguous share of `ops` into the workers' queues. Drain: after all workers
/// finish filling, each pops its own queue and applies the operations to the
/// owning shard. `shards.len()` must equal `plan.shard_count`.
///
/// Returns [`Error::Timeout`] if the workers do not finish within the
/// watchdog; stuck workers are left detached.
pub fn run_pipeline<S>(plan: &ShardPlan, shards: Arc<[S]>, ops: Arc<[Op]>, config: PipelineConfig) -> Result<PipelineReport>
where
    S: ShardTarget + 'static,
{
    if shards.len() != plan.shard_count {
        return Err(domain(format!("{} shards supplied for a plan of {}", shards.len(), plan.shard_count)));
    }
    let threads = plan.threads;
    let plan = Arc::new(plan.clone());
    let queues: Arc<[Queue]> = (0..threads).map(|_| Queue::with_block_size(config.queue_block)).collect();
    let barrier = Arc::new(Barrier::new(threads));
    let failed = Arc::new(AtomicUsize::new(0));
    let (tx, rx) = mpsc::channel::<Result<WorkerOut>>();
    let start = Instant::now();

    let mut handles = Vec::with_capacity(threads);
    for t in 0..threads {
        let (plan, shards, ops, queues, barrier, failed, tx) =
            (plan.clone(), shards.clone(), ops.clone(), queues.clone(), barrier.clone(), failed.clone(), tx.clone());
        handles.push(std::thread::spawn(move || {
            let pinned = config.pin && pin_current_thread(plan.pinning[t]);
            let mut rng = worker_rng(config.seed, t);
            let mut enqueued = [0u64; 5];
            let (lo, hi) = (ops.len() * t / threads, ops.len() * (t + 1) / threads);
            for i in lo..hi {
                let r = plan.route(ops[i], t, &mut rng);
                queues[r.target_queue].push(i as u64).expect("op indices are never the EMPTY marker");
                enqueued[ops[i].kind.index()] += 1;
            }
            let fill_done = Instant::now();
            barrier.wait();

            let my_group = plan.group_of_worker(t);
            let mut applied = [0u64; 5];
            let mut results = Vec::new();
            let mut outcome = Ok(());
            while let Some(i) = queues[t].pop() {
                if failed.load(Ordering::Relaxed) > 0 {
                    break;
                }
                let op = ops[i as usize];
                let shard = plan.shard_of(op.key);
                debug_assert!(
                    plan.target == QueueTarget::LocalGroup || plan.assignment[shard] == my_group,
                    "key {:#x} of shard {shard} drained by group {my_group}",
                    op.key
                );
                match shards[shard].apply(op) {
                    Ok(status) => {
                        applied[op.kind.index()] += 1;
                        results.push((i as usize, status));
                    }
                    Err(e) => {
                        failed.fetch_add(1, Ordering::Relaxed);
                        outcome = Err(e);
                        break;
                    }
                }
            }
            let out = outcome.map(|()| WorkerOut {
                fill_done,
                drain_done: Instant::now(),
                enqueued,
                applied,
                results,
                pinned,
            });
            let _ = tx.send(out);
        }));
    }
    drop(tx);

    let deadline = start + config.watchdog;
    let mut outs = Vec::with_capacity(threads);
    while outs.len() < threads {
        let left = deadline.saturating_duration_since(Instant::now());
        match rx.recv_timeout(left) {
            Ok(out) => outs.push(out?),
            Err(mpsc::RecvTimeoutError::Timeout) => return Err(Error::Timeout(config.watchdog)),
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                for h in handles {
                    if let Err(p) = h.join() {
                        std::panic::resume_unwind(p);
                    }
                }
                unreachable!("all workers exited without reporting");
            }
        }
    }
    for h in handles {
        let _ = h.join();
    }

    let fill_end = outs.iter().map(|o| o.fill_done).max().unwrap_or(start);
    let drain_end = outs.iter().map(|o| o.drain_done).max().unwrap_or(fill_end);
    let mut report = PipelineReport {
        fill: fill_end - start,
        drain: drain_end.saturating_duration_since(fill_end),
        total: drain_end - start,
        enqueued: [0; 5],
        applied: [0; 5],
        results: vec![OpStatus::Retry; ops.len()],
        pinned: 0,
    };
    for o in outs {
        for k in 0..5 {
            report.enqueued[k] += o.enqueued[k];
            report.applied[k] += o.applied[k];
        }
        for (i, s) in o.results {
            report.results[i] = s;
        }
        report.pinned += usize::from(o.pinned);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skiplist::Skiplist;

    #[test]
    fn group_counts_and_assignment() {
        let p = plan_shards(32, 16, 8).unwrap();
        assert_eq!(p.groups_in_use, 2);
        assert_eq!(p.assignment, vec![0, 1, 0, 1, 0, 1, 0, 1]);
        let p = plan_shards(4, 16, 8).unwrap();
        assert_eq!(p.groups_in_use, 1);
        assert!(p.assignment.iter().all(|&g| g == 0));
        let p = plan_shards(128, 16, 8).unwrap();
        assert_eq!(p.groups_in_use, 8);
        assert_eq!(p.assignment, (0..8).collect::<Vec<_>>());
        assert_eq!(p.pinning[0], 0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(plan_shards(4, 16, 6), Err(Error::Domain(_))));
        assert!(plan_shards(0, 16, 8).is_err());
        assert!(plan_shards(4, 0, 8).is_err());
    }

    #[test]
    fn shard_is_top_bits() {
        let p = plan_shards(8, 4, 8).unwrap();
        assert_eq!(p.shard_of(6 << 61 | 12345), 6);
        assert_eq!(plan_shards(1, 1, 1).unwrap().shard_of(u64::MAX - 1), 0);
    }

    #[test]
    fn routes_stay_in_owning_group() {
        let p = plan_shards(24, 4, 8).unwrap();
        let mut rng = worker_rng(1, 0);
        for k in 0..10_000u64 {
            let key = crate::hashmaps::hash64(k);
            let r = p.route(Op { kind: OpKind::Add, key }, 0, &mut rng);
            assert_eq!(r.shard, p.shard_of(key));
            assert_eq!(p.group_of_worker(r.target_queue), r.shard % p.groups_in_use);
        }
    }

    // With one group every worker is equally likely; the per-queue counts
    // follow a multinomial whose chi-square statistic has T-1 degrees of freedom.
    #[test]
    fn queue_loads_are_uniform() {
        let p = plan_shards(8, 16, 8).unwrap();
        let mut rng = worker_rng(9, 0);
        let n = 100_000u64;
        let mut load = [0u64; 8];
        for k in 0..n {
            load[p.route(Op { kind: OpKind::Find, key: crate::hashmaps::hash64(k) }, 0, &mut rng).target_queue] += 1;
        }
        let expected = n as f64 / 8.0;
        let chi2: f64 = load.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        // Mean 7, variance 14: three standard deviations above the mean.
        assert!(chi2 < 7.0 + 3.0 * 14f64.sqrt(), "chi2 = {chi2}, loads {load:?}");
        for &o in &load {
            let sigma = (n as f64 * (1.0 / 8.0) * (7.0 / 8.0)).sqrt();
            assert!((o as f64 - expected).abs() <= 3.0 * sigma, "{load:?}");
        }
    }

    #[test]
    fn local_group_target() {
        let mut p = plan_shards(8, 4, 8).unwrap();
        p.target = QueueTarget::LocalGroup;
        let mut rng = worker_rng(2, 5);
        for k in 0..1_000 {
            let r = p.route(Op { kind: OpKind::Add, key: k << 50 }, 5, &mut rng);
            assert_eq!(p.group_of_worker(r.target_queue), 1);
        }
    }

    #[test]
    fn single_worker_pipeline_matches_sequential() {
        let ops: Vec<Op> = (0..100u64)
            .map(|i| Op { kind: [OpKind::Add, OpKind::Find, OpKind::Del][(i % 3) as usize], key: i % 17 })
            .collect();
        let reference = Skiplist::new();
        let want: Vec<OpStatus> = ops.iter().map(|&op| reference.apply(op).unwrap()).collect();
        let plan = plan_shards(1, 16, 1).unwrap();
        let shards: Arc<[Skiplist]> = vec![Skiplist::new()].into();
        let r = run_pipeline(&plan, shards, ops.clone().into(), PipelineConfig::default()).unwrap();
        assert_eq!(r.results, want);
        assert_eq!(r.enqueued, r.applied);
    }

    #[test]
    fn multi_worker_conservation() {
        let plan = plan_shards(4, 2, 4).unwrap();
        let ops: Vec<Op> = (0..20_000u64)
            .map(|i| Op { kind: if i % 2 == 0 { OpKind::Add } else { OpKind::Find }, key: crate::hashmaps::hash64(i / 2) })
            .collect();
        let shards: Arc<[Skiplist]> = (0..4).map(|_| Skiplist::new()).collect();
        let r = run_pipeline(&plan, shards.clone(), ops.into(), PipelineConfig { seed: 3, ..Default::default() }).unwrap();
        assert_eq!(r.enqueued, r.applied);
        assert_eq!(r.applied[OpKind::Add.index()], 10_000);
        assert!(r.results.iter().all(|&s| s != OpStatus::Retry));
        let total: usize = shards.iter().map(|s| s.len()).sum();
        assert_eq!(total, 10_000);
        for (i, s) in shards.iter().enumerate() {
            assert!(s.validate().ok);
            assert!(s.range_scan(0, u64::MAX - 1).unwrap().iter().all(|&k| plan.shard_of(k) == i));
        }
    }

    #[test]
    fn wrong_kind_is_reported() {
        let plan = plan_shards(2, 2, 1).unwrap();
        let shards: Arc<[Skiplist]> = vec![Skiplist::new()].into();
        let ops: Arc<[Op]> = vec![Op { kind: OpKind::Push, key: 1 }].into();
        assert!(matches!(run_pipeline(&plan, shards, ops, PipelineConfig::default()), Err(Error::Domain(_))));
    }
}

//! Workload generation, benchmark runs, CSV reports and the linearizability
//! checker used as a correctness oracle.

pub mod linearizability;
pub mod report;
pub mod workload;

pub use linearizability::{check_linearizable, Event, History, Semantics, Verdict};
pub use report::{emit_report, parse_report, read_report, write_report, ReportRow, CSV_HEADER};
pub use workload::{gen_workload, Mix};

use crate::error::{domain, Result};
use crate::hashmaps::{ConcurrentSet, HashConfig, Variant};
use crate::queue::{Queue, QueueConfig};
use crate::shard::{plan_shards, run_pipeline, Op, OpKind, PipelineConfig, PipelineReport, DEFAULT_SHARDS};
use crate::skiplist::{Skiplist, SkiplistConfig};
use crate::primitives::OpStatus;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Structure {
    Skiplist,
    Hash(Variant),
    Queue,
}

impl Structure {
    pub fn name(self) -> &'static str {
        match self {
            Structure::Skiplist => "skiplist",
            Structure::Hash(v) => v.name(),
            Structure::Queue => "queue",
        }
    }
}

impl FromStr for Structure {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Structure> {
        match s {
            "skiplist" => Ok(Structure::Skiplist),
            "queue" => Ok(Structure::Queue),
            _ => s.parse().map(Structure::Hash).map_err(|_| domain(format!("unknown structure {s:?}"))),
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct WorkloadSpec {
    pub structure: Structure,
    pub total_ops: u64,
    pub mix: Mix,
    pub threads: usize,
    pub seed: u64,
    /// Distinct keys drawn from; defaults to `total_ops`.
    pub key_space: Option<u64>,
    /// Skiplist and split-order arena blocks, and queue blocks.
    pub block_size: usize,
    pub hash: HashConfig,
    pub shards: usize,
    pub cpus_per_group: usize,
    /// Give each shard of a fixed or two-level table `slots / shards` level-1
    /// slots rather than `slots`.
    pub divide_slots: bool,
    pub reps: usize,
    pub validate: bool,
    pub watchdog: Duration,
    pub pin: bool,
}

impl WorkloadSpec {
    pub fn new(structure: Structure, total_ops: u64, mix: Mix) -> WorkloadSpec {
        WorkloadSpec {
            structure,
            total_ops,
            mix,
            threads: 1,
            seed: 1,
            key_space: None,
            block_size: 10_000,
            hash: HashConfig::default(),
            shards: DEFAULT_SHARDS,
            cpus_per_group: crate::shard::cpus_per_group_from_env(),
            divide_slots: true,
            reps: 5,
            validate: false,
            watchdog: Duration::from_secs(120),
            pin: true,
        }
    }

    fn shard_count(&self) -> usize {
        if self.structure == Structure::Queue {
            1
        } else {
            self.shards
        }
    }

    fn hash_config(&self, variant: Variant) -> HashConfig {
        let mut c = HashConfig { variant, block_capacity: self.block_size, ..self.hash };
        c.shard_bits = self.shard_count().trailing_zeros();
        if matches!(variant, Variant::Fixed | Variant::TwoLevel) && self.divide_slots {
            c.slots = (c.slots / self.shard_count()).max(1);
        }
        c
    }
}

/// Repetition means for one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub threads: usize,
    pub structure: String,
    pub ops: u64,
    pub mix: String,
    pub fill_s: f64,
    pub drain_s: f64,
    pub total_s: f64,
    pub ops_per_s: f64,
    pub splits: u64,
    pub merges: u64,
    pub borrows: u64,
    pub peak_blocks: u64,
    /// Operations applied per [`OpKind`] in one repetition.
    pub counts: [u64; 5],
    pub reps: usize,
    /// Failed validation checks; empty when everything passed or nothing was checked.
    pub failures: Vec<String>,
}

impl Metrics {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

struct RepOutcome {
    pipeline: PipelineReport,
    ledger: (u64, u64, u64),
    blocks: u64,
    failures: Vec<String>,
}

fn count(r: &PipelineReport, status: OpStatus) -> usize {
    r.results.iter().filter(|&&s| s == status).count()
}

fn conservation(r: &PipelineReport, ops: usize, failures: &mut Vec<String>) {
    if r.enqueued != r.applied {
        failures.push(format!("enqueued {:?} but applied {:?}", r.enqueued, r.applied));
    }
    if r.applied.iter().sum::<u64>() != ops as u64 {
        failures.push(format!("{} of {ops} operations applied", r.applied.iter().sum::<u64>()));
    }
}

fn set_rep<S: ConcurrentSet + 'static>(
    spec: &WorkloadSpec,
    shards: Arc<[S]>,
    ops: &Arc<[Op]>,
    cfg: PipelineConfig,
) -> Result<(PipelineReport, Vec<String>)> {
    let plan = plan_shards(spec.threads, spec.cpus_per_group, spec.shard_count())?;
    let r = run_pipeline(&plan, shards.clone(), ops.clone(), cfg)?;
    let mut failures = Vec::new();
    if spec.validate {
        conservation(&r, ops.len(), &mut failures);
        let net = count(&r, OpStatus::Added) as i64 - count(&r, OpStatus::Removed) as i64;
        let stored: usize = shards.iter().map(|s| s.len()).sum();
        if net != stored as i64 {
            failures.push(format!("{net} net additions but {stored} keys stored"));
        }
    }
    Ok((r, failures))
}

fn run_rep(spec: &WorkloadSpec, ops: &Arc<[Op]>, cfg: PipelineConfig) -> Result<RepOutcome> {
    let n = spec.shard_count();
    match spec.structure {
        Structure::Skiplist => {
            let config = SkiplistConfig { block_capacity: spec.block_size, ..SkiplistConfig::default() };
            let shards: Arc<[Skiplist]> = (0..n).map(|_| Skiplist::with_config(config)).collect::<Result<Vec<_>>>()?.into();
            let (pipeline, mut failures) = set_rep(spec, shards.clone(), ops, cfg)?;
            let plan = plan_shards(spec.threads, spec.cpus_per_group, n)?;
            let mut ledger = (0, 0, 0);
            for (i, s) in shards.iter().enumerate() {
                let snap = s.ledger().snapshot();
                ledger.0 += snap.total_splits();
                ledger.1 += snap.total_merges();
                ledger.2 += snap.total_borrows();
                if spec.validate {
                    let v = s.validate();
                    if !v.ok {
                        failures.push(format!("shard {i}: {v}"));
                    }
                    let keys = s.range_scan(0, crate::RESERVED_KEY - 1)?;
                    if keys.iter().any(|&k| plan.shard_of(k) != i) {
                        failures.push(format!("shard {i} holds a key of another shard"));
                    }
                }
            }
            let blocks = shards.iter().map(Skiplist::blocks_in_use).sum();
            Ok(RepOutcome { pipeline, ledger, blocks, failures })
        }
        Structure::Hash(variant) => {
            let c = spec.hash_config(variant);
            let shards: Arc<[Box<dyn ConcurrentSet>]> = (0..n).map(|_| c.build()).collect::<Result<Vec<_>>>()?.into();
            let (pipeline, failures) = set_rep(spec, shards.clone(), ops, cfg)?;
            let blocks = shards.iter().map(|s| s.blocks_in_use()).sum();
            Ok(RepOutcome { pipeline, ledger: (0, 0, 0), blocks, failures })
        }
        Structure::Queue => {
            let q = Queue::new(QueueConfig { block_size: spec.block_size, ..QueueConfig::default() });
            let shards: Arc<[Queue]> = vec![q].into();
            let plan = plan_shards(spec.threads, spec.cpus_per_group, 1)?;
            let pipeline = run_pipeline(&plan, shards.clone(), ops.clone(), cfg)?;
            let mut failures = Vec::new();
            if spec.validate {
                conservation(&pipeline, ops.len(), &mut failures);
                let pushed = pipeline.applied[OpKind::Push.index()];
                let popped = count(&pipeline, OpStatus::True) as u64;
                let residual = shards[0].len();
                if pushed != popped + residual {
                    failures.push(format!("pushed {pushed} != popped {popped} + residual {residual}"));
                }
            }
            let blocks = shards[0].stats().peak_blocks;
            Ok(RepOutcome { pipeline, ledger: (0, 0, 0), blocks, failures })
        }
    }
}

/// Small concurrent histories recorded from a fresh instance of the
/// structure, each checked exhaustively.
pub fn sample_linearizability(spec: &WorkloadSpec, histories: usize) -> Result<Vec<String>> {
    use linearizability::*;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let threads = spec.threads.clamp(2, 4);
    let mut failures = Vec::new();
    for i in 0..histories {
        let (h, semantics) = match spec.structure {
            Structure::Skiplist => (record_set_history(Arc::new(Skiplist::new()), random_set_ops(&mut rng, threads, 6, 8))?, Semantics::Set),
            Structure::Hash(v) => {
                let c = HashConfig { seed_slots: 2, sub_seed_slots: 2, max_collisions: 1, first_level_tables: 4, slots: 4, second_slots: 4, expand_threshold: 2, ..spec.hash_config(v) };
                let set: Arc<dyn ConcurrentSet> = Arc::from(c.build()?);
                (record_set_history(set, random_set_ops(&mut rng, threads, 6, 8))?, Semantics::Set)
            }
            Structure::Queue => {
                let q = Arc::new(Queue::with_block_size(2));
                (record_queue_history(q, random_queue_ops(&mut rng, threads, 6))?, Semantics::Fifo)
            }
        };
        if check_linearizable(&h, semantics)? == Verdict::Violation {
            failures.push(format!("history {i} is not linearizable: {h:?}"));
        }
    }
    Ok(failures)
}

/// Runs the workload `spec.reps` times on fresh structures and averages.
pub fn run(spec: &WorkloadSpec) -> Result<Metrics> {
    if spec.reps == 0 || spec.threads == 0 {
        return Err(domain("repetitions and threads must be at least 1"));
    }
    let mix = match spec.structure {
        Structure::Queue => spec.mix.as_queue()?,
        _ if spec.mix.is_queue() => return Err(domain("set structures need an add:find:del mix")),
        _ => spec.mix.clone(),
    };
    let ops: Arc<[Op]> = gen_workload(&mix, spec.total_ops, spec.key_space.unwrap_or(spec.total_ops.max(1)), spec.seed)?.into();

    let mut m = Metrics {
        threads: spec.threads,
        structure: spec.structure.name().to_owned(),
        ops: spec.total_ops,
        mix: mix.to_string(),
        reps: spec.reps,
        ..Metrics::default()
    };
    let mut ledger = (0u64, 0u64, 0u64);
    for rep in 0..spec.reps {
        let cfg = PipelineConfig {
            seed: spec.seed ^ (rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            watchdog: spec.watchdog,
            pin: spec.pin,
            queue_block: spec.block_size,
        };
        let out = run_rep(spec, &ops, cfg)?;
        m.fill_s += out.pipeline.fill.as_secs_f64();
        m.drain_s += out.pipeline.drain.as_secs_f64();
        m.total_s += out.pipeline.total.as_secs_f64();
        ledger = (ledger.0 + out.ledger.0, ledger.1 + out.ledger.1, ledger.2 + out.ledger.2);
        m.peak_blocks = m.peak_blocks.max(out.blocks);
        m.counts = out.pipeline.applied;
        m.failures.extend(out.failures.into_iter().map(|f| format!("rep {rep}: {f}")));
    }
    let r = spec.reps as f64;
    m.fill_s /= r;
    m.drain_s /= r;
    m.total_s /= r;
    m.ops_per_s = if m.total_s > 0.0 { spec.total_ops as f64 / m.total_s } else { 0.0 };
    let reps = spec.reps as u64;
    (m.splits, m.merges, m.borrows) = (ledger.0 / reps, ledger.1 / reps, ledger.2 / reps);
    if spec.validate {
        m.failures.extend(sample_linearizability(spec, 100)?);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke(structure: Structure, mix: &str) -> Metrics {
        let mut spec = WorkloadSpec::new(structure, 10_000, mix.parse().unwrap());
        spec.threads = 4;
        spec.cpus_per_group = 2;
        spec.reps = 2;
        spec.validate = true;
        spec.pin = false;
        spec.hash.slots = 256;
        spec.hash.seed_slots = 16;
        spec.hash.first_level_tables = 8;
        spec.hash.sub_seed_slots = 4;
        spec.hash.second_slots = 64;
        run(&spec).unwrap()
    }

    #[test]
    fn smoke_every_structure() {
        for s in ["skiplist", "fixed", "twolevel", "spo", "twolevel-spo"] {
            let m = smoke(s.parse().unwrap(), "49.5:49.5:1");
            assert!(m.passed(), "{s}: {:?}", m.failures);
            assert_eq!(m.counts.iter().sum::<u64>(), 10_000);
            assert_eq!(m.structure, s);
        }
        let m = smoke(Structure::Queue, "50:50");
        assert!(m.passed(), "{:?}", m.failures);
        assert_eq!(m.counts[OpKind::Push.index()], 5_000);
        assert!(m.peak_blocks >= 1);
    }

    #[test]
    fn skiplist_run_reports_rebalancing() {
        let m = smoke(Structure::Skiplist, "50:50:0");
        assert!(m.splits > 0);
        assert!(m.total_s >= m.drain_s && m.ops_per_s > 0.0);
    }

    #[test]
    fn structure_names() {
        for s in ["skiplist", "fixed", "twolevel", "spo", "twolevel-spo", "queue"] {
            assert_eq!(s.parse::<Structure>().unwrap().name(), s);
        }
        assert!("tree".parse::<Structure>().is_err());
    }

    #[test]
    fn mismatched_mix_rejected() {
        let spec = WorkloadSpec::new(Structure::Skiplist, 10, "50:50".parse().unwrap());
        assert!(run(&spec).is_err());
        let spec = WorkloadSpec::new(Structure::Queue, 10, "50:40:10".parse().unwrap());
        assert!(run(&spec).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        emit_report(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().trim(), CSV_HEADER.join(","));
        assert!(parse_report(&path).unwrap().is_empty());

        let rows: Vec<Metrics> = [4, 8, 16, 32, 64, 128]
            .into_iter()
            .map(|t| Metrics { threads: t, structure: "skiplist".into(), ops: 50_000_000, mix: "50:50:0".into(), fill_s: 1.5, drain_s: 2.25, total_s: 3.75, ops_per_s: 1.0e7, splits: 3, merges: 2, borrows: 1, peak_blocks: 9, ..Metrics::default() })
            .collect();
        let path = dir.path().join("table.csv");
        emit_report(&rows, &path).unwrap();
        let back = parse_report(&path).unwrap();
        assert_eq!(back.len(), 6);
        assert_eq!(back, rows.iter().map(ReportRow::from).collect::<Vec<_>>());
    }
}

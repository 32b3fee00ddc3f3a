use clap::Parser;
use ordset::bench::{self, Metrics, Mix, Structure, WorkloadSpec};
use ordset::hashmaps::HashConfig;
use ordset::Error;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

/// Runs a generated workload against one of the concurrent structures and
/// reports per-thread-count means as CSV.
#[derive(Parser, Debug)]
#[command(name = "bench", version)]
struct Cli {
    /// skiplist, fixed, twolevel, spo, twolevel-spo or queue.
    #[arg(long, default_value = "skiplist")]
    structure: Structure,
    #[arg(long, default_value_t = 1_000_000)]
    ops: u64,
    /// One or more thread counts, comma separated; one CSV row each.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    threads: Vec<usize>,
    /// add:find:del percentages, or push:pop for the queue.
    #[arg(long, default_value = "50:50:0")]
    mix: Mix,
    #[arg(long, default_value_t = 10_000)]
    block_size: usize,
    #[arg(long, default_value_t = 8192)]
    slots: usize,
    #[arg(long, default_value_t = 2048)]
    second_slots: usize,
    #[arg(long, default_value_t = 10)]
    expand_threshold: usize,
    #[arg(long, default_value_t = 8192)]
    spo_seed: usize,
    #[arg(long, default_value_t = 16)]
    max_collisions: usize,
    #[arg(long, default_value_t = 8)]
    shards: usize,
    /// Give every shard of a fixed or two-level table the full slot count.
    #[arg(long)]
    slots_per_shard: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Check structure invariants, operation conservation and sampled
    /// linearizability after every repetition.
    #[arg(long)]
    validate: bool,
    /// Watchdog per repetition, in seconds.
    #[arg(long, default_value_t = 120)]
    timeout: u64,
    /// Skip CPU affinity requests.
    #[arg(long)]
    no_pin: bool,
}

impl Cli {
    fn spec(&self, threads: usize) -> WorkloadSpec {
        let mut s = WorkloadSpec::new(self.structure, self.ops, self.mix.clone());
        s.threads = threads;
        s.seed = self.seed;
        s.block_size = self.block_size;
        s.hash = HashConfig {
            slots: self.slots,
            second_slots: self.second_slots,
            expand_threshold: self.expand_threshold,
            seed_slots: self.spo_seed,
            max_collisions: self.max_collisions,
            ..HashConfig::default()
        };
        s.shards = self.shards;
        s.divide_slots = !self.slots_per_shard;
        s.reps = self.reps;
        s.validate = self.validate;
        s.watchdog = Duration::from_secs(self.timeout);
        s.pin = !self.no_pin;
        s
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };

    let mut rows: Vec<Metrics> = Vec::new();
    let mut failed = false;
    for &t in &cli.threads {
        match bench::run(&cli.spec(t)) {
            Ok(m) => {
                eprintln!(
                    "{} threads={} fill={:.3}s drain={:.3}s total={:.3}s {:.0} ops/s",
                    m.structure, m.threads, m.fill_s, m.drain_s, m.total_s, m.ops_per_s
                );
                for f in &m.failures {
                    eprintln!("validation failure: {f}");
                }
                failed |= !m.passed();
                rows.push(m);
            }
            Err(e @ Error::Timeout(_)) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        }
    }

    let written = match &cli.csv {
        Some(path) => bench::emit_report(&rows, path),
        None => bench::write_report(&rows, std::io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

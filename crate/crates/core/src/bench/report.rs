use super::Metrics;
use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const CSV_HEADER: [&str; 12] = [
    "threads", "structure", "ops", "mix", "fill_s", "drain_s", "total_s", "ops_per_s", "splits", "merges", "borrows",
    "peak_blocks",
];

/// One CSV line: the repetition means for one thread count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
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
}

impl From<&Metrics> for ReportRow {
    fn from(m: &Metrics) -> ReportRow {
        ReportRow {
            threads: m.threads,
            structure: m.structure.clone(),
            ops: m.ops,
            mix: m.mix.clone(),
            fill_s: m.fill_s,
            drain_s: m.drain_s,
            total_s: m.total_s,
            ops_per_s: m.ops_per_s,
            splits: m.splits,
            merges: m.merges,
            borrows: m.borrows,
            peak_blocks: m.peak_blocks,
        }
    }
}

/// Writes the header and one row per metrics entry.
pub fn write_report<W: Write>(metrics: &[Metrics], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for m in metrics {
        w.serialize(ReportRow::from(m))?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_report(metrics: &[Metrics], path: &Path) -> Result<()> {
    write_report(metrics, std::fs::File::create(path)?)
}

pub fn read_report<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(crate::error::domain(format!("unexpected CSV header {header:?}")));
    }
    Ok(r.deserialize().collect::<Result<Vec<ReportRow>, csv::Error>>()?)
}

pub fn parse_report(path: &Path) -> Result<Vec<ReportRow>> {
    read_report(std::fs::File::open(path)?)
}

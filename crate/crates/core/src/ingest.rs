//! Trace ingestion: parse raw usage records, aggregate per-machine load into
//! fixed intervals, z-score standardize on training statistics, split by
//! days, and cut (history, target) window pairs.
//!
//! The trace schema is a simplified delimited format, one record per line:
//!
//! ```text
//! start_us<sep>end_us<sep>machine_id<sep>usage[<sep>memory_usage]
//! ```
//!
//! Separator is comma or tab, auto-detected; an optional header line is
//! skipped. With five columns the fourth column is CPU and the fifth memory;
//! the resource flag selects between them. Extracts of the Google cluster
//! task-usage table convert to this shape by keeping start/end time, machine
//! ID, and the CPU-rate (or canonical-memory) column.

use std::fmt;
use std::io::BufRead;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::esp::esp_transform;
use crate::task::Task;

/// One history window of standardized load readings.
pub type HistoryWindow = Vec<f64>;
/// Target values: raw future loads or segment means, in the same units as
/// the history they accompany.
pub type PredictionTarget = Vec<f64>;

pub const DEFAULT_INTERVAL_SECONDS: u32 = 300;
/// Day boundaries from the evaluation protocol: train on days 1-20,
/// validate on 21-26, test on 27-29.
pub const DEFAULT_DAY_BOUNDARIES: (usize, usize, usize) = (20, 26, 29);

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{malformed} of {total} lines malformed, above threshold {threshold}")]
    MalformedRatio { malformed: usize, total: usize, threshold: f64 },
    #[error("no usage records for machine {0}")]
    EmptySeries(u64),
    #[error("training split is constant; cannot standardize")]
    ConstantSeries,
    #[error("series too short: need {needed} points, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("range of {range} points cannot fit window {w_in} plus horizon {horizon}")]
    WindowTooLong { range: usize, w_in: usize, horizon: usize },
    #[error("bad series cache {0}: {1}")]
    BadCache(String, String),
}

/// Which resource column to ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resource {
    Cpu,
    Memory,
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resource::Cpu => write!(f, "cpu"),
            Resource::Memory => write!(f, "memory"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid resource {0:?}: expected cpu or memory")]
pub struct ResourceParseError(pub String);

impl FromStr for Resource {
    type Err = ResourceParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cpu" => Ok(Resource::Cpu),
            "memory" | "mem" => Ok(Resource::Memory),
            other => Err(ResourceParseError(other.to_string())),
        }
    }
}

/// One task-usage measurement: a task ran on `machine_id` over
/// `[start_us, end_us)` consuming `usage` of the resource.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageRecord {
    pub start_us: u64,
    pub end_us: u64,
    pub machine_id: u64,
    pub usage: f64,
}

/// One machine's aggregated load at fixed intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineSeries {
    pub machine_id: u64,
    pub interval_seconds: u32,
    pub start_us: u64,
    pub values: Vec<f64>,
}

impl MachineSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Points per calendar day at this sampling interval.
    pub fn points_per_day(&self) -> usize {
        (86_400 / self.interval_seconds) as usize
    }
}

/// Training-split z-score parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaler {
    pub mean: f64,
    pub std: f64,
}

impl Scaler {
    pub fn identity() -> Self {
        Scaler { mean: 0.0, std: 1.0 }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    #[inline]
    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Contiguous, ordered, non-overlapping index ranges over a series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

/// Parse settings; `max_malformed_ratio` bounds how many bad lines are
/// tolerated before the whole stream is rejected.
#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub resource: Resource,
    pub max_malformed_ratio: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { resource: Resource::Cpu, max_malformed_ratio: 0.5 }
    }
}

/// Parsed trace plus the malformed-line count for reporting.
#[derive(Debug, Clone)]
pub struct ParsedTrace {
    pub records: Vec<UsageRecord>,
    pub malformed: usize,
    pub total_lines: usize,
}

fn parse_line(line: &str, sep: char, resource: Resource) -> Option<UsageRecord> {
    let fields: Vec<&str> = line.split(sep).map(str::trim).collect();
    if fields.len() != 4 && fields.len() != 5 {
        return None;
    }
    let start_us: u64 = fields[0].parse().ok()?;
    let end_us: u64 = fields[1].parse().ok()?;
    let machine_id: u64 = fields[2].parse().ok()?;
    let usage_field = match (resource, fields.len()) {
        (Resource::Memory, 5) => fields[4],
        _ => fields[3],
    };
    let usage: f64 = usage_field.parse().ok()?;
    if end_us <= start_us || !usage.is_finite() || usage < 0.0 {
        return None;
    }
    Some(UsageRecord { start_us, end_us, machine_id, usage })
}

/// Reads usage records from a delimited text stream. Malformed lines are
/// counted and skipped; the stream is rejected when their ratio exceeds the
/// configured threshold.
pub fn parse_trace<R: BufRead>(reader: R, opts: &ParseOptions) -> Result<ParsedTrace, IngestError> {
    let mut records = Vec::new();
    let mut malformed = 0usize;
    let mut total = 0usize;
    let mut sep: Option<char> = None;
    let mut first_data_line = true;

    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let s = *sep.get_or_insert_with(|| if trimmed.contains('\t') { '\t' } else { ',' });

        if first_data_line {
            first_data_line = false;
            // Header detection: a first line whose first field is not a
            // number is a header, not a malformed record.
            let first_field = trimmed.split(s).next().unwrap_or("").trim();
            if first_field.parse::<u64>().is_err() {
                continue;
            }
        }

        total += 1;
        match parse_line(trimmed, s, opts.resource) {
            Some(rec) => records.push(rec),
            None => malformed += 1,
        }
    }

    if total > 0 && (malformed as f64 / total as f64) > opts.max_malformed_ratio {
        return Err(IngestError::MalformedRatio {
            malformed,
            total,
            threshold: opts.max_malformed_ratio,
        });
    }
    Ok(ParsedTrace { records, malformed, total_lines: total })
}

/// All distinct machine ids in a record set, sorted.
pub fn machine_ids(records: &[UsageRecord]) -> Vec<u64> {
    let mut ids: Vec<u64> = records.iter().map(|r| r.machine_id).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Seed-controlled sample of `n` machines. Returns the chosen ids sorted and
/// whether the request was truncated to the available count.
pub fn sample_machines(ids: &[u64], n: usize, seed: u64) -> (Vec<u64>, bool) {
    let mut pool: Vec<u64> = ids.to_vec();
    pool.sort_unstable();
    pool.dedup();
    if n >= pool.len() {
        return (pool, n > 0 && n != ids.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let mut chosen: Vec<u64> = pool.into_iter().take(n).collect();
    chosen.sort_unstable();
    (chosen, false)
}

/// Aggregates one machine's records into an interval series. Each interval
/// holds the sum over all tasks of `usage * overlap_fraction`, where the
/// fraction is the share of the interval the task's `[start, end)` covers.
/// Intervals no task touches forward-fill the previous value (0 if none yet).
pub fn aggregate(
    records: &[UsageRecord],
    machine_id: u64,
    interval_seconds: u32,
) -> Result<MachineSeries, IngestError> {
    assert!(interval_seconds > 0);
    let mine: Vec<&UsageRecord> =
        records.iter().filter(|r| r.machine_id == machine_id).collect();
    if mine.is_empty() {
        return Err(IngestError::EmptySeries(machine_id));
    }
    let iu = interval_seconds as u64 * 1_000_000;
    let first_start = mine.iter().map(|r| r.start_us).min().unwrap();
    let last_end = mine.iter().map(|r| r.end_us).max().unwrap();
    let start_us = (first_start / iu) * iu;
    let n = ((last_end - start_us).div_ceil(iu)) as usize;

    let mut values = vec![0.0; n];
    let mut covered = vec![false; n];
    for r in &mine {
        let first_idx = ((r.start_us - start_us) / iu) as usize;
        let last_idx = ((r.end_us - 1 - start_us) / iu) as usize;
        for idx in first_idx..=last_idx {
            let lo = start_us + idx as u64 * iu;
            let hi = lo + iu;
            let overlap = r.end_us.min(hi) - r.start_us.max(lo);
            values[idx] += r.usage * (overlap as f64 / iu as f64);
            covered[idx] = true;
        }
    }
    let mut prev = 0.0;
    for (v, c) in values.iter_mut().zip(&covered) {
        if *c {
            prev = *v;
        } else {
            *v = prev;
        }
    }
    Ok(MachineSeries { machine_id, interval_seconds, start_us, values })
}

/// Z-score standardization using TRAIN-range statistics applied to the whole
/// series. Uses the population standard deviation.
pub fn standardize(
    values: &[f64],
    split: &DatasetSplit,
) -> Result<(Vec<f64>, Scaler), IngestError> {
    let train = &values[split.train.clone()];
    if train.is_empty() {
        return Err(IngestError::TooShort { needed: 1, got: 0 });
    }
    let n = train.len() as f64;
    let mean = train.iter().sum::<f64>() / n;
    let var = train.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 0.0) {
        return Err(IngestError::ConstantSeries);
    }
    let scaler = Scaler { mean, std };
    Ok((values.iter().map(|v| scaler.apply(*v)).collect(), scaler))
}

/// Splits a series into train/validation/test day ranges. `points_per_day`
/// scales the boundaries, so shorter synthetic "days" split proportionally.
pub fn split_by_days(
    len: usize,
    points_per_day: usize,
    boundaries: (usize, usize, usize),
) -> Result<DatasetSplit, IngestError> {
    assert!(points_per_day >= 1);
    let (d_train, d_val, d_test) = boundaries;
    assert!(0 < d_train && d_train < d_val && d_val < d_test);
    let needed = d_test * points_per_day;
    if len < needed {
        return Err(IngestError::TooShort { needed, got: len });
    }
    Ok(DatasetSplit {
        train: 0..d_train * points_per_day,
        validation: d_train * points_per_day..d_val * points_per_day,
        test: d_val * points_per_day..d_test * points_per_day,
    })
}

/// Cuts stride-1 sliding (history, target) pairs from `values[range]`.
/// Windows never cross the range boundary, so they never cross splits.
pub fn make_windows(
    values: &[f64],
    range: Range<usize>,
    w_in: usize,
    task: &Task,
) -> Result<Vec<(HistoryWindow, PredictionTarget)>, IngestError> {
    assert!(w_in >= 1);
    let horizon = task.horizon_steps();
    let section = &values[range.clone()];
    if section.len() < w_in + horizon {
        return Err(IngestError::WindowTooLong { range: section.len(), w_in, horizon });
    }
    let scheme = task.scheme();
    let count = section.len() - w_in - horizon + 1;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let history = section[i..i + w_in].to_vec();
        let future = &section[i + w_in..i + w_in + horizon];
        let target = match &scheme {
            None => future.to_vec(),
            Some(s) => esp_transform(future, s).expect("horizon sized to scheme total"),
        };
        out.push((history, target));
    }
    Ok(out)
}

/// Writes a series cache: one `timestamp_us<TAB>value` row per interval.
pub fn write_series(path: &Path, series: &MachineSeries) -> Result<(), IngestError> {
    use std::io::Write;
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    let iu = series.interval_seconds as u64 * 1_000_000;
    for (k, v) in series.values.iter().enumerate() {
        writeln!(w, "{}\t{}", series.start_us + k as u64 * iu, v)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a series cache written by [`write_series`]. The machine id comes
/// from the caller (it is encoded in the file name by the CLI).
pub fn read_series(path: &Path, machine_id: u64) -> Result<MachineSeries, IngestError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (ts, v) = line
            .split_once('\t')
            .ok_or_else(|| IngestError::BadCache(name.clone(), format!("line {}", lineno + 1)))?;
        let ts: u64 = ts
            .parse()
            .map_err(|_| IngestError::BadCache(name.clone(), format!("timestamp line {}", lineno + 1)))?;
        let v: f64 = v
            .parse()
            .map_err(|_| IngestError::BadCache(name.clone(), format!("value line {}", lineno + 1)))?;
        timestamps.push(ts);
        values.push(v);
    }
    if timestamps.len() < 2 {
        return Err(IngestError::BadCache(name, "need at least two rows".into()));
    }
    let step = timestamps[1] - timestamps[0];
    if step == 0 || step % 1_000_000 != 0 {
        return Err(IngestError::BadCache(name, "timestamps must advance in whole seconds".into()));
    }
    for w in timestamps.windows(2) {
        if w[1] - w[0] != step {
            return Err(IngestError::BadCache(name, "uneven interval spacing".into()));
        }
    }
    Ok(MachineSeries {
        machine_id,
        interval_seconds: (step / 1_000_000) as u32,
        start_us: timestamps[0],
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn opts() -> ParseOptions {
        ParseOptions::default()
    }

    #[test]
    fn parse_empty_stream() {
        let parsed = parse_trace(Cursor::new(""), &opts()).unwrap();
        assert!(parsed.records.is_empty());
        assert_eq!(parsed.malformed, 0);
    }

    #[test]
    fn parse_single_line_exact_fields() {
        let parsed = parse_trace(Cursor::new("0,300000000,42,0.25"), &opts()).unwrap();
        assert_eq!(
            parsed.records,
            vec![UsageRecord { start_us: 0, end_us: 300_000_000, machine_id: 42, usage: 0.25 }]
        );
    }

    #[test]
    fn parse_rejects_negative_usage() {
        let input = "0,100,1,0.5\n100,200,1,-0.4\n200,300,1,0.1";
        let parsed = parse_trace(Cursor::new(input), &opts()).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.malformed, 1);
    }

    #[test]
    fn parse_skips_header_and_detects_tabs() {
        let input = "start_us\tend_us\tmachine_id\tusage\n0\t100\t7\t0.5";
        let parsed = parse_trace(Cursor::new(input), &opts()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.malformed, 0);
        assert_eq!(parsed.records[0].machine_id, 7);
    }

    #[test]
    fn parse_memory_column_when_present() {
        let input = "0,100,7,0.5,0.9";
        let cpu = parse_trace(Cursor::new(input), &opts()).unwrap();
        assert_eq!(cpu.records[0].usage, 0.5);
        let mem_opts = ParseOptions { resource: Resource::Memory, ..opts() };
        let mem = parse_trace(Cursor::new(input), &mem_opts).unwrap();
        assert_eq!(mem.records[0].usage, 0.9);
    }

    #[test]
    fn parse_ratio_threshold() {
        let input = "garbage,x\nmore garbage\n0,100,1,0.5";
        let strict = ParseOptions { max_malformed_ratio: 0.1, ..opts() };
        assert!(matches!(
            parse_trace(Cursor::new(format!("0,100,1,0.2\n{input}")), &strict),
            Err(IngestError::MalformedRatio { malformed: 2, total: 4, .. })
        ));
    }

    const IU: u64 = 300 * 1_000_000;

    #[test]
    fn aggregate_one_task_one_interval() {
        let recs = vec![UsageRecord { start_us: 0, end_us: IU, machine_id: 1, usage: 0.4 }];
        let s = aggregate(&recs, 1, 300).unwrap();
        assert_eq!(s.values, vec![0.4]);
    }

    #[test]
    fn aggregate_is_additive_over_overlapping_tasks() {
        let recs = vec![
            UsageRecord { start_us: 0, end_us: IU, machine_id: 1, usage: 0.3 },
            UsageRecord { start_us: 0, end_us: IU, machine_id: 1, usage: 0.2 },
        ];
        let s = aggregate(&recs, 1, 300).unwrap();
        assert!((s.values[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn aggregate_half_overlap() {
        let recs =
            vec![UsageRecord { start_us: 0, end_us: IU / 2, machine_id: 1, usage: 0.4 }];
        let s = aggregate(&recs, 1, 300).unwrap();
        assert!((s.values[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn aggregate_forward_fills_gaps() {
        let recs = vec![
            UsageRecord { start_us: 0, end_us: IU, machine_id: 1, usage: 0.4 },
            UsageRecord { start_us: 3 * IU, end_us: 4 * IU, machine_id: 1, usage: 0.1 },
        ];
        let s = aggregate(&recs, 1, 300).unwrap();
        assert_eq!(s.values.len(), 4);
        assert!((s.values[1] - 0.4).abs() < 1e-12);
        assert!((s.values[2] - 0.4).abs() < 1e-12);
        assert!((s.values[3] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn aggregate_no_records_is_error() {
        assert!(matches!(aggregate(&[], 9, 300), Err(IngestError::EmptySeries(9))));
    }

    #[test]
    fn standardize_uses_train_stats() {
        let values = vec![1.0, 2.0, 3.0, 10.0, 20.0];
        let split = DatasetSplit { train: 0..3, validation: 3..4, test: 4..5 };
        let (z, scaler) = standardize(&values, &split).unwrap();
        assert!((scaler.mean - 2.0).abs() < 1e-15);
        let pop_std = (2.0_f64 / 3.0).sqrt();
        assert!((scaler.std - pop_std).abs() < 1e-15);
        assert!(z[1].abs() < 1e-15);
        // Validation standardized with TRAIN stats, not its own.
        assert!((z[3] - (10.0 - 2.0) / pop_std).abs() < 1e-12);
    }

    #[test]
    fn standardize_round_trips() {
        let values: Vec<f64> = (0..50).map(|k| (k as f64 * 0.21).sin() + 1.0).collect();
        let split = DatasetSplit { train: 0..30, validation: 30..40, test: 40..50 };
        let (z, scaler) = standardize(&values, &split).unwrap();
        for (orig, zv) in values.iter().zip(&z) {
            assert!((scaler.inverse(*zv) - orig).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_constant_train_is_error() {
        let values = vec![0.5; 10];
        let split = DatasetSplit { train: 0..5, validation: 5..8, test: 8..10 };
        assert!(matches!(standardize(&values, &split), Err(IngestError::ConstantSeries)));
    }

    #[test]
    fn split_arithmetic_for_29_days_at_5min() {
        let split = split_by_days(29 * 288, 288, DEFAULT_DAY_BOUNDARIES).unwrap();
        assert_eq!(split.train.len(), 5760);
        assert_eq!(split.validation.len(), 1728);
        assert_eq!(split.test.len(), 864);
    }

    #[test]
    fn split_too_short_is_error() {
        assert!(matches!(
            split_by_days(20 * 288, 288, DEFAULT_DAY_BOUNDARIES),
            Err(IngestError::TooShort { .. })
        ));
    }

    #[test]
    fn split_proportional_synthetic_days() {
        let split = split_by_days(290, 10, DEFAULT_DAY_BOUNDARIES).unwrap();
        assert_eq!(split.train.len(), 200);
        assert_eq!(split.validation.len(), 60);
        assert_eq!(split.test.len(), 30);
    }

    #[test]
    fn windows_enumeration() {
        let values: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let pairs = make_windows(&values, 0..10, 3, &Task::actual(2)).unwrap();
        assert_eq!(pairs.len(), 6);
        assert_eq!(pairs[0].0, vec![1.0, 2.0, 3.0]);
        assert_eq!(pairs[0].1, vec![4.0, 5.0]);
        assert_eq!(pairs[5].0, vec![6.0, 7.0, 8.0]);
        assert_eq!(pairs[5].1, vec![9.0, 10.0]);
    }

    #[test]
    fn windows_too_long_is_error() {
        let values = vec![0.0; 4];
        assert!(make_windows(&values, 0..4, 3, &Task::actual(2)).is_err());
    }

    #[test]
    fn windows_esp_targets() {
        let values: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let pairs = make_windows(&values, 0..10, 3, &Task::mean_load(2)).unwrap();
        // First window history [1,2,3], future [4,5] -> segment means [4,5].
        assert_eq!(pairs[0].1, vec![4.0, 5.0]);
    }

    #[test]
    fn sampling_is_deterministic_and_truncates() {
        let ids: Vec<u64> = (0..10).collect();
        let (a, _) = sample_machines(&ids, 3, 99);
        let (b, _) = sample_machines(&ids, 3, 99);
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        let (all, truncated) = sample_machines(&ids, 50, 1);
        assert_eq!(all.len(), 10);
        assert!(truncated);
    }

    #[test]
    fn series_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series-7.tsv");
        let series = MachineSeries {
            machine_id: 7,
            interval_seconds: 300,
            start_us: 600_000_000,
            values: vec![0.25, 0.5, 0.125],
        };
        write_series(&path, &series).unwrap();
        let loaded = read_series(&path, 7).unwrap();
        assert_eq!(loaded, series);
    }
}

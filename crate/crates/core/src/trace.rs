//! Trace parsing and per-period aggregation.
//!
//! Raw task records become [`TraceEvent`]s; a window of events becomes a
//! [`PeriodObservation`], the vector of per-sub-bin counts that the Poisson
//! fit consumes.

use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

pub const MICROS_PER_SECOND: i64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    /// Microseconds since the trace epoch.
    pub timestamp: i64,
    pub job_id: String,
    pub task_id: String,
    pub cpu_request: f64,
    pub mem_request: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    Arrivals,
    Cpu,
    Memory,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Arrivals, MetricKind::Cpu, MetricKind::Memory];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Arrivals => "arrivals",
            MetricKind::Cpu => "cpu",
            MetricKind::Memory => "memory",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "arrivals" | "tasks" => Ok(MetricKind::Arrivals),
            "cpu" => Ok(MetricKind::Cpu),
            "memory" | "mem" => Ok(MetricKind::Memory),
            other => Err(Error::config(format!("unknown metric `{other}`"))),
        }
    }
}

/// Count samples drawn from one target period for one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodObservation {
    /// 1-based position on the pattern period.
    pub tp_index: usize,
    /// 1-based pattern-period cycle.
    pub cycle_index: usize,
    pub metric: MetricKind,
    pub samples: Vec<u64>,
    pub sub_bin_seconds: u64,
    /// Multiplier applied to CPU/memory sums before rounding; 1 for arrivals.
    pub scale: f64,
}

impl PeriodObservation {
    /// True when every sub-bin is zero (an idle period).
    pub fn is_idle(&self) -> bool {
        self.samples.iter().all(|&s| s == 0)
    }
}

/// Where a trace column lives: by 0-based position or by header name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl FromStr for ColumnRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::config("empty column reference"));
        }
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone)]
pub struct TraceFormat {
    pub delimiter: u8,
    pub has_header: bool,
    pub timestamp: ColumnRef,
    pub cpu: ColumnRef,
    pub memory: ColumnRef,
    pub job: Option<ColumnRef>,
    pub task: Option<ColumnRef>,
}

impl Default for TraceFormat {
    /// `timestamp,job_id,task_id,cpu_request,mem_request`, comma separated,
    /// with a header row.
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
            timestamp: ColumnRef::Index(0),
            cpu: ColumnRef::Index(3),
            memory: ColumnRef::Index(4),
            job: Some(ColumnRef::Index(1)),
            task: Some(ColumnRef::Index(2)),
        }
    }
}

impl TraceFormat {
    /// Column layout of the Google cluster-usage `task_events` table
    /// (headerless; timestamp, job id, task index, CPU and memory request).
    pub fn google_task_events() -> Self {
        Self {
            delimiter: b',',
            has_header: false,
            timestamp: ColumnRef::Index(0),
            cpu: ColumnRef::Index(9),
            memory: ColumnRef::Index(10),
            job: Some(ColumnRef::Index(2)),
            task: Some(ColumnRef::Index(3)),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedTrace {
    pub events: Vec<TraceEvent>,
    pub rejected: usize,
    /// 1-based record numbers of rejected rows, header excluded.
    pub rejected_rows: Vec<usize>,
}

struct ResolvedColumns {
    timestamp: usize,
    cpu: usize,
    memory: usize,
    job: Option<usize>,
    task: Option<usize>,
}

fn resolve(col: &ColumnRef, header: Option<&csv::StringRecord>) -> Result<usize> {
    match (col, header) {
        (ColumnRef::Index(i), Some(h)) if *i >= h.len() => {
            Err(Error::MissingColumn(format!("#{i}")))
        }
        (ColumnRef::Index(i), _) => Ok(*i),
        (ColumnRef::Name(name), Some(h)) => h
            .iter()
            .position(|field| field.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.clone())),
        (ColumnRef::Name(name), None) => Err(Error::MissingColumn(name.clone())),
    }
}

/// Parse a delimited trace into events sorted by timestamp.
///
/// Rows with a non-integer or negative timestamp, or a non-numeric or
/// negative resource request, are skipped and tallied.
pub fn parse_trace<R: Read>(source: R, format: &TraceFormat) -> Result<ParsedTrace> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(format.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let header = if format.has_header { Some(reader.headers()?.clone()) } else { None };
    let cols = ResolvedColumns {
        timestamp: resolve(&format.timestamp, header.as_ref())?,
        cpu: resolve(&format.cpu, header.as_ref())?,
        memory: resolve(&format.memory, header.as_ref())?,
        job: format.job.as_ref().map(|c| resolve(c, header.as_ref())).transpose()?,
        task: format.task.as_ref().map(|c| resolve(c, header.as_ref())).transpose()?,
    };

    let mut parsed = ParsedTrace::default();
    for (row, record) in reader.records().enumerate() {
        let record = match record {
            Ok(r) => r,
            // Encoding problems are per-row noise; I/O failures are not.
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                parsed.rejected += 1;
                parsed.rejected_rows.push(row + 1);
                continue;
            }
        };
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match event_from_record(&record, &cols) {
            Some(event) => parsed.events.push(event),
            None => {
                parsed.rejected += 1;
                parsed.rejected_rows.push(row + 1);
            }
        }
    }
    parsed.events.sort_by_key(|e| e.timestamp);
    Ok(parsed)
}

fn event_from_record(record: &csv::StringRecord, cols: &ResolvedColumns) -> Option<TraceEvent> {
    let timestamp: i64 = record.get(cols.timestamp)?.parse().ok()?;
    let cpu_request = parse_request(record.get(cols.cpu)?)?;
    let mem_request = parse_request(record.get(cols.memory)?)?;
    if timestamp < 0 {
        return None;
    }
    let text = |idx: Option<usize>| {
        idx.and_then(|i| record.get(i)).unwrap_or_default().to_string()
    };
    Some(TraceEvent {
        timestamp,
        job_id: text(cols.job),
        task_id: text(cols.task),
        cpu_request,
        mem_request,
    })
}

fn parse_request(field: &str) -> Option<f64> {
    let v: f64 = field.parse().ok()?;
    (v.is_finite() && v >= 0.0).then_some(v)
}

/// Time span `[start, end)` in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: i64,
    pub end: i64,
}

impl Window {
    pub fn new(start: i64, end: i64) -> Self {
        Self { start, end }
    }
}

/// Per-sub-bin samples of `metric` over `window`.
///
/// Arrivals count events. CPU and memory sum the request per sub-bin and
/// record `round(scale * sum)`. `events` must be sorted by timestamp.
pub fn aggregate_samples(
    events: &[TraceEvent],
    window: Window,
    metric: MetricKind,
    sub_bin_seconds: u64,
    scale: f64,
) -> Result<Vec<u64>> {
    if window.end <= window.start {
        return Err(Error::invalid(format!(
            "window end {} must exceed start {}",
            window.end, window.start
        )));
    }
    if sub_bin_seconds == 0 {
        return Err(Error::invalid("sub-bin width must be positive"));
    }
    if metric != MetricKind::Arrivals && !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid(format!("scale must be positive, got {scale}")));
    }
    let bin_us = sub_bin_seconds as i64 * MICROS_PER_SECOND;
    let span = window.end - window.start;
    if span % bin_us != 0 {
        return Err(Error::invalid(format!(
            "window of {span} us is not a multiple of the {sub_bin_seconds} s sub-bin"
        )));
    }
    let bins = (span / bin_us) as usize;

    let lo = events.partition_point(|e| e.timestamp < window.start);
    let hi = events.partition_point(|e| e.timestamp < window.end);
    let in_window = &events[lo..hi];

    Ok(match metric {
        MetricKind::Arrivals => {
            let mut counts = vec![0u64; bins];
            for e in in_window {
                counts[((e.timestamp - window.start) / bin_us) as usize] += 1;
            }
            counts
        }
        MetricKind::Cpu | MetricKind::Memory => {
            let mut sums = vec![0.0f64; bins];
            for e in in_window {
                let v = if metric == MetricKind::Cpu { e.cpu_request } else { e.mem_request };
                sums[((e.timestamp - window.start) / bin_us) as usize] += v;
            }
            sums.into_iter().map(|s| (s * scale).round() as u64).collect()
        }
    })
}

/// Aggregate one target period into an observation tagged with its position.
pub fn aggregate_period(
    events: &[TraceEvent],
    window: Window,
    metric: MetricKind,
    sub_bin_seconds: u64,
    scale: f64,
    tp_index: usize,
    cycle_index: usize,
) -> Result<PeriodObservation> {
    let samples = aggregate_samples(events, window, metric, sub_bin_seconds, scale)?;
    Ok(PeriodObservation {
        tp_index,
        cycle_index,
        metric,
        samples,
        sub_bin_seconds,
        scale: if metric == MetricKind::Arrivals { 1.0 } else { scale },
    })
}

/// Slice a trace into consecutive target periods starting at `start_us`.
///
/// Step `k` (0-based) covers `[start + k*tp, start + (k+1)*tp)` and maps to
/// position `k mod pp_tps + 1` of cycle `k / pp_tps + 1`.
#[allow(clippy::too_many_arguments)]
pub fn aggregate_stream(
    events: &[TraceEvent],
    start_us: i64,
    tp_seconds: u64,
    tp_count: usize,
    pp_tps: usize,
    metric: MetricKind,
    sub_bin_seconds: u64,
    scale: f64,
) -> Result<Vec<PeriodObservation>> {
    if pp_tps == 0 {
        return Err(Error::config("pattern period must contain at least one target period"));
    }
    if sub_bin_seconds == 0 || !tp_seconds.is_multiple_of(sub_bin_seconds) {
        return Err(Error::config(format!(
            "target period of {tp_seconds} s is not a multiple of the {sub_bin_seconds} s sub-bin"
        )));
    }
    let tp_us = tp_seconds as i64 * MICROS_PER_SECOND;
    (0..tp_count)
        .map(|k| {
            let start = start_us + k as i64 * tp_us;
            aggregate_period(
                events,
                Window::new(start, start + tp_us),
                metric,
                sub_bin_seconds,
                scale,
                k % pp_tps + 1,
                k / pp_tps + 1,
            )
        })
        .collect()
}

/// Histogram of counts as `(lower edge, frequency)` pairs.
///
/// Bins start at the sample minimum and step by `bin_width` up to the
/// maximum; interior bins with no samples are kept with frequency zero.
pub fn build_histogram(samples: &[u64], bin_width: u64) -> Result<Vec<(u64, usize)>> {
    let (Some(&min), Some(&max)) = (samples.iter().min(), samples.iter().max()) else {
        return Err(Error::EmptySamples);
    };
    if bin_width == 0 {
        return Err(Error::invalid("histogram bin width must be positive"));
    }
    let bins = ((max - min) / bin_width + 1) as usize;
    let mut freq = vec![0usize; bins];
    for &s in samples {
        freq[((s - min) / bin_width) as usize] += 1;
    }
    Ok(freq
        .into_iter()
        .enumerate()
        .map(|(i, f)| (min + i as u64 * bin_width, f))
        .collect())
}

pub const OBSERVATION_HEADER: &str = "tp_index,cycle_index,metric,sub_bin_seconds,scale,samples";

/// Write observations, one record per target period.
pub fn write_observations<W: Write>(mut out: W, observations: &[PeriodObservation]) -> Result<()> {
    writeln!(out, "{OBSERVATION_HEADER}")?;
    for obs in observations {
        write!(
            out,
            "{},{},{},{},{},",
            obs.tp_index, obs.cycle_index, obs.metric, obs.sub_bin_seconds, obs.scale
        )?;
        let mut first = true;
        for s in &obs.samples {
            if !first {
                out.write_all(b" ")?;
            }
            write!(out, "{s}")?;
            first = false;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_observations<R: BufRead>(input: R) -> Result<Vec<PeriodObservation>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || (line_no == 1 && line.starts_with("tp_index")) {
            continue;
        }
        let err = |message: String| Error::Parse { line: line_no, message };
        let fields: Vec<&str> = line.splitn(6, ',').collect();
        if fields.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", fields.len())));
        }
        let int = |s: &str, what: &str| {
            s.trim().parse::<u64>().map_err(|_| err(format!("bad {what} `{s}`")))
        };
        let samples = fields[5]
            .split_whitespace()
            .map(|s| int(s, "sample"))
            .collect::<Result<Vec<u64>>>()?;
        if samples.is_empty() {
            return Err(err("no samples".into()));
        }
        out.push(PeriodObservation {
            tp_index: int(fields[0], "tp_index")? as usize,
            cycle_index: int(fields[1], "cycle_index")? as usize,
            metric: fields[2].parse().map_err(|_| err(format!("bad metric `{}`", fields[2])))?,
            sub_bin_seconds: int(fields[3], "sub_bin_seconds")?,
            scale: fields[4].trim().parse().map_err(|_| err(format!("bad scale `{}`", fields[4])))?,
            samples,
        });
    }
    Ok(out)
}

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default sampling period (5 minutes).
pub const DEFAULT_INTERVAL_SECONDS: u64 = 300;

/// Default activity threshold for [`TrafficMatrix::filter_active_flows`], in bps.
pub const DEFAULT_MIN_MEAN_BPS: f64 = 3.0;

/// Origin-destination pair identifying one flow.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowId {
    pub origin: String,
    pub dest: String,
}

impl FlowId {
    pub fn new(origin: impl Into<String>, dest: impl Into<String>) -> Self {
        Self { origin: origin.into(), dest: dest.into() }
    }

    /// Parses `origin-dest`; anything without a dash becomes an origin with an
    /// empty destination.
    pub fn parse(label: &str) -> Self {
        match label.split_once('-') {
            Some((o, d)) => Self::new(o.trim(), d.trim()),
            None => Self::new(label.trim(), ""),
        }
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dest.is_empty() {
            write!(f, "{}", self.origin)
        } else {
            write!(f, "{}-{}", self.origin, self.dest)
        }
    }
}

/// On-disk layouts accepted by [`TrafficMatrix::load`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    /// `timestamp,origin-dest,...` header, one comma-separated row per sample.
    Csv,
    /// Headerless whitespace-separated rows (one per sample), one column per
    /// OD flow, 5-minute cadence.
    Abilene,
}

/// How to treat empty or `NaN` cells while loading.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Reject,
    ForwardFill,
}

/// `M` flows by `T` samples of traffic volume (bps) at a fixed cadence.
///
/// Values are stored flow-major: `values[f * T + t]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficMatrix {
    flow_ids: Vec<FlowId>,
    interval_seconds: u64,
    start_timestamp: i64,
    n_samples: usize,
    values: Vec<f64>,
}

impl TrafficMatrix {
    pub fn new(
        flow_ids: Vec<FlowId>,
        interval_seconds: u64,
        start_timestamp: i64,
        n_samples: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != flow_ids.len() * n_samples {
            return Err(Error::Contract(format!(
                "{} flows x {n_samples} samples needs {} values, got {}",
                flow_ids.len(),
                flow_ids.len() * n_samples,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Contract(format!(
                "flow {} sample {} has invalid value {}",
                pos / n_samples.max(1),
                pos % n_samples.max(1),
                values[pos]
            )));
        }
        if interval_seconds == 0 {
            return Err(Error::Contract("interval must be positive".into()));
        }
        Ok(Self { flow_ids, interval_seconds, start_timestamp, n_samples, values })
    }

    /// Builds a matrix from per-flow series of equal length.
    pub fn from_flows(flow_ids: Vec<FlowId>, series: Vec<Vec<f64>>, interval_seconds: u64, start_timestamp: i64) -> Result<Self> {
        let t = series.first().map_or(0, Vec::len);
        if series.len() != flow_ids.len() || series.iter().any(|s| s.len() != t) {
            return Err(Error::Contract("ragged flow series".into()));
        }
        Self::new(flow_ids, interval_seconds, start_timestamp, t, series.concat())
    }

    pub fn n_flows(&self) -> usize {
        self.flow_ids.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn flow_ids(&self) -> &[FlowId] {
        &self.flow_ids
    }

    pub fn interval_seconds(&self) -> u64 {
        self.interval_seconds
    }

    pub fn start_timestamp(&self) -> i64 {
        self.start_timestamp
    }

    pub fn timestamp(&self, sample: usize) -> i64 {
        self.start_timestamp + (sample as i64) * self.interval_seconds as i64
    }

    pub fn flow(&self, f: usize) -> &[f64] {
        &self.values[f * self.n_samples..(f + 1) * self.n_samples]
    }

    pub fn value(&self, f: usize, t: usize) -> f64 {
        self.values[f * self.n_samples + t]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self, f: usize) -> f64 {
        let s = self.flow(f);
        if s.is_empty() {
            0.0
        } else {
            s.iter().sum::<f64>() / s.len() as f64
        }
    }

    /// Applies `f` to every value, keeping metadata.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.flow_ids.clone(),
            self.interval_seconds,
            self.start_timestamp,
            self.n_samples,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Sub-matrix with the given flows, in the given order.
    pub fn select_flows(&self, flows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(flows.len() * self.n_samples);
        for &f in flows {
            values.extend_from_slice(self.flow(f));
        }
        Self {
            flow_ids: flows.iter().map(|&f| self.flow_ids[f].clone()).collect(),
            interval_seconds: self.interval_seconds,
            start_timestamp: self.start_timestamp,
            n_samples: self.n_samples,
            values,
        }
    }

    /// Samples `[start, end)`; timestamps shift accordingly.
    pub fn slice_time(&self, start: usize, end: usize) -> Self {
        let end = end.min(self.n_samples);
        let start = start.min(end);
        let mut values = Vec::with_capacity(self.n_flows() * (end - start));
        for f in 0..self.n_flows() {
            values.extend_from_slice(&self.flow(f)[start..end]);
        }
        Self {
            flow_ids: self.flow_ids.clone(),
            interval_seconds: self.interval_seconds,
            start_timestamp: self.timestamp(start),
            n_samples: end - start,
            values,
        }
    }

    /// Keeps flows whose mean strictly exceeds `min_mean_bps`. Returns the
    /// filtered matrix and, for each kept flow, its index in `self`.
    pub fn filter_active_flows(&self, min_mean_bps: f64) -> Result<(Self, Vec<usize>)> {
        if !(min_mean_bps >= 0.0) {
            return Err(Error::Contract(format!("threshold {min_mean_bps} must be >= 0")));
        }
        let kept: Vec<usize> = (0..self.n_flows()).filter(|&f| self.mean(f) > min_mean_bps).collect();
        if kept.is_empty() {
            return Err(Error::EmptyResult { threshold: min_mean_bps });
        }
        Ok((self.select_flows(&kept), kept))
    }

    /// Contiguous prefix/suffix split; the prefix holds
    /// `floor(T * fraction)` samples.
    pub fn split_train_test(&self, fraction: f64) -> Result<(Self, Self)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::Contract(format!("split fraction {fraction} not in (0, 1)")));
        }
        let cut = (self.n_samples as f64 * fraction).floor() as usize;
        Ok((self.slice_time(0, cut), self.slice_time(cut, self.n_samples)))
    }

    /// SHA-256 over flow ids, cadence and the exact value bits.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for id in &self.flow_ids {
            h.update(id.to_string().as_bytes());
            h.update([0u8]);
        }
        h.update(self.interval_seconds.to_le_bytes());
        h.update(self.start_timestamp.to_le_bytes());
        h.update((self.n_samples as u64).to_le_bytes());
        for v in &self.values {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn load(path: &Path, format: MatrixFormat, missing: MissingPolicy) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        match format {
            MatrixFormat::Csv => parse_csv(BufReader::new(file), missing),
            MatrixFormat::Abilene => parse_abilene(BufReader::new(file), missing),
        }
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let mut header = String::from("timestamp");
        for id in &self.flow_ids {
            header.push(',');
            header.push_str(&id.to_string());
        }
        writeln!(out, "{header}")?;
        let mut line = String::new();
        for t in 0..self.n_samples {
            line.clear();
            line.push_str(&self.timestamp(t).to_string());
            for f in 0..self.n_flows() {
                line.push(',');
                line.push_str(&self.value(f, t).to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    let v: f64 = cell.parse().map_err(|_| Error::Parse {
        row,
        col,
        msg: format!("non-numeric cell {cell:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse { row, col, msg: format!("non-finite value {cell}") });
    }
    if v < 0.0 {
        return Err(Error::Parse { row, col, msg: format!("negative traffic {v}") });
    }
    Ok(Some(v))
}

/// Fills gaps according to `policy`; `rows[t][f]` with `None` for missing.
fn resolve_missing(rows: Vec<Vec<Option<f64>>>, n_flows: usize, policy: MissingPolicy, first_line: usize) -> Result<Vec<f64>> {
    let t_len = rows.len();
    let mut values = vec![0.0; n_flows * t_len];
    for f in 0..n_flows {
        let mut last: Option<f64> = None;
        // Leading gaps are back-filled from the first observed value.
        let first_seen = rows.iter().find_map(|r| r[f]);
        for (t, row) in rows.iter().enumerate() {
            let v = match (row[f], policy) {
                (Some(v), _) => v,
                (None, MissingPolicy::Reject) => {
                    return Err(Error::Parse {
                        row: first_line + t,
                        col: f + 1,
                        msg: "missing value".into(),
                    })
                }
                (None, MissingPolicy::ForwardFill) => match last.or(first_seen) {
                    Some(v) => v,
                    None => {
                        return Err(Error::Parse {
                            row: first_line + t,
                            col: f + 1,
                            msg: "flow has no observed values to fill from".into(),
                        })
                    }
                },
            };
            last = Some(v);
            values[f * t_len + t] = v;
        }
    }
    Ok(values)
}

fn parse_csv(reader: impl BufRead, missing: MissingPolicy) -> Result<TrafficMatrix> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(Error::Parse { row: 1, col: 1, msg: "empty file".into() }),
    };
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first().map(|c| c.trim()) != Some("timestamp") {
        return Err(Error::Parse { row: 1, col: 1, msg: "header must start with `timestamp`".into() });
    }
    let flow_ids: Vec<FlowId> = cols[1..].iter().map(|c| FlowId::parse(c)).collect();
    let mut timestamps = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let row_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(Error::Parse {
                row: row_no,
                col: cells.len().min(cols.len()) + 1,
                msg: format!("expected {} cells, found {}", cols.len(), cells.len()),
            });
        }
        let ts: i64 = cells[0].trim().parse().map_err(|_| Error::Parse {
            row: row_no,
            col: 1,
            msg: format!("bad timestamp {:?}", cells[0]),
        })?;
        timestamps.push(ts);
        let row = cells[1..]
            .iter()
            .enumerate()
            .map(|(c, cell)| parse_cell(cell, row_no, c + 2))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let interval = match timestamps.as_slice() {
        [a, b, ..] if b > a => (b - a) as u64,
        _ => DEFAULT_INTERVAL_SECONDS,
    };
    let start = timestamps.first().copied().unwrap_or(0);
    let n = rows.len();
    let values = resolve_missing(rows, flow_ids.len(), missing, 2)?;
    TrafficMatrix::new(flow_ids, interval, start, n, values)
}

fn parse_abilene(reader: impl BufRead, missing: MissingPolicy) -> Result<TrafficMatrix> {
    let mut rows = Vec::new();
    let mut width = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let row_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split_whitespace().collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::Parse {
                    row: row_no,
                    col: cells.len().min(w) + 1,
                    msg: format!("expected {w} columns, found {}", cells.len()),
                })
            }
            _ => {}
        }
        let row = cells
            .iter()
            .enumerate()
            .map(|(c, cell)| parse_cell(cell, row_no, c + 1))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let width = width.unwrap_or(0);
    let flow_ids = od_flow_names(width);
    let n = rows.len();
    let values = resolve_missing(rows, width, missing, 1)?;
    TrafficMatrix::new(flow_ids, DEFAULT_INTERVAL_SECONDS, 0, n, values)
}

/// Names columns as ordered node pairs when the count is `n * (n - 1)`
/// (all pairs without self-traffic), else `f0, f1, ...`.
fn od_flow_names(width: usize) -> Vec<FlowId> {
    let n = (1..=width).find(|n| n * (n - 1) == width);
    match n {
        Some(n) if n > 1 => (0..n)
            .flat_map(|o| (0..n).filter(move |&d| d != o).map(move |d| (o, d)))
            .map(|(o, d)| FlowId::new(format!("n{o}"), format!("n{d}")))
            .collect(),
        _ => (0..width).map(|i| FlowId::new(format!("f{i}"), "")).collect(),
    }
}

//! Series, window and lag-matrix types.
//!
//! All public APIs speak absolute 1-based indices: a series with
//! `start_index = s` holds the values `y_s, ..., y_{s+n-1}`.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BapcError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    start_index: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl TimeSeries {
    /// A series indexed from 1.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_start(values, 1)
    }

    pub fn with_start(values: Vec<f64>, start_index: i64) -> Result<Self> {
        if values.is_empty() {
            return Err(BapcError::InvalidSeries("series must have at least one value".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(BapcError::InvalidSeries(format!(
                "non-finite value at t={}",
                start_index + pos as i64
            )));
        }
        Ok(TimeSeries {
            values,
            start_index,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.values.len() {
            return Err(BapcError::InvalidSeries(format!(
                "{} labels for {} values",
                labels.len(),
                self.values.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start_index(&self) -> i64 {
        self.start_index
    }

    pub fn end_index(&self) -> i64 {
        self.start_index + self.values.len() as i64 - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, t: i64) -> Option<&str> {
        let pos = self.position(t)?;
        self.labels.as_ref().map(|l| l[pos].as_str())
    }

    pub fn contains(&self, t: i64) -> bool {
        t >= self.start_index && t <= self.end_index()
    }

    fn position(&self, t: i64) -> Option<usize> {
        self.contains(t).then(|| (t - self.start_index) as usize)
    }

    /// Value at absolute index `t`.
    pub fn get(&self, t: i64) -> Option<f64> {
        self.position(t).map(|p| self.values[p])
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        self.start_index..=self.end_index()
    }

    /// `(t, y_t)` pairs in index order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.start_index + i as i64, v))
    }

    /// Contiguous sub-series `[first, last]`, keeping absolute indices.
    pub fn slice(&self, first: i64, last: i64) -> Result<TimeSeries> {
        if first > last || !self.contains(first) || !self.contains(last) {
            return Err(BapcError::Range {
                first,
                last,
                start: self.start_index,
                end: self.end_index(),
            });
        }
        let a = (first - self.start_index) as usize;
        let b = (last - self.start_index) as usize;
        Ok(TimeSeries {
            values: self.values[a..=b].to_vec(),
            start_index: first,
            labels: self.labels.as_ref().map(|l| l[a..=b].to_vec()),
        })
    }

    /// Same indices and labels, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<TimeSeries> {
        if values.len() != self.values.len() {
            return Err(BapcError::InvalidSeries(format!(
                "expected {} values, got {}",
                self.values.len(),
                values.len()
            )));
        }
        let mut out = TimeSeries::with_start(values, self.start_index)?;
        out.labels = self.labels.clone();
        Ok(out)
    }
}

/// Training window of size `n` whose most recent `r` samples form the
/// correction window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub train_size: usize,
    pub correction_size: usize,
}

impl WindowConfig {
    pub fn new(train_size: usize, correction_size: usize) -> Result<Self> {
        if train_size == 0 {
            return Err(BapcError::Config("training window size must be positive".into()));
        }
        if correction_size > train_size {
            return Err(BapcError::Config(format!(
                "correction window r={correction_size} exceeds training window n={train_size}"
            )));
        }
        Ok(WindowConfig {
            train_size,
            correction_size,
        })
    }

    /// First absolute index of the correction window for a training window
    /// that starts at `start`. Equal to `start + n` when `r = 0`.
    pub fn correction_start(&self, start: i64) -> i64 {
        start + (self.train_size - self.correction_size) as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagRow {
    pub t: i64,
    pub target: f64,
    /// `(x_{t-1}, ..., x_{t-p})`, most recent first.
    pub lags: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagMatrix {
    pub order: usize,
    pub rows: Vec<LagRow>,
}

impl LagMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Rows `t = start + p, ..., end` of lagged regressors of order `p`.
pub fn build_lag_matrix(series: &TimeSeries, p: usize) -> Result<LagMatrix> {
    if p == 0 {
        return Err(BapcError::Config("lag order must be at least 1".into()));
    }
    let n = series.len();
    if p >= n {
        return Err(BapcError::InsufficientData(format!(
            "lag order {p} needs more than {p} values, series has {n}"
        )));
    }
    let v = series.values();
    let rows = (p..n)
        .map(|i| LagRow {
            t: series.start_index() + i as i64,
            target: v[i],
            lags: (1..=p).map(|k| v[i - k]).collect(),
        })
        .collect();
    Ok(LagMatrix { order: p, rows })
}

fn parse_number(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| BapcError::Format(format!("line {line}: non-numeric value {field:?}")))
}

/// Reads a one- or two-column CSV (`value`, `t,value` or `label,value`).
/// A leading non-numeric row is treated as a header.
pub fn read_series_csv<R: Read>(reader: R) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let mut records = Vec::new();
    for rec in rdr.records() {
        records.push(rec?);
    }
    if records.is_empty() {
        return Err(BapcError::Format("empty CSV".into()));
    }
    let width = records[0].len();
    if width == 0 || width > 2 {
        return Err(BapcError::Format(format!("expected 1 or 2 columns, found {width}")));
    }
    let value_col = width - 1;
    let has_header = records[0][value_col].parse::<f64>().is_err();
    let mut label_kind = if width == 2 { Some("t") } else { None };
    if has_header && width == 2 {
        let first = records[0][0].to_ascii_lowercase();
        label_kind = match first.as_str() {
            "t" => Some("t"),
            "label" => Some("label"),
            other => {
                return Err(BapcError::Format(format!(
                    "unsupported header column {other:?}; expected `t` or `label`"
                )))
            }
        };
    }
    let body = if has_header { &records[1..] } else { &records[..] };
    if body.is_empty() {
        return Err(BapcError::Format("CSV has a header but no data".into()));
    }
    let offset = usize::from(has_header) + 1;
    let mut values = Vec::with_capacity(body.len());
    let mut ts = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in body.iter().enumerate() {
        let line = i + offset;
        values.push(parse_number(&rec[value_col], line)?);
        match label_kind {
            Some("t") => {
                let t = rec[0]
                    .trim()
                    .parse::<i64>()
                    .map_err(|_| BapcError::Format(format!("line {line}: non-integer index {:?}", &rec[0])))?;
                ts.push(t);
            }
            Some(_) => labels.push(rec[0].to_string()),
            None => {}
        }
    }
    let start = ts.first().copied().unwrap_or(1);
    if let Some(w) = ts.windows(2).find(|w| w[1] != w[0] + 1) {
        return Err(BapcError::Format(format!(
            "indices must be consecutive; {} is followed by {}",
            w[0], w[1]
        )));
    }
    let series = TimeSeries::with_start(values, start)?;
    if labels.is_empty() {
        Ok(series)
    } else {
        series.with_labels(labels)
    }
}

pub fn read_series_csv_path(path: &Path) -> Result<TimeSeries> {
    let file = std::fs::File::open(path)?;
    read_series_csv(file)
}

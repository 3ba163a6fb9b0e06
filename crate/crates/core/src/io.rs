//! Dataset loaders and reproducible artifact writers.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{BapcError, Result};
use crate::series::TimeSeries;

/// Monthly international airline passenger totals, January 1949 to
/// December 1960 (thousands).
pub const AIR_PASSENGERS_CSV: &str = include_str!("../data/airpassengers.csv");

pub const AIR_PASSENGERS_ROWS: usize = 144;

/// Formats with 17 significant digits so values round-trip exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_month(label: &str, line: usize) -> Result<(i32, u32)> {
    let bad = || BapcError::Format(format!("line {line}: month {label:?} is not YYYY-MM"));
    let (y, m) = label.trim().split_once('-').ok_or_else(bad)?;
    let year = y.parse::<i32>().map_err(|_| bad())?;
    let month = m.parse::<u32>().map_err(|_| bad())?;
    if !(1..=12).contains(&month) || m.len() != 2 {
        return Err(bad());
    }
    Ok((year, month))
}

/// Reads `month,passengers` rows and checks for 144 consecutive months.
pub fn load_air_passengers<R: Read>(reader: R) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "month" || &headers[1] != "passengers" {
        return Err(BapcError::Format(format!(
            "expected header `month,passengers`, found {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut previous: Option<(i32, u32)> = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let month = parse_month(&rec[0], line)?;
        if let Some((y, m)) = previous {
            let expected = if m == 12 { (y + 1, 1) } else { (y, m + 1) };
            if month != expected {
                return Err(BapcError::Format(format!(
                    "line {line}: month {} does not follow {y}-{m:02}",
                    &rec[0]
                )));
            }
        }
        previous = Some(month);
        let v = rec[1]
            .parse::<f64>()
            .map_err(|_| BapcError::Format(format!("line {line}: non-numeric count {:?}", &rec[1])))?;
        labels.push(rec[0].to_string());
        values.push(v);
    }
    if values.len() != AIR_PASSENGERS_ROWS {
        return Err(BapcError::Format(format!(
            "expected {AIR_PASSENGERS_ROWS} monthly rows, found {}",
            values.len()
        )));
    }
    TimeSeries::new(values)?.with_labels(labels)
}

pub fn load_air_passengers_path(path: &Path) -> Result<TimeSeries> {
    load_air_passengers(std::fs::File::open(path)?)
}

/// The bundled copy of the passenger data.
pub fn air_passengers() -> TimeSeries {
    load_air_passengers(AIR_PASSENGERS_CSV.as_bytes()).expect("bundled dataset is valid")
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| BapcError::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// A CSV body with a header line and rows of preformatted fields.
#[derive(Debug, Default, Clone)]
pub struct CsvText {
    text: String,
}

impl CsvText {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        CsvText { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn index_value_row(&mut self, keys: &[i64], value: f64) {
        for k in keys {
            let _ = write!(self.text, "{k},");
        }
        self.text.push_str(&fmt_f64(value));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.text.as_bytes())
    }
}

/// `t,value` CSV of a series.
pub fn series_csv(series: &TimeSeries) -> CsvText {
    let mut csv = CsvText::new(&["t", "value"]);
    for (t, v) in series.iter() {
        csv.index_value_row(&[t], v);
    }
    csv
}

/// `s,t,<column>` CSV of a sparse matrix.
pub fn matrix_csv(column: &str, cells: &[(i64, i64, f64)]) -> CsvText {
    let mut csv = CsvText::new(&["s", "t", column]);
    for &(s, t, v) in cells {
        csv.index_value_row(&[s, t], v);
    }
    csv
}

/// `lag_index,coefficient` CSV; lag 1 is the most recent.
pub fn lime_csv(coefficients: &[f64]) -> CsvText {
    let mut csv = CsvText::new(&["lag_index", "coefficient"]);
    for (i, c) in coefficients.iter().enumerate() {
        csv.index_value_row(&[i as i64 + 1], *c);
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_passenger_data() {
        let s = air_passengers();
        assert_eq!(s.len(), 144);
        assert_eq!(s.label(1), Some("1949-01"));
        assert_eq!(s.label(144), Some("1960-12"));
        assert_eq!(s.values().iter().sum::<f64>(), 40363.0);
    }

    #[test]
    fn short_file_is_rejected() {
        let text: String = AIR_PASSENGERS_CSV.lines().take(144).map(|l| format!("{l}\n")).collect();
        assert!(matches!(load_air_passengers(text.as_bytes()), Err(BapcError::Format(_))));
    }

    #[test]
    fn out_of_order_months_are_rejected() {
        let text = "month,passengers\n1949-01,1\n1949-03,2\n";
        assert!(matches!(load_air_passengers(text.as_bytes()), Err(BapcError::Format(_))));
        let text = "month,passengers\n1949-02,1\n1949-01,2\n";
        assert!(matches!(load_air_passengers(text.as_bytes()), Err(BapcError::Format(_))));
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        let x = std::f64::consts::PI / 7.0;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn csv_layouts() {
        assert_eq!(matrix_csv("ig", &[(5, 3, 0.5)]).as_str(), "s,t,ig\n5,3,5.0000000000000000e-1\n");
        assert_eq!(lime_csv(&[1.0]).as_str(), "lag_index,coefficient\n1,1.0000000000000000e0\n");
    }
}

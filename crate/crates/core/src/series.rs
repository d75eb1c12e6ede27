//! Price ingestion and log-return construction.
//!
//! Input files are delimited text with a header row. The delimiter is
//! detected from the header line (tab if present, comma otherwise) and dates
//! are ISO-8601 (`YYYY-MM-DD`).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PricePoint {
    pub date: NaiveDate,
    pub close: f64,
}

/// Log-return series with the date of the later observation of each pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnSeries {
    pub id: String,
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<f64>,
    pub source: String,
}

/// Names of the date column and the value column (close price, or the
/// return itself when the file already holds returns).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMapping {
    pub date_col: String,
    pub value_col: String,
}

impl ColumnMapping {
    pub fn new(date_col: impl Into<String>, value_col: impl Into<String>) -> Self {
        Self { date_col: date_col.into(), value_col: value_col.into() }
    }
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self::new("date", "close")
    }
}

impl ReturnSeries {
    pub fn new(
        id: impl Into<String>,
        dates: Vec<NaiveDate>,
        returns: Vec<f64>,
        source: impl Into<String>,
    ) -> Result<Self> {
        if dates.len() != returns.len() {
            return Err(Error::Domain(format!("{} dates but {} returns", dates.len(), returns.len())));
        }
        if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
            return Err(Error::DataQuality(format!("non-finite return at position {i}")));
        }
        Ok(Self { id: id.into(), dates, returns, source: source.into() })
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    /// Sub-series of `len` observations starting at `start`.
    pub fn window(&self, start: usize, len: usize) -> ReturnSeries {
        let end = (start + len).min(self.len());
        ReturnSeries {
            id: self.id.clone(),
            dates: self.dates[start..end].to_vec(),
            returns: self.returns[start..end].to_vec(),
            source: self.source.clone(),
        }
    }

    /// Writes the series as `date,return` rows. Values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "date,return")?;
        for (d, r) in self.dates.iter().zip(&self.returns) {
            writeln!(out, "{},{}", d.format("%Y-%m-%d"), r)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn detect_delimiter(header: &str) -> u8 {
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

/// Parses `(date, value)` rows from a delimited reader, keeping file order.
fn read_rows<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<Vec<(u64, NaiveDate, f64)>> {
    let mut buffered = BufReader::new(reader);
    let mut header = String::new();
    buffered.read_line(&mut header)?;
    if header.trim().is_empty() {
        return Err(Error::Empty);
    }
    let delimiter = detect_delimiter(&header);
    let chained = header.as_bytes().chain(buffered);
    let mut rdr =
        csv::ReaderBuilder::new().delimiter(delimiter).has_headers(true).trim(csv::Trim::All).from_reader(chained);

    let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column '{name}' (have: {})", headers.iter().collect::<Vec<_>>().join(", ")),
        })
    };
    let date_idx = find(&mapping.date_col)?;
    let value_idx = find(&mapping.value_col)?;

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record
            .map_err(|e| Error::Parse { line: e.position().map(|p| p.line()).unwrap_or(0), message: e.to_string() })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line, message };
        let date_raw = record.get(date_idx).ok_or_else(|| parse_err("missing date field".into()))?;
        let value_raw = record.get(value_idx).ok_or_else(|| parse_err("missing value field".into()))?;
        let date = NaiveDate::parse_from_str(date_raw, "%Y-%m-%d")
            .map_err(|e| parse_err(format!("bad date '{date_raw}': {e}")))?;
        let value: f64 = value_raw.parse().map_err(|_| parse_err(format!("bad number '{value_raw}'")))?;
        rows.push((line, date, value));
    }
    if rows.is_empty() {
        return Err(Error::Empty);
    }
    Ok(rows)
}

fn sort_unique<T>(mut rows: Vec<(NaiveDate, T)>) -> Result<Vec<(NaiveDate, T)>> {
    rows.sort_by_key(|r| r.0);
    let mut seen = HashSet::with_capacity(rows.len());
    for (d, _) in &rows {
        if !seen.insert(*d) {
            return Err(Error::DuplicateDate(*d));
        }
    }
    Ok(rows)
}

/// Reads close prices, sorted ascending by date.
pub fn read_prices<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<Vec<PricePoint>> {
    let rows = read_rows(reader, mapping)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, date, close) in rows {
        if !close.is_finite() {
            return Err(Error::Parse { line, message: format!("non-finite price '{close}'") });
        }
        if close <= 0.0 {
            return Err(Error::NonPositivePrice { date, close });
        }
        out.push((date, close));
    }
    Ok(sort_unique(out)?.into_iter().map(|(date, close)| PricePoint { date, close }).collect())
}

pub fn load_prices(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<Vec<PricePoint>> {
    read_prices(File::open(path)?, mapping)
}

/// Reads a file that already holds returns (skips the log-ratio step).
pub fn read_returns<R: Read>(reader: R, mapping: &ColumnMapping, id: &str, source: &str) -> Result<ReturnSeries> {
    let rows = read_rows(reader, mapping)?.into_iter().map(|(_, d, r)| (d, r)).collect();
    let rows = sort_unique(rows)?;
    let (dates, returns) = rows.into_iter().unzip();
    ReturnSeries::new(id, dates, returns, source)
}

pub fn load_returns(path: impl AsRef<Path>, mapping: &ColumnMapping, id: &str) -> Result<ReturnSeries> {
    let path = path.as_ref();
    read_returns(File::open(path)?, mapping, id, &path.display().to_string())
}

/// `returns[t] = ln(close[t+1] / close[t])`, dated by the later observation.
pub fn to_log_returns(id: &str, source: &str, prices: &[PricePoint]) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: prices.len() });
    }
    let (dates, returns) = prices.windows(2).map(|w| (w[1].date, (w[1].close / w[0].close).ln())).unzip();
    ReturnSeries::new(id, dates, returns, source)
}

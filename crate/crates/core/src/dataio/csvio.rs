use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{Column, MonthlyPanel, Observation, TimeSeries};
use crate::error::{Error, Result};

/// Column layout of a single-series CSV snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub date_column: String,
    pub value_column: String,
    /// strftime pattern; ISO-8601 (`%Y-%m-%d`) when absent.
    pub date_format: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self { date_column: "date".into(), value_column: "value".into(), date_format: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSeries {
    pub series: TimeSeries,
    /// Rows skipped because the value cell was empty or `null`.
    pub dropped_rows: usize,
}

/// Loads one series from a CSV file; the series is named after the file stem.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LoadedSeries> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".to_string());
    let file = std::fs::File::open(path)?;
    read_csv(file, &name, schema)
}

pub fn read_csv<R: Read>(reader: R, name: &str, schema: &CsvSchema) -> Result<LoadedSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |col: &str| {
        headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::MissingColumn(col.to_string()))
    };
    let date_idx = find(&schema.date_column)?;
    let value_idx = find(&schema.value_column)?;
    let fmt = schema.date_format.as_deref().unwrap_or("%Y-%m-%d");

    let mut points = Vec::new();
    let mut dropped_rows = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let raw_date = record.get(date_idx).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, fmt)
            .map_err(|_| Error::UnparseableDate { row, value: raw_date.to_string() })?;
        let raw_value = record.get(value_idx).unwrap_or("");
        if raw_value.is_empty() || raw_value.eq_ignore_ascii_case("null") {
            dropped_rows += 1;
            continue;
        }
        let value: f64 = raw_value
            .parse()
            .map_err(|_| Error::NonFiniteValue { row, value: raw_value.to_string() })?;
        if !value.is_finite() {
            return Err(Error::NonFiniteValue { row, value: raw_value.to_string() });
        }
        points.push(Observation { date, value });
    }
    if points.is_empty() {
        return Err(Error::EmptyAfterCleaning(name.to_string()));
    }
    Ok(LoadedSeries { series: TimeSeries::new(name, points)?, dropped_rows })
}

/// Writes `date,value` rows.
pub fn write_series_csv<W: Write>(series: &TimeSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "value"])?;
    for p in series.points() {
        w.write_record([p.date.format("%Y-%m-%d").to_string(), p.value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the panel with a leading `month` column (`YYYY-MM-01`).
///
/// Values use the shortest representation that parses back to the same
/// `f64`, so reading the file back reproduces the panel exactly.
pub fn write_panel_csv<W: Write>(panel: &MonthlyPanel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["month".to_string()];
    header.extend(panel.columns().iter().map(|c| c.name.clone()));
    w.write_record(&header)?;
    for (i, m) in panel.months().iter().enumerate() {
        let mut rec = vec![m.format("%Y-%m-%d").to_string()];
        rec.extend(panel.columns().iter().map(|c| c.values[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_panel_csv<R: Read>(reader: R) -> Result<MonthlyPanel> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("month") {
        return Err(Error::MissingColumn("month".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut months = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let raw = record.get(0).unwrap_or("");
        let m = NaiveDate::parse_from_str(raw, "%Y-%m-%d")
            .map_err(|_| Error::UnparseableDate { row, value: raw.to_string() })?;
        months.push(m);
        for (j, col) in values.iter_mut().enumerate() {
            let cell = record.get(j + 1).unwrap_or("");
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::NonFiniteValue { row, value: cell.to_string() })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row, value: cell.to_string() });
            }
            col.push(v);
        }
    }
    let columns = names
        .into_iter()
        .zip(values)
        .map(|(name, values)| Column { name, values })
        .collect();
    MonthlyPanel::new(months, columns)
}

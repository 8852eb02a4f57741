//! Series ingestion, calendar alignment and the monthly panel.
//!
//! Daily index closes are reduced to one value per month by taking the close
//! on the first of the month, or the most recent earlier trading day when the
//! first is a weekend or market holiday. Monthly series are then intersected
//! on their common month range to form a [`MonthlyPanel`].

mod calendar;
mod csvio;
pub mod synthetic;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use calendar::{align_to_month_start, month_start, months_in_range, next_month, to_monthly};
pub use csvio::{load_csv, read_csv, read_panel_csv, write_panel_csv, write_series_csv, CsvSchema, LoadedSeries};
pub use synthetic::{
    generate_synthetic, generate_synthetic_panel, synthetic_months, SyntheticPanel, SyntheticPanelSpec, SyntheticSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub date: NaiveDate,
    pub value: f64,
}

/// A named, dated sequence of finite observations with strictly increasing dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    name: String,
    units: Option<String>,
    points: Vec<Observation>,
    /// How the dates were produced (raw file, month-start alignment, ...).
    provenance: String,
}

impl TimeSeries {
    /// Builds a series from observations in any order. Points are sorted by
    /// date; duplicate dates and non-finite values are rejected.
    pub fn new(name: impl Into<String>, mut points: Vec<Observation>) -> Result<Self> {
        let name = name.into();
        if points.is_empty() {
            return Err(Error::EmptyAfterCleaning(name));
        }
        if let Some(p) = points.iter().position(|p| !p.value.is_finite()) {
            return Err(Error::NonFiniteValue { row: p + 1, value: points[p].value.to_string() });
        }
        points.sort_by_key(|p| p.date);
        if let Some(w) = points.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(Error::DuplicateDate(w[0].date));
        }
        Ok(Self { name, units: None, points, provenance: "raw".to_string() })
    }

    pub fn from_values(name: impl Into<String>, dates: &[NaiveDate], values: &[f64]) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::LengthMismatch { left: dates.len(), right: values.len() });
        }
        let points = dates
            .iter()
            .zip(values)
            .map(|(&date, &value)| Observation { date, value })
            .collect();
        Self::new(name, points)
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = Some(units.into());
        self
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn units(&self) -> Option<&str> {
        self.units.as_deref()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn points(&self) -> &[Observation] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.points.iter().map(|p| p.date).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn first_date(&self) -> NaiveDate {
        self.points[0].date
    }

    pub fn last_date(&self) -> NaiveDate {
        self.points[self.points.len() - 1].date
    }
}

/// A named column of a [`MonthlyPanel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// Month-aligned series sharing one calendar. Column order is the order the
/// series were supplied in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyPanel {
    months: Vec<NaiveDate>,
    columns: Vec<Column>,
    provenance: BTreeMap<String, String>,
}

impl MonthlyPanel {
    pub fn new(months: Vec<NaiveDate>, columns: Vec<Column>) -> Result<Self> {
        if months.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec("panel months must be strictly increasing".into()));
        }
        for c in &columns {
            if c.values.len() != months.len() {
                return Err(Error::LengthMismatch { left: months.len(), right: c.values.len() });
            }
        }
        Ok(Self { months, columns, provenance: BTreeMap::new() })
    }

    pub fn months(&self) -> &[NaiveDate] {
        &self.months
    }

    pub fn len(&self) -> usize {
        self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.months.is_empty()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::UnknownSeries(name.to_string()))
    }

    pub fn provenance(&self) -> &BTreeMap<String, String> {
        &self.provenance
    }

    /// Appends a column; its length must match the month list.
    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.months.len() {
            return Err(Error::LengthMismatch { left: self.months.len(), right: values.len() });
        }
        self.columns.push(Column { name: name.into(), values });
        Ok(())
    }

    /// Rows `[start, end)` as a new panel.
    pub fn slice(&self, start: usize, end: usize) -> MonthlyPanel {
        MonthlyPanel {
            months: self.months[start..end].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|c| Column { name: c.name.clone(), values: c.values[start..end].to_vec() })
                .collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Intersects monthly series on their common month range.
///
/// Every input must already be monthly (dated on the first of the month) and
/// contiguous inside the overlap.
pub fn merge_panel(series: &[TimeSeries]) -> Result<MonthlyPanel> {
    if series.is_empty() {
        return Err(Error::NoOverlap);
    }
    for s in series {
        if s.points().iter().any(|p| month_start(p.date) != p.date) {
            return Err(Error::NotMonthly(s.name().to_string()));
        }
    }
    let start = series.iter().map(|s| s.first_date()).max().unwrap();
    let end = series.iter().map(|s| s.last_date()).min().unwrap();
    if start > end {
        return Err(Error::NoOverlap);
    }
    let months = months_in_range(start, end);
    let mut columns = Vec::with_capacity(series.len());
    let mut provenance = BTreeMap::new();
    for s in series {
        let lookup: BTreeMap<NaiveDate, f64> = s.points().iter().map(|p| (p.date, p.value)).collect();
        let values = months
            .iter()
            .map(|m| {
                lookup.get(m).copied().ok_or_else(|| Error::MissingMonth {
                    series: s.name().to_string(),
                    month: *m,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        columns.push(Column { name: s.name().to_string(), values });
        provenance.insert(s.name().to_string(), s.provenance().to_string());
    }
    Ok(MonthlyPanel { months, columns, provenance })
}

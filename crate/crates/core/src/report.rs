//! Accuracy metrics, the per-commodity comparison, and the CSV/JSON outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LSTM_WITH: &str = "LSTM with outliers";
pub const LSTM_WITHOUT: &str = "LSTM without outliers";

pub fn rmse(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    if y_hat.len() != y.len() {
        return Err(Error::LengthMismatch { left: y_hat.len(), right: y.len() });
    }
    if y.is_empty() {
        return Err(Error::Empty);
    }
    let sse: f64 = y_hat.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// `1 - SS_res / SS_tot`; negative when the prediction is worse than the mean.
pub fn r2(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    if y_hat.len() != y.len() {
        return Err(Error::LengthMismatch { left: y_hat.len(), right: y.len() });
    }
    if y.len() < 2 {
        return Err(Error::TooFewPoints { got: y.len(), needed: 2 });
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ConstantTarget);
    }
    let ss_res: f64 = y_hat.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub commodity: String,
    pub model: String,
    /// RMSE on min-max scaled production.
    pub rmse_scaled: f64,
    /// RMSE in production units.
    pub rmse: f64,
    pub r2: Option<f64>,
    pub prediction_last: f64,
    pub paired_indices: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub data_hashes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub commodity: String,
    pub best_baseline: String,
    pub best_baseline_rmse: f64,
    pub rmse_with: f64,
    pub rmse_without: f64,
    /// Every contender sharing the lowest scaled RMSE.
    pub winners: Vec<String>,
    pub tie: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub commodities: usize,
    pub baseline_wins: usize,
    pub lstm_with_wins: usize,
    pub lstm_without_wins: usize,
    pub ties: usize,
    /// Commodities where the LSTM with outlier flags beat the one without.
    pub with_beats_without: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub summary: ComparisonSummary,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub metadata: ReportMetadata,
    pub comparison: Option<Comparison>,
}

impl EvalReport {
    pub fn from_rows(rows: Vec<EvalRow>) -> Self {
        Self { rows, ..Default::default() }
    }

    pub fn commodities(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.commodity.as_str()).collect()
    }

    pub fn row(&self, commodity: &str, model: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.commodity == commodity && r.model == model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Merges per-model fragments and ranks, for each commodity, the best
/// baseline against both LSTM variants by scaled RMSE. Commodity order
/// follows the first fragment.
pub fn build_comparison(fragments: &[EvalReport]) -> Result<EvalReport> {
    let first = fragments.first().ok_or(Error::Empty)?;
    let commodities = first.commodities();
    if fragments.iter().any(|f| f.commodities() != commodities) {
        return Err(Error::CommoditySetMismatch);
    }
    let mut order: Vec<String> = Vec::new();
    for r in &first.rows {
        if !order.contains(&r.commodity) {
            order.push(r.commodity.clone());
        }
    }
    let merged = EvalReport {
        rows: fragments.iter().flat_map(|f| f.rows.iter().cloned()).collect(),
        metadata: first.metadata.clone(),
        comparison: None,
    };
    let mut rows = Vec::new();
    let mut summary = ComparisonSummary { commodities: order.len(), ..Default::default() };
    for c in &order {
        let lookup = |model: &str| merged.row(c, model).ok_or(Error::CommoditySetMismatch);
        let with = lookup(LSTM_WITH)?;
        let without = lookup(LSTM_WITHOUT)?;
        let best = merged
            .rows
            .iter()
            .filter(|r| &r.commodity == c && r.model != LSTM_WITH && r.model != LSTM_WITHOUT)
            .fold(None::<&EvalRow>, |acc, r| match acc {
                Some(b) if b.rmse_scaled <= r.rmse_scaled => Some(b),
                _ => Some(r),
            })
            .ok_or(Error::CommoditySetMismatch)?;
        let contenders =
            [(best.model.as_str(), best.rmse_scaled), (LSTM_WITH, with.rmse_scaled), (LSTM_WITHOUT, without.rmse_scaled)];
        let lowest = contenders.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let winners: Vec<String> = contenders.iter().filter(|c| c.1 == lowest).map(|c| c.0.to_string()).collect();
        let tie = winners.len() > 1;
        if tie {
            summary.ties += 1;
        } else if winners[0] == LSTM_WITH {
            summary.lstm_with_wins += 1;
        } else if winners[0] == LSTM_WITHOUT {
            summary.lstm_without_wins += 1;
        } else {
            summary.baseline_wins += 1;
        }
        if with.rmse_scaled < without.rmse_scaled {
            summary.with_beats_without += 1;
        }
        rows.push(ComparisonRow {
            commodity: c.clone(),
            best_baseline: best.model.clone(),
            best_baseline_rmse: best.rmse_scaled,
            rmse_with: with.rmse_scaled,
            rmse_without: without.rmse_scaled,
            winners,
            tie,
        });
    }
    Ok(EvalReport { comparison: Some(Comparison { rows, summary }), ..merged })
}

/// Four numbers per commodity: scaled RMSE and last-month prediction for each
/// LSTM variant.
pub fn write_table5<W: Write>(report: &EvalReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["commodity", "paired_indices", "rmse_with", "prediction_with", "rmse_without", "prediction_without"])?;
    let mut seen = BTreeSet::new();
    for r in report.rows.iter().filter(|r| r.model == LSTM_WITH) {
        if !seen.insert(r.commodity.as_str()) {
            continue;
        }
        let without = report.row(&r.commodity, LSTM_WITHOUT).ok_or(Error::CommoditySetMismatch)?;
        w.write_record([
            r.commodity.clone(),
            r.paired_indices.join(";"),
            r.rmse_scaled.to_string(),
            r.prediction_last.to_string(),
            without.rmse_scaled.to_string(),
            without.prediction_last.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table6<W: Write>(comparison: &Comparison, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "commodity",
        "best_baseline",
        "best_baseline_rmse",
        "rmse_with",
        "rmse_without",
        "winner",
        "tie",
    ])?;
    for r in &comparison.rows {
        w.write_record([
            r.commodity.clone(),
            r.best_baseline.clone(),
            r.best_baseline_rmse.to_string(),
            r.rmse_with.to_string(),
            r.rmse_without.to_string(),
            r.winners.join(";"),
            r.tie.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-model scores for every commodity (RMSE in both scales and R²).
pub fn write_model_scores<W: Write>(report: &EvalReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["commodity", "model", "rmse_scaled", "rmse", "r2"])?;
    for r in &report.rows {
        w.write_record([
            r.commodity.clone(),
            r.model.clone(),
            r.rmse_scaled.to_string(),
            r.rmse.to_string(),
            r.r2.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Plot data for one commodity. History months carry `actual` and `fitted`;
/// the months after the panel carry the two forecasts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ForecastTable {
    pub months: Vec<NaiveDate>,
    pub actual: Vec<Option<f64>>,
    pub fitted: Vec<Option<f64>>,
    pub forecast_with: Vec<Option<f64>>,
    pub forecast_without: Vec<Option<f64>>,
}

pub fn write_forecast_csv<W: Write>(table: &ForecastTable, writer: W) -> Result<()> {
    let n = table.months.len();
    for len in [table.actual.len(), table.fitted.len(), table.forecast_with.len(), table.forecast_without.len()] {
        if len != n {
            return Err(Error::LengthMismatch { left: n, right: len });
        }
    }
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["month", "actual", "fitted", "forecast_with", "forecast_without"])?;
    for i in 0..n {
        w.write_record([
            table.months[i].format("%Y-%m-%d").to_string(),
            cell(table.actual[i]),
            cell(table.fitted[i]),
            cell(table.forecast_with[i]),
            cell(table.forecast_without[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

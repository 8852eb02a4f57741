use chrono::NaiveDate;
use ndarray::{s, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};
use std::io::Write;

use super::{train, LstmModel, TrainConfig};
use crate::dataio::{next_month, Column, MonthlyPanel};
use crate::error::{Error, Result};
use crate::preprocess::{fit_minmax_or_unit, make_windows, split_index, ScalerParams};
use crate::report::{r2, rmse, LSTM_WITH, LSTM_WITHOUT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    WithOutliers,
    WithoutOutliers,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::WithOutliers => LSTM_WITH,
            Variant::WithoutOutliers => LSTM_WITHOUT,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Variant::WithOutliers => "with_outliers",
            Variant::WithoutOutliers => "without_outliers",
        }
    }
}

/// What to forecast and from which panel columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSetup {
    pub target: String,
    /// Index columns fed alongside the target's own history.
    pub indices: Vec<String>,
    /// 0/1 outlier indicator columns, used only by the with-outliers variant.
    pub flag_columns: Vec<String>,
    pub lookback: usize,
    pub horizon: usize,
    pub hidden: usize,
    pub split_fraction: f64,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub variant: Variant,
    pub feature_names: Vec<String>,
    /// One-step-ahead fit for every panel row from `lookback` on, in
    /// production units; earlier rows are `None`.
    pub history_fit: Vec<Option<f64>>,
    pub forecast_months: Vec<NaiveDate>,
    /// The `horizon` months after the panel, in production units.
    pub forecast: Vec<f64>,
    /// RMSE over all test windows and horizon steps, in scaled units.
    pub rmse_scaled: f64,
    /// Same, in production units.
    pub rmse: f64,
    pub r2: Option<f64>,
    pub loss_trace: Vec<f64>,
    pub train_windows: usize,
    pub test_windows: usize,
}

impl ForecastResult {
    /// `month,variant,predicted_production` rows for the forecast months.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["month", "variant", "predicted_production"])?;
        for (m, v) in self.forecast_months.iter().zip(&self.forecast) {
            w.write_record([m.format("%Y-%m-%d").to_string(), self.variant.tag().to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn windows_from(matrix: &Array2<f64>, lookback: usize, starts: impl Iterator<Item = usize>) -> Array3<f64> {
    let starts: Vec<usize> = starts.collect();
    let mut out = Array3::zeros((starts.len(), lookback, matrix.ncols()));
    for (i, &t) in starts.iter().enumerate() {
        out.slice_mut(s![i, .., ..]).assign(&matrix.slice(s![t..t + lookback, ..]));
    }
    out
}

/// Scales the panel with ranges from the rows before the split, trains on the
/// windows whose targets end before the split, scores the windows whose
/// targets start after it, and forecasts the `horizon` months past the panel.
pub fn fit_and_forecast(panel: &MonthlyPanel, setup: &ForecastSetup, variant: Variant) -> Result<(LstmModel, ForecastResult)> {
    let (l, h) = (setup.lookback, setup.horizon);
    let t_len = panel.len();
    if t_len < l + h {
        return Err(Error::InsufficientHistory { got: t_len, needed: l + h });
    }
    let split = split_index(t_len, setup.split_fraction)?;

    let mut names: Vec<String> = vec![setup.target.clone()];
    names.extend(setup.indices.iter().filter(|i| **i != setup.target).cloned());
    let n_continuous = names.len();
    if variant == Variant::WithOutliers {
        names.extend(setup.flag_columns.iter().cloned());
    }
    let scalers: Vec<ScalerParams> = names
        .iter()
        .enumerate()
        .map(|(j, n)| {
            let col = panel.column(n)?;
            Ok(if j < n_continuous { fit_minmax_or_unit(&col[..split.max(2).min(t_len)]) } else { ScalerParams::unit() })
        })
        .collect::<Result<_>>()?;
    let target_scaler = scalers[0];

    let mut scaled_cols = Vec::with_capacity(names.len());
    let mut matrix = Array2::zeros((t_len, names.len()));
    for (j, (n, p)) in names.iter().zip(&scalers).enumerate() {
        let values: Vec<f64> = panel.column(n)?.iter().map(|&v| p.transform(v)).collect();
        matrix.column_mut(j).assign(&ndarray::ArrayView1::from(&values));
        scaled_cols.push(Column { name: n.clone(), values });
    }
    let scaled = MonthlyPanel::new(panel.months().to_vec(), scaled_cols)?;
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let windows = make_windows(&scaled, &refs, &setup.target, l, h)?;
    let train_set = windows.filter(|t| t + l + h <= split);
    let test_set = windows.filter(|t| t + l >= split);
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if test_set.is_empty() {
        return Err(Error::InsufficientHistory { got: t_len, needed: split + h });
    }

    let mut model = LstmModel::new(names.len(), setup.hidden, l, h, setup.train.seed)?;
    model.feature_names = names.clone();
    model.scalers = scalers;
    model.target_scaler = target_scaler;
    let (model, loss_trace) = train(&model, &train_set, &setup.train)?;

    let test_pred = model.predict(test_set.inputs.view())?;
    let pred_flat: Vec<f64> = test_pred.iter().copied().collect();
    let true_flat: Vec<f64> = test_set.targets.iter().copied().collect();
    let pred_units: Vec<f64> = pred_flat.iter().map(|&v| target_scaler.inverse(v)).collect();
    let true_units: Vec<f64> = true_flat.iter().map(|&v| target_scaler.inverse(v)).collect();

    let fit_inputs = windows_from(&matrix, l, 0..t_len - l);
    let fit_pred = model.predict(fit_inputs.view())?;
    let mut history_fit = vec![None; t_len];
    for (t, row) in fit_pred.axis_iter(Axis(0)).enumerate() {
        history_fit[t + l] = Some(target_scaler.inverse(row[0]));
    }
    let tail = windows_from(&matrix, l, std::iter::once(t_len - l));
    let forecast: Vec<f64> = model.predict(tail.view())?.row(0).iter().map(|&v| target_scaler.inverse(v)).collect();
    let mut forecast_months = Vec::with_capacity(h);
    let mut m = *panel.months().last().expect("non-empty panel");
    for _ in 0..h {
        m = next_month(m);
        forecast_months.push(m);
    }
    if forecast.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLoss(setup.train.epochs));
    }
    let result = ForecastResult {
        variant,
        feature_names: names,
        history_fit,
        forecast_months,
        forecast,
        rmse_scaled: rmse(&pred_flat, &true_flat)?,
        rmse: rmse(&pred_units, &true_units)?,
        r2: r2(&pred_units, &true_units).ok(),
        loss_trace,
        train_windows: train_set.len(),
        test_windows: test_set.len(),
    };
    Ok((model, result))
}

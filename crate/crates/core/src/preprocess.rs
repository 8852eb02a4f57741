//! Min-max scaling, the double-rolling-aggregate change signal, and sliding
//! windows for supervised sequence learning.

use std::io::Write;

use ndarray::{s, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::dataio::MonthlyPanel;
use crate::error::{Error, Result};

/// Range fitted by [`fit_minmax`]; `x_max > x_min` always holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub x_min: f64,
    pub x_max: f64,
}

impl ScalerParams {
    pub fn new(x_min: f64, x_max: f64) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::ConstantSeries);
        }
        Ok(Self { x_min, x_max })
    }

    /// The identity map, used for 0/1 indicator features.
    pub fn unit() -> Self {
        Self { x_min: 0.0, x_max: 1.0 }
    }

    pub fn range(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn transform(&self, x: f64) -> f64 {
        (x - self.x_min) / (self.x_max - self.x_min)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        y * (self.x_max - self.x_min) + self.x_min
    }
}

pub fn fit_minmax(series: &[f64]) -> Result<ScalerParams> {
    if series.len() < 2 {
        return Err(Error::TooFewPoints { got: series.len(), needed: 2 });
    }
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    ScalerParams::new(lo, hi)
}

/// Like [`fit_minmax`], but a constant series gets the unit range starting at
/// its value, so it maps to 0 instead of failing.
pub fn fit_minmax_or_unit(series: &[f64]) -> ScalerParams {
    fit_minmax(series).unwrap_or_else(|_| {
        let base = series.first().copied().unwrap_or(0.0);
        ScalerParams { x_min: base, x_max: base + 1.0 }
    })
}

/// Values outside the fitted range extrapolate linearly past `[0, 1]`.
pub fn transform_minmax(x: &[f64], p: &ScalerParams) -> Vec<f64> {
    x.iter().map(|&v| p.transform(v)).collect()
}

pub fn inverse_minmax(y: &[f64], p: &ScalerParams) -> Vec<f64> {
    y.iter().map(|&v| p.inverse(v)).collect()
}

/// Difference between the means of two adjacent windows sliding along the
/// series: `out[t] = mean(x[t..t+w]) - mean(x[t-w..t])`.
///
/// Defined for `w <= t <= len - w`; other positions are `None`.
pub fn double_rolling_aggregate(series: &[f64], window: usize) -> Result<Vec<Option<f64>>> {
    if window == 0 {
        return Err(Error::InvalidConfig("rolling window must be at least 1".into()));
    }
    let n = series.len();
    if n < 2 * window {
        return Err(Error::SeriesTooShort { len: n, needed: 2 * window });
    }
    let w = window as f64;
    let mut out = vec![None; n];
    for (t, slot) in out.iter_mut().enumerate().take(n - window + 1).skip(window) {
        let after: f64 = series[t..t + window].iter().sum::<f64>() / w;
        let before: f64 = series[t - window..t].iter().sum::<f64>() / w;
        *slot = Some(after - before);
    }
    Ok(out)
}

/// Row index where the chronological test split begins.
pub fn split_index(len: usize, train_fraction: f64) -> Result<usize> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    Ok((len as f64 * train_fraction).floor() as usize)
}

/// Stride-1 windows over a panel: `inputs[i]` holds rows `[i, i+L)` of the
/// feature columns and `targets[i]` rows `[i+L, i+L+H)` of the target column.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    /// Shape `(count, lookback, features)`.
    pub inputs: Array3<f64>,
    /// Shape `(count, horizon)`.
    pub targets: Array2<f64>,
    pub lookback: usize,
    pub horizon: usize,
    pub feature_names: Vec<String>,
    /// Panel row at which each window's input begins.
    pub starts: Vec<usize>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.inputs.shape()[2]
    }

    /// Windows whose starting panel row satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> WindowedDataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.starts[i])).collect();
        let mut inputs = Array3::zeros((idx.len(), self.lookback, self.n_features()));
        let mut targets = Array2::zeros((idx.len(), self.horizon));
        for (j, &i) in idx.iter().enumerate() {
            inputs.slice_mut(s![j, .., ..]).assign(&self.inputs.slice(s![i, .., ..]));
            targets.row_mut(j).assign(&self.targets.row(i));
        }
        WindowedDataset {
            inputs,
            targets,
            lookback: self.lookback,
            horizon: self.horizon,
            feature_names: self.feature_names.clone(),
            starts: idx.iter().map(|&i| self.starts[i]).collect(),
        }
    }

    /// Debug dump as `window_id,row,feature,value`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["window_id", "row", "feature", "value"])?;
        for i in 0..self.len() {
            for r in 0..self.lookback {
                for (f, name) in self.feature_names.iter().enumerate() {
                    w.write_record([
                        i.to_string(),
                        (self.starts[i] + r).to_string(),
                        name.clone(),
                        self.inputs[[i, r, f]].to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn make_windows(
    panel: &MonthlyPanel,
    features: &[&str],
    target: &str,
    lookback: usize,
    horizon: usize,
) -> Result<WindowedDataset> {
    if lookback == 0 || horizon == 0 {
        return Err(Error::InvalidConfig("lookback and horizon must be at least 1".into()));
    }
    let t_len = panel.len();
    if t_len < lookback + horizon {
        return Err(Error::InsufficientLength { len: t_len, lookback, horizon });
    }
    let target_col = panel.column(target)?;
    let cols = features.iter().map(|f| panel.column(f)).collect::<Result<Vec<_>>>()?;
    let count = t_len - lookback - horizon + 1;
    let mut inputs = Array3::zeros((count, lookback, cols.len()));
    let mut targets = Array2::zeros((count, horizon));
    for i in 0..count {
        for r in 0..lookback {
            for (f, col) in cols.iter().enumerate() {
                inputs[[i, r, f]] = col[i + r];
            }
        }
        for h in 0..horizon {
            targets[[i, h]] = target_col[i + lookback + h];
        }
    }
    Ok(WindowedDataset {
        inputs,
        targets,
        lookback,
        horizon,
        feature_names: features.iter().map(|f| f.to_string()).collect(),
        starts: (0..count).collect(),
    })
}

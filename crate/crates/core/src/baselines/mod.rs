//! Regression baselines predicting monthly production from the paired index
//! values and the last few months of production.

mod ensemble;
mod linear;
mod tree;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use ensemble::{fit_forest, fit_gbt, ForestConfig, ForestModel, GbtConfig, GbtModel};
pub use linear::{fit_linear, polynomial_features, LinearModel, RIDGE};
pub use tree::{fit_tree, TreeConfig, TreeModel, TreeNode, TIE_TOLERANCE};

use crate::dataio::MonthlyPanel;
use crate::error::{Error, Result};
use crate::preprocess::{fit_minmax_or_unit, split_index};
use crate::report::{r2, rmse};

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    /// Panel row each sample was taken from.
    pub rows: Vec<usize>,
}

impl RegressionDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn select(&self, keep: impl Fn(usize) -> bool) -> RegressionDataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.rows[i])).collect();
        RegressionDataset {
            x: self.x.select(ndarray::Axis(0), &idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            rows: idx.iter().map(|&i| self.rows[i]).collect(),
        }
    }
}

/// Row `t` holds the index values at month `t` followed by `target[t-1..=t-lags]`;
/// the label is `target[t]`.
pub fn regression_dataset(panel: &MonthlyPanel, target: &str, indices: &[&str], lags: usize) -> Result<RegressionDataset> {
    let y_col = panel.column(target)?;
    let idx_cols: Vec<&[f64]> = indices.iter().map(|n| panel.column(n)).collect::<Result<_>>()?;
    let t_len = panel.len();
    if t_len <= lags {
        return Err(Error::InsufficientSamples { got: t_len, needed: lags + 1 });
    }
    let d = indices.len() + lags;
    let rows: Vec<usize> = (lags..t_len).collect();
    let x = Array2::from_shape_fn((rows.len(), d), |(i, j)| {
        let t = rows[i];
        if j < indices.len() {
            idx_cols[j][t]
        } else {
            y_col[t - (j - indices.len() + 1)]
        }
    });
    let mut feature_names: Vec<String> = indices.iter().map(|s| s.to_string()).collect();
    feature_names.extend((1..=lags).map(|l| format!("{target}_lag{l}")));
    Ok(RegressionDataset { x, y: rows.iter().map(|&t| y_col[t]).collect(), feature_names, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Linear,
    Polynomial,
    Tree,
    RandomForest,
    GradientBoosting,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        BaselineKind::Linear,
        BaselineKind::Polynomial,
        BaselineKind::Tree,
        BaselineKind::RandomForest,
        BaselineKind::GradientBoosting,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::Linear => "Linear Regression",
            BaselineKind::Polynomial => "Polynomial Regression",
            BaselineKind::Tree => "Regression Tree",
            BaselineKind::RandomForest => "Random Forest",
            BaselineKind::GradientBoosting => "Gradient Boosting",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselinesConfig {
    pub lags: usize,
    pub poly_degree: u8,
    pub tree: TreeConfig,
    pub forest: ForestConfig,
    pub gbt: GbtConfig,
}

impl Default for BaselinesConfig {
    fn default() -> Self {
        Self {
            lags: 3,
            poly_degree: 2,
            tree: TreeConfig::default(),
            forest: ForestConfig::default(),
            gbt: GbtConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineModel {
    Linear(LinearModel),
    Tree(TreeModel),
    Forest(ForestModel),
    Gbt(GbtModel),
}

pub const MODEL_FORMAT: &str = "baseline_model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<M> {
    format: String,
    version: u32,
    model: M,
}

impl BaselineModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        match self {
            BaselineModel::Linear(m) => m.predict(x),
            BaselineModel::Tree(m) => m.predict(x),
            BaselineModel::Forest(m) => m.predict(x),
            BaselineModel::Gbt(m) => m.predict(x),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Envelope { format: MODEL_FORMAT.into(), version: MODEL_VERSION, model: self })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let env: Envelope<BaselineModel> = serde_json::from_str(s)?;
        if env.format != MODEL_FORMAT || env.version != MODEL_VERSION {
            return Err(Error::InvalidConfig(format!("unsupported model file {} v{}", env.format, env.version)));
        }
        Ok(env.model)
    }
}

pub fn fit_baseline(kind: BaselineKind, x: ArrayView2<f64>, y: &[f64], config: &BaselinesConfig) -> Result<BaselineModel> {
    Ok(match kind {
        BaselineKind::Linear => BaselineModel::Linear(fit_linear(x, y, 1)?),
        BaselineKind::Polynomial => BaselineModel::Linear(fit_linear(x, y, config.poly_degree)?),
        BaselineKind::Tree => BaselineModel::Tree(fit_tree(x, y, &config.tree)?),
        BaselineKind::RandomForest => BaselineModel::Forest(fit_forest(x, y, &config.forest)?),
        BaselineKind::GradientBoosting => BaselineModel::Gbt(fit_gbt(x, y, &config.gbt)?),
    })
}

/// Test-split scores of one baseline on one commodity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEvaluation {
    pub kind: BaselineKind,
    /// RMSE of min-max scaled production (scaler fitted on the training rows).
    pub rmse_scaled: f64,
    pub rmse: f64,
    pub r2: Option<f64>,
    /// Prediction for the last month of the panel, in production units.
    pub prediction_last: f64,
}

/// Fits every baseline on the rows before the chronological split and scores
/// it on the rows after. Features and target are min-max scaled with ranges
/// taken from the training rows only.
pub fn evaluate_baselines(
    panel: &MonthlyPanel,
    target: &str,
    indices: &[&str],
    split_fraction: f64,
    config: &BaselinesConfig,
) -> Result<Vec<BaselineEvaluation>> {
    let split = split_index(panel.len(), split_fraction)?;
    let mut data = regression_dataset(panel, target, indices, config.lags)?;
    let train_rows: Vec<usize> = (0..data.len()).filter(|&i| data.rows[i] < split).collect();
    for j in 0..data.x.ncols() {
        let train_vals: Vec<f64> = train_rows.iter().map(|&i| data.x[[i, j]]).collect();
        let p = fit_minmax_or_unit(&train_vals);
        data.x.column_mut(j).mapv_inplace(|v| p.transform(v));
    }
    let y_train_raw: Vec<f64> = train_rows.iter().map(|&i| data.y[i]).collect();
    let y_scaler = fit_minmax_or_unit(&y_train_raw);
    let raw_y = data.y.clone();
    data.y.iter_mut().for_each(|v| *v = y_scaler.transform(*v));

    let train = data.select(|r| r < split);
    let test = data.select(|r| r >= split);
    if train.len() < 2 * config.tree.min_leaf.max(1) || test.is_empty() {
        return Err(Error::InsufficientSamples { got: train.len().min(test.len()), needed: 2 * config.tree.min_leaf.max(1) });
    }
    let test_raw: Vec<f64> = test.rows.iter().map(|&r| raw_y[r - config.lags]).collect();
    BaselineKind::ALL
        .iter()
        .map(|&kind| {
            let model = fit_baseline(kind, train.x.view(), &train.y, config)?;
            let pred = model.predict(test.x.view())?;
            let pred_raw: Vec<f64> = pred.iter().map(|&v| y_scaler.inverse(v)).collect();
            Ok(BaselineEvaluation {
                kind,
                rmse_scaled: rmse(&pred, &test.y)?,
                rmse: rmse(&pred_raw, &test_raw)?,
                r2: r2(&pred_raw, &test_raw).ok(),
                prediction_last: *pred_raw.last().expect("non-empty test split"),
            })
        })
        .collect()
}

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_on_rows, fit_tree, TreeConfig, TreeModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features tried per split; `ceil(d / 3)` when absent.
    pub feature_subsample: Option<usize>,
    pub bootstrap: bool,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 100, feature_subsample: None, bootstrap: true, min_leaf: 1, max_depth: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    /// Per-tree RNG stream ids under `seed`.
    pub tree_streams: Vec<u64>,
    pub seed: u64,
    pub feature_subsample: usize,
    pub n_features: usize,
}

pub fn fit_forest(x: ArrayView2<f64>, y: &[f64], config: &ForestConfig) -> Result<ForestModel> {
    if config.n_trees == 0 {
        return Err(Error::InvalidConfig("forest needs at least one tree".into()));
    }
    let d = x.ncols();
    let mtry = config.feature_subsample.unwrap_or(d.div_ceil(3)).clamp(1, d.max(1));
    let tree_cfg = TreeConfig { max_depth: config.max_depth, min_leaf: config.min_leaf, max_features: Some(mtry) };
    let needed = 2 * config.min_leaf.max(1);
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    if y.len() < needed {
        return Err(Error::InsufficientSamples { got: y.len(), needed });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite training data".into()));
    }
    let n = y.len();
    let trees: Vec<TreeModel> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let rows: Vec<usize> = if config.bootstrap {
                let mut r: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                r.sort_unstable();
                r
            } else {
                (0..n).collect()
            };
            fit_on_rows(x, y, rows, &tree_cfg, Some(&mut rng))
        })
        .collect();
    Ok(ForestModel {
        trees,
        tree_streams: (0..config.n_trees as u64).collect(),
        seed: config.seed,
        feature_subsample: mtry,
        n_features: d,
    })
}

impl ForestModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.ncols() });
        }
        let k = self.trees.len() as f64;
        Ok(x.rows()
            .into_iter()
            .map(|r| {
                let row = r.to_vec();
                self.trees.iter().map(|t| t.predict_row(&row)).sum::<f64>() / k
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self { rounds: 100, learning_rate: 0.1, max_depth: 3, min_leaf: 1, seed: 0 }
    }
}

/// Squared-error boosting: `init + lr · Σ tree(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub init: f64,
    pub trees: Vec<TreeModel>,
    pub learning_rate: f64,
    pub n_features: usize,
    /// Training MSE before the first round and after each round.
    pub train_loss: Vec<f64>,
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / a.len() as f64
}

pub fn fit_gbt(x: ArrayView2<f64>, y: &[f64], config: &GbtConfig) -> Result<GbtModel> {
    if !(config.learning_rate > 0.0 && config.learning_rate <= 1.0) {
        return Err(Error::InvalidConfig(format!("learning rate {} outside (0, 1]", config.learning_rate)));
    }
    if config.max_depth == 0 {
        return Err(Error::InvalidConfig("max_depth must be at least 1".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    if y.is_empty() {
        return Err(Error::Empty);
    }
    let tree_cfg = TreeConfig { max_depth: Some(config.max_depth), min_leaf: config.min_leaf, max_features: None };
    let init = y.iter().sum::<f64>() / y.len() as f64;
    let mut pred = vec![init; y.len()];
    let mut trees = Vec::with_capacity(config.rounds);
    let mut train_loss = vec![mse(&pred, y)];
    for _ in 0..config.rounds {
        let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        let tree = if resid.len() >= 2 * config.min_leaf.max(1) {
            fit_tree(x, &resid, &tree_cfg)?
        } else {
            fit_on_rows(x, &resid, (0..resid.len()).collect(), &tree_cfg, None)
        };
        for (p, row) in pred.iter_mut().zip(x.rows()) {
            *p += config.learning_rate * tree.predict_row(&row.to_vec());
        }
        train_loss.push(mse(&pred, y));
        trees.push(tree);
    }
    Ok(GbtModel { init, trees, learning_rate: config.learning_rate, n_features: x.ncols(), train_loss })
}

impl GbtModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.ncols() });
        }
        Ok(x.rows()
            .into_iter()
            .map(|r| {
                let row = r.to_vec();
                self.init + self.learning_rate * self.trees.iter().map(|t| t.predict_row(&row)).sum::<f64>()
            })
            .collect())
    }
}

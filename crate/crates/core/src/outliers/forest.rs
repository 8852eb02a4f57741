//! Isolation forest built from scratch.
//!
//! Every tree is grown on a uniform subsample (without replacement) of `m`
//! rows. A node picks one of the features that still varies inside it and
//! splits at a uniform point strictly between that feature's minimum and
//! maximum, until the node holds a single row or reaches depth
//! `ceil(log2 m)`. The anomaly score of `x` is `2^(-E[h(x)] / c(m))`.

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Harmonic number `H(k)`; summed exactly for small `k`, asymptotic
/// expansion beyond (absolute error below 1e-12).
pub fn harmonic(k: usize) -> f64 {
    if k <= 256 {
        return (1..=k).map(|i| 1.0 / i as f64).sum();
    }
    let k = k as f64;
    let k2 = k * k;
    k.ln() + EULER_GAMMA + 1.0 / (2.0 * k) - 1.0 / (12.0 * k2) + 1.0 / (120.0 * k2 * k2)
}

/// `c(m)`: mean path length of an unsuccessful search in a random binary
/// search tree, used to normalise isolation depths over `m` points.
pub fn average_path_length(m: usize) -> f64 {
    match m {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => 2.0 * harmonic(m - 1) - 2.0 * (m - 1) as f64 / m as f64,
    }
}

/// `2^(-mean_path / c(m))`.
pub fn score_from_path(mean_path: f64, m: usize) -> f64 {
    2f64.powf(-mean_path / average_path_length(m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsolationForestConfig {
    pub n_trees: usize,
    /// Rows per tree; `min(256, n)` when absent.
    pub sample_size: Option<usize>,
    pub contamination: f64,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for IsolationForestConfig {
    fn default() -> Self {
        Self { n_trees: 100, sample_size: None, contamination: 0.05, seed: 0, parallel: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IsolationNode {
    Split { feature: usize, value: f64, left: usize, right: usize },
    Leaf { size: usize },
}

/// Nodes stored in an arena; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<IsolationNode>,
}

impl IsolationTree {
    fn grow(data: &ArrayView2<f64>, rows: Vec<usize>, height_limit: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = IsolationTree { nodes: Vec::new() };
        tree.grow_node(data, rows, 0, height_limit, rng);
        tree
    }

    fn grow_node(
        &mut self,
        data: &ArrayView2<f64>,
        rows: Vec<usize>,
        depth: usize,
        height_limit: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(IsolationNode::Leaf { size: rows.len() });
        if rows.len() <= 1 || depth >= height_limit {
            return id;
        }
        let ranges: Vec<(usize, f64, f64)> = (0..data.ncols())
            .filter_map(|f| {
                let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                    let v = data[[r, f]];
                    (lo.min(v), hi.max(v))
                });
                (hi > lo).then_some((f, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        let value = loop {
            let v = lo + rng.random::<f64>() * (hi - lo);
            if v > lo && v < hi {
                break v;
            }
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| data[[r, feature]] < value);
        let left = self.grow_node(data, left_rows, depth + 1, height_limit, rng);
        let right = self.grow_node(data, right_rows, depth + 1, height_limit, rng);
        self.nodes[id] = IsolationNode::Split { feature, value, left, right };
        id
    }

    /// Depth of the leaf reached by `x`, plus `c(size)` for the points the
    /// leaf still holds.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[node] {
                IsolationNode::Split { feature, value, left, right } => {
                    node = if x[feature] < value { left } else { right };
                    depth += 1.0;
                }
                IsolationNode::Leaf { size } => return depth + average_path_length(size),
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[IsolationNode], i: usize) -> usize {
            match nodes[i] {
                IsolationNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                IsolationNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForestModel {
    pub trees: Vec<IsolationTree>,
    pub sample_size: usize,
    pub n_trees: usize,
    pub n_features: usize,
    pub seed: u64,
    pub contamination: f64,
    /// Scores strictly above this value are flagged.
    pub threshold: f64,
}

/// RNG for tree `index`: one ChaCha stream per tree, so building trees in
/// parallel or serially gives identical forests.
fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn fit_isolation_forest(data: ArrayView2<f64>, config: &IsolationForestConfig) -> Result<IsolationForestModel> {
    let n = data.nrows();
    if n < 8 {
        return Err(Error::InsufficientSamples { got: n, needed: 8 });
    }
    if data.ncols() == 0 {
        return Err(Error::InvalidConfig("data has no features".into()));
    }
    if !(config.contamination > 0.0 && config.contamination <= 0.5) {
        return Err(Error::InvalidConfig(format!("contamination {} outside (0, 0.5]", config.contamination)));
    }
    if config.n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("data contains non-finite values".into()));
    }
    let m = config.sample_size.unwrap_or(256).min(n);
    if m < 2 {
        return Err(Error::InvalidConfig("sample size must be at least 2".into()));
    }
    let height_limit = (m as f64).log2().ceil() as usize;

    let build = |t: usize| {
        let mut rng = tree_rng(config.seed, t);
        let rows = sample(&mut rng, n, m).into_vec();
        IsolationTree::grow(&data, rows, height_limit, &mut rng)
    };
    let trees: Vec<IsolationTree> = if config.parallel {
        (0..config.n_trees).into_par_iter().map(build).collect()
    } else {
        (0..config.n_trees).map(build).collect()
    };

    let mut model = IsolationForestModel {
        trees,
        sample_size: m,
        n_trees: config.n_trees,
        n_features: data.ncols(),
        seed: config.seed,
        contamination: config.contamination,
        threshold: 0.0,
    };
    let mut scores: Vec<f64> = data.rows().into_iter().map(|r| model.score_row(&r.to_vec())).collect();
    scores.sort_by(f64::total_cmp);
    model.threshold = contamination_threshold(&scores, config.contamination);
    Ok(model)
}

/// Order statistic leaving `round(contamination·n)` scores strictly above it
/// (fewer when scores tie at the boundary).
fn contamination_threshold(sorted: &[f64], contamination: f64) -> f64 {
    let n = sorted.len();
    let k = ((contamination * n as f64).round() as usize).min(n - 1);
    sorted[n - 1 - k]
}

impl IsolationForestModel {
    fn score_row(&self, x: &[f64]) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.path_length(x)).sum();
        score_from_path(total / self.trees.len() as f64, self.sample_size)
    }

    pub fn anomaly_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.len() });
        }
        Ok(self.score_row(x))
    }

    pub fn mean_path_length(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.len() });
        }
        Ok(self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64)
    }

    pub fn is_outlier(&self, score: f64) -> bool {
        score > self.threshold
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&PersistedForest { format: FOREST_FORMAT.into(), version: FOREST_VERSION, model: self.clone() })?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let p: PersistedForest = serde_json::from_str(json)?;
        if p.format != FOREST_FORMAT || p.version != FOREST_VERSION {
            return Err(Error::InvalidConfig(format!("unsupported model file {} v{}", p.format, p.version)));
        }
        Ok(p.model)
    }
}

const FOREST_FORMAT: &str = "isolation_forest";
const FOREST_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PersistedForest {
    format: String,
    version: u32,
    model: IsolationForestModel,
}

pub fn anomaly_score(model: &IsolationForestModel, x: &[f64]) -> Result<f64> {
    model.anomaly_score(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand_distr::StandardNormal;

    fn column(values: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap()
    }

    fn gaussian(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn c_of_small_m() {
        assert_eq!(average_path_length(0), 0.0);
        assert_eq!(average_path_length(1), 0.0);
        assert_eq!(average_path_length(2), 1.0);
        // 2·H(3) − 2·3/4 = 2·11/6 − 1.5
        assert!((average_path_length(4) - (11.0 / 3.0 - 1.5)).abs() < 1e-12);
    }

    #[test]
    fn harmonic_switchover_is_continuous() {
        let exact: f64 = (1..=257).map(|i| 1.0 / i as f64).sum();
        assert!((harmonic(257) - exact).abs() < 1e-12);
    }

    #[test]
    fn score_closed_forms() {
        for m in [8, 64, 256] {
            let c = average_path_length(m);
            assert!((score_from_path(c, m) - 0.5).abs() < 1e-15);
            assert!((score_from_path(2.0 * c, m) - 0.25).abs() < 1e-15);
            assert!(score_from_path(1e-12, m) > 0.999_999);
        }
    }

    #[test]
    fn deterministic_and_parallel_matches_serial() {
        let data = gaussian(300, 2, 5);
        let cfg = IsolationForestConfig { seed: 17, ..Default::default() };
        let a = fit_isolation_forest(data.view(), &cfg).unwrap();
        let b = fit_isolation_forest(data.view(), &cfg).unwrap();
        let c = fit_isolation_forest(data.view(), &IsolationForestConfig { parallel: false, ..cfg }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn identical_points_share_one_score() {
        let data = column(&[3.0; 40]);
        let model = fit_isolation_forest(data.view(), &IsolationForestConfig::default()).unwrap();
        let s = model.anomaly_score(&[3.0]).unwrap();
        assert!((s - 0.5).abs() < 1e-12);
        assert_eq!(model.threshold, s);
        assert!(!model.is_outlier(s));
    }

    #[test]
    fn far_point_gets_max_score() {
        let mut data = gaussian(500, 2, 99);
        data[[250, 0]] = 10.0;
        data[[250, 1]] = 10.0;
        let model = fit_isolation_forest(data.view(), &IsolationForestConfig { seed: 3, ..Default::default() }).unwrap();
        let scores: Vec<f64> = data.rows().into_iter().map(|r| model.anomaly_score(&r.to_vec()).unwrap()).collect();
        let argmax = (0..scores.len()).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
        assert_eq!(argmax, 250);
    }

    #[test]
    fn tree_invariants() {
        let data = gaussian(200, 3, 8);
        let model = fit_isolation_forest(data.view(), &IsolationForestConfig { n_trees: 20, ..Default::default() }).unwrap();
        let limit = (200f64).log2().ceil() as usize;
        for tree in &model.trees {
            assert!(tree.depth() <= limit);
            let leaf_total: usize = tree
                .nodes
                .iter()
                .map(|n| match n {
                    IsolationNode::Leaf { size } => *size,
                    _ => 0,
                })
                .sum();
            assert_eq!(leaf_total, 200);
        }
    }

    #[test]
    fn scores_in_open_unit_interval_and_order_free() {
        let data = gaussian(120, 2, 4);
        let model = fit_isolation_forest(data.view(), &IsolationForestConfig { n_trees: 30, ..Default::default() }).unwrap();
        let mut reversed = model.clone();
        reversed.trees.reverse();
        for x in [[0.0, 0.0], [50.0, -50.0], [1e-9, 3.0]] {
            let s = model.anomaly_score(&x).unwrap();
            assert!(s > 0.0 && s < 1.0);
            assert!((s - reversed.anomaly_score(&x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn training_flag_rate_matches_contamination() {
        for (n, c) in [(200usize, 0.05), (333, 0.02), (97, 0.1), (1000, 0.007)] {
            let data = gaussian(n, 1, n as u64);
            let model = fit_isolation_forest(data.view(), &IsolationForestConfig { contamination: c, ..Default::default() }).unwrap();
            let flagged = data
                .rows()
                .into_iter()
                .filter(|r| model.is_outlier(model.anomaly_score(&r.to_vec()).unwrap()))
                .count();
            assert!((flagged as f64 / n as f64 - c).abs() <= 1.0 / n as f64, "n={n} c={c} flagged={flagged}");
        }
    }

    #[test]
    fn errors() {
        let small = column(&[1.0, 2.0, 3.0]);
        assert!(matches!(fit_isolation_forest(small.view(), &Default::default()), Err(Error::InsufficientSamples { .. })));
        let data = gaussian(50, 2, 1);
        let bad = IsolationForestConfig { contamination: 0.6, ..Default::default() };
        assert!(matches!(fit_isolation_forest(data.view(), &bad), Err(Error::InvalidConfig(_))));
        let model = fit_isolation_forest(data.view(), &Default::default()).unwrap();
        assert!(matches!(model.anomaly_score(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn json_round_trip() {
        let data = gaussian(64, 2, 2);
        let model = fit_isolation_forest(data.view(), &IsolationForestConfig { n_trees: 5, ..Default::default() }).unwrap();
        let back = IsolationForestModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(model, back);
    }
}

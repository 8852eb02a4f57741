//! CART regression tree: greedy squared-error splits at midpoints between
//! consecutive distinct feature values.

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Candidate splits closer than this fraction of the node's squared error
/// count as ties; the earlier feature and then the lower threshold win.
pub const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features examined per split; all of them when absent.
    pub max_features: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { max_depth: None, min_leaf: 5, max_features: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64, n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
    pub config: TreeConfig,
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [f64],
    config: TreeConfig,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    sse: f64,
}

fn mean(y: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64
}

impl Builder<'_> {
    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.ncols();
        match (self.config.max_features, self.rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < d => {
                let mut f = sample(rng, d, k.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize], node_mean: f64, node_sse: f64) -> Option<BestSplit> {
        let min_leaf = self.config.min_leaf.max(1);
        let n = rows.len();
        let tol = TIE_TOLERANCE * node_sse;
        let mut best: Option<BestSplit> = None;
        for feature in self.candidate_features() {
            let mut order: Vec<usize> = rows.to_vec();
            order.sort_by(|&a, &b| self.x[[a, feature]].total_cmp(&self.x[[b, feature]]));
            let total: f64 = order.iter().map(|&r| self.y[r] - node_mean).sum();
            let total_sq: f64 = order.iter().map(|&r| (self.y[r] - node_mean).powi(2)).sum();
            let (mut s, mut sq) = (0.0, 0.0);
            for i in 0..n - 1 {
                let v = self.y[order[i]] - node_mean;
                s += v;
                sq += v * v;
                let nl = i + 1;
                let nr = n - nl;
                let (a, b) = (self.x[[order[i], feature]], self.x[[order[i + 1], feature]]);
                if nl < min_leaf || nr < min_leaf || a == b {
                    continue;
                }
                let sr = total - s;
                let sse = (sq - s * s / nl as f64) + (total_sq - sq - sr * sr / nr as f64);
                let better = match &best {
                    None => true,
                    Some(bs) => sse < bs.sse - tol,
                };
                if better {
                    let mut threshold = 0.5 * (a + b);
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(BestSplit { feature, threshold, sse });
                }
            }
        }
        best.filter(|b| b.sse < node_sse - tol)
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let node_mean = mean(self.y, &rows);
        self.nodes.push(TreeNode::Leaf { value: node_mean, n: rows.len() });
        let depth_ok = self.config.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || rows.len() < 2 * self.config.min_leaf.max(1) {
            return id;
        }
        let node_sse: f64 = rows.iter().map(|&r| (self.y[r] - node_mean).powi(2)).sum();
        if node_sse <= 0.0 {
            return id;
        }
        let Some(split) = self.best_split(&rows, node_mean, node_sse) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&row| self.x[[row, split.feature]] <= split.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = TreeNode::Split { feature: split.feature, threshold: split.threshold, left, right };
        id
    }
}

fn validate(x: ArrayView2<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    if x.ncols() == 0 {
        return Err(Error::InvalidConfig("no features".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite training data".into()));
    }
    Ok(())
}

pub fn fit_tree(x: ArrayView2<f64>, y: &[f64], config: &TreeConfig) -> Result<TreeModel> {
    validate(x, y)?;
    let needed = 2 * config.min_leaf.max(1);
    if y.len() < needed {
        return Err(Error::InsufficientSamples { got: y.len(), needed });
    }
    Ok(fit_on_rows(x, y, (0..y.len()).collect(), config, None))
}

/// Grows a tree over `rows` (repeats allowed, as in a bootstrap sample).
pub(crate) fn fit_on_rows(
    x: ArrayView2<f64>,
    y: &[f64],
    rows: Vec<usize>,
    config: &TreeConfig,
    rng: Option<&mut ChaCha8Rng>,
) -> TreeModel {
    let mut b = Builder { x, y, config: *config, rng, nodes: Vec::new() };
    b.grow(rows, 0);
    TreeModel { nodes: b.nodes, n_features: x.ncols(), config: *config }
}

impl TreeModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
                TreeNode::Leaf { value, .. } => return value,
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.ncols() });
        }
        Ok(x.rows().into_iter().map(|r| self.predict_row(&r.to_vec())).collect())
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    #[test]
    fn constant_target_is_one_leaf() {
        let x = Array2::from_shape_fn((20, 2), |(i, j)| (i + j) as f64);
        let t = fit_tree(x.view(), &[4.0; 20], &TreeConfig::default()).unwrap();
        assert_eq!(t.nodes, vec![TreeNode::Leaf { value: 4.0, n: 20 }]);
    }

    #[test]
    fn step_function_splits_at_midpoint() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 7.0, 8.0, 9.0];
        let x = Array2::from_shape_fn((xs.len(), 1), |(i, _)| xs[i]);
        let y: Vec<f64> = xs.iter().map(|&v| if v < 5.0 { 0.0 } else { 1.0 }).collect();
        let t = fit_tree(x.view(), &y, &TreeConfig { min_leaf: 1, ..Default::default() }).unwrap();
        match t.nodes[0] {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 5.0);
            }
            _ => panic!("root should split"),
        }
        assert_eq!(t.predict(x.view()).unwrap(), y);
        assert_eq!(t.n_leaves(), 2);
    }

    #[test]
    fn min_leaf_respected() {
        let x = Array2::from_shape_fn((30, 1), |(i, _)| i as f64);
        let y: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64).collect();
        let t = fit_tree(x.view(), &y, &TreeConfig { min_leaf: 4, ..Default::default() }).unwrap();
        for n in &t.nodes {
            if let TreeNode::Leaf { n, .. } = n {
                assert!(*n >= 4);
            }
        }
        assert!(matches!(
            fit_tree(x.view(), &y[..0], &TreeConfig::default()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn max_depth_caps_tree() {
        let x = Array2::from_shape_fn((64, 1), |(i, _)| i as f64);
        let y: Vec<f64> = (0..64).map(|i| (i as f64).sin()).collect();
        let t = fit_tree(x.view(), &y, &TreeConfig { max_depth: Some(3), min_leaf: 1, max_features: None }).unwrap();
        assert!(t.depth() <= 3);
    }

    #[test]
    fn too_few_samples() {
        let x = Array2::zeros((9, 1));
        assert!(matches!(
            fit_tree(x.view(), &[0.0; 9], &TreeConfig::default()),
            Err(Error::InsufficientSamples { got: 9, needed: 10 })
        ));
    }

    proptest! {
        #[test]
        fn predictions_within_training_range(
            data in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0, -5.0f64..5.0), 10..60),
            probe in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 1..20),
        ) {
            let x = Array2::from_shape_fn((data.len(), 2), |(i, j)| if j == 0 { data[i].0 } else { data[i].1 });
            let y: Vec<f64> = data.iter().map(|d| d.2).collect();
            let t = fit_tree(x.view(), &y, &TreeConfig { min_leaf: 2, ..Default::default() }).unwrap();
            let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for (a, b) in probe {
                let p = t.predict_row(&[a, b]);
                prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
            }
        }
    }
}

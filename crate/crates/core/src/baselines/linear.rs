use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lstsq_qr, ridge_normal_equations};

pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// One weight per expanded feature (the raw features for degree 1).
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub degree: u8,
    pub n_features: usize,
    /// Set when the expanded design is not of full column rank. Such fits
    /// solve ridge-regularised normal equations instead of exact least squares.
    pub rank_deficient: bool,
}

/// Raw features, then (for degree 2) every product `x_i·x_j` with `i ≤ j`.
pub fn polynomial_features(x: ArrayView2<f64>, degree: u8) -> Array2<f64> {
    let (n, d) = x.dim();
    if degree < 2 {
        return x.to_owned();
    }
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let mut out = Array2::zeros((n, d + pairs.len()));
    for r in 0..n {
        for c in 0..d {
            out[[r, c]] = x[[r, c]];
        }
        for (k, &(i, j)) in pairs.iter().enumerate() {
            out[[r, d + k]] = x[[r, i]] * x[[r, j]];
        }
    }
    out
}

pub fn fit_linear(x: ArrayView2<f64>, y: &[f64], degree: u8) -> Result<LinearModel> {
    if !(1..=2).contains(&degree) {
        return Err(Error::InvalidConfig(format!("polynomial degree {degree} not in 1..=2")));
    }
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    if x.nrows() == 0 {
        return Err(Error::Empty);
    }
    let expanded = polynomial_features(x, degree);
    let (n, p) = expanded.dim();
    // Solve on centred, unit-variance columns so the Gram matrix stays well
    // conditioned, then map the weights back to the original scale.
    let means = expanded.mean_axis(Axis(0)).expect("non-empty");
    let scales: Vec<f64> = (0..p)
        .map(|j| (expanded.column(j).iter().map(|v| (v - means[j]).powi(2)).sum::<f64>() / n as f64).sqrt())
        .collect();
    let live: Vec<usize> = (0..p).filter(|&j| scales[j] > 0.0).collect();
    let z = Array2::from_shape_fn((n, live.len()), |(i, k)| (expanded[[i, live[k]]] - means[live[k]]) / scales[live[k]]);
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc = Array1::from_iter(y.iter().map(|v| v - y_mean));
    let exact = if live.len() == p && !live.is_empty() { lstsq_qr(z.view(), yc.view()).ok() } else { None };
    let rank_deficient = exact.is_none() && !live.is_empty() || live.len() < p;
    let beta = match exact {
        Some((beta, _)) => beta,
        None if live.is_empty() => Array1::zeros(0),
        None => {
            log::warn!("linear design of {p} columns is rank deficient; falling back to ridge {RIDGE}");
            ridge_normal_equations(z.view(), yc.view(), RIDGE, &[])?
        }
    };
    let mut coefficients = vec![0.0; p];
    for (k, &j) in live.iter().enumerate() {
        coefficients[j] = beta[k] / scales[j];
    }
    let intercept = y_mean - coefficients.iter().zip(means.iter()).map(|(c, m)| c * m).sum::<f64>();
    Ok(LinearModel { coefficients, intercept, degree, n_features: x.ncols(), rank_deficient })
}

impl LinearModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.ncols() });
        }
        let expanded = polynomial_features(x, self.degree);
        Ok(expanded
            .axis_iter(Axis(0))
            .map(|row| self.intercept + row.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn exact_line() {
        let x = Array2::from_shape_fn((20, 1), |(i, _)| i as f64 * 0.5 - 3.0);
        let y: Vec<f64> = x.column(0).iter().map(|v| 3.0 * v + 1.0).collect();
        let m = fit_linear(x.view(), &y, 1).unwrap();
        assert!((m.coefficients[0] - 3.0).abs() < 1e-9);
        assert!((m.intercept - 1.0).abs() < 1e-9);
        assert!(!m.rank_deficient);
    }

    #[test]
    fn exact_parabola() {
        let x = Array2::from_shape_fn((21, 1), |(i, _)| i as f64 / 10.0 - 1.0);
        let y: Vec<f64> = x.column(0).iter().map(|v| v * v).collect();
        let m = fit_linear(x.view(), &y, 2).unwrap();
        assert_eq!(m.coefficients.len(), 2);
        assert!((m.coefficients[1] - 1.0).abs() < 1e-6);
        assert!(m.coefficients[0].abs() < 1e-6 && m.intercept.abs() < 1e-6);
    }

    #[test]
    fn recovers_weights_under_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w = [1.5, -2.0, 0.7];
        let x = Array2::from_shape_fn((200, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let y: Vec<f64> = x
            .rows()
            .into_iter()
            .map(|r| 0.3 + r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.01 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let m = fit_linear(x.view(), &y, 1).unwrap();
        for (got, want) in m.coefficients.iter().zip(&w) {
            assert!((got - want).abs() < 0.05);
        }
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Array2::from_shape_fn((60, 2), |_| rng.random::<f64>());
        let y: Vec<f64> = (0..60).map(|_| rng.random::<f64>() * 10.0).collect();
        for degree in [1, 2] {
            let m = fit_linear(x.view(), &y, degree).unwrap();
            let pred = m.predict(x.view()).unwrap();
            let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
            let norm_y = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let design = polynomial_features(x.view(), degree);
            assert!(resid.iter().sum::<f64>().abs() < 1e-6 * norm_y);
            for col in design.columns() {
                let dot: f64 = col.iter().zip(&resid).map(|(a, b)| a * b).sum();
                assert!(dot.abs() < 1e-6 * norm_y, "{dot}");
            }
        }
    }

    #[test]
    fn duplicated_column_is_reported_and_still_fits() {
        let x = Array2::from_shape_fn((10, 2), |(i, _)| i as f64);
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64).collect();
        let m = fit_linear(x.view(), &y, 1).unwrap();
        assert!(m.rank_deficient);
        let pred = m.predict(x.view()).unwrap();
        assert!(pred.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-6));
    }

    #[test]
    fn predict_checks_width() {
        let x = Array2::from_shape_fn((10, 2), |(i, j)| (i * i + j) as f64);
        let m = fit_linear(x.view(), &[1.0; 10], 1).unwrap();
        assert!(matches!(m.predict(Array2::zeros((1, 3)).view()), Err(Error::DimensionMismatch { .. })));
    }
}

//! Dense least-squares helpers shared by the Granger test and linear baselines.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Ordinary least squares through Householder QR.
///
/// Returns the coefficients and the residual sum of squares. A column whose
/// pivot falls below `1e-10` of the largest pivot marks the design as rank
/// deficient.
pub(crate) fn lstsq_qr(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<(Array1<f64>, f64)> {
    let (n, p) = x.dim();
    if n < p || y.len() != n {
        return Err(Error::SingularRegression);
    }
    let mut a = x.to_owned();
    let mut b = y.to_owned();
    let mut diag = vec![0.0; p];
    for k in 0..p {
        let norm = (k..n).map(|i| a[[i, k]] * a[[i, k]]).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::SingularRegression);
        }
        let alpha = if a[[k, k]] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..n).map(|i| a[[i, k]]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 > 0.0 {
            for j in k..p {
                let dot: f64 = v.iter().enumerate().map(|(r, vi)| vi * a[[k + r, j]]).sum();
                let f = 2.0 * dot / vnorm2;
                for (r, vi) in v.iter().enumerate() {
                    a[[k + r, j]] -= f * vi;
                }
            }
            let dot: f64 = v.iter().enumerate().map(|(r, vi)| vi * b[k + r]).sum();
            let f = 2.0 * dot / vnorm2;
            for (r, vi) in v.iter().enumerate() {
                b[k + r] -= f * vi;
            }
        }
        diag[k] = a[[k, k]];
    }
    let largest = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if diag.iter().any(|d| d.abs() <= 1e-10 * largest) {
        return Err(Error::SingularRegression);
    }
    let mut beta = Array1::zeros(p);
    for k in (0..p).rev() {
        let s: f64 = (k + 1..p).map(|j| a[[k, j]] * beta[j]).sum();
        beta[k] = (b[k] - s) / a[[k, k]];
    }
    let rss = (p..n).map(|i| b[i] * b[i]).sum();
    Ok((beta, rss))
}

/// Solves `(XᵀX + λ·D) β = Xᵀy` by Cholesky, where `D` is the identity with
/// zeros on the columns listed in `unpenalized`.
pub(crate) fn ridge_normal_equations(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
    unpenalized: &[usize],
) -> Result<Array1<f64>> {
    let p = x.ncols();
    let mut gram: Array2<f64> = x.t().dot(&x);
    for j in 0..p {
        if !unpenalized.contains(&j) {
            gram[[j, j]] += lambda;
        }
    }
    let rhs = x.t().dot(&y);
    cholesky_solve(gram, rhs)
}

fn cholesky_solve(a: Array2<f64>, b: Array1<f64>) -> Result<Array1<f64>> {
    let p = a.nrows();
    let mut l = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[[i, k]] * l[[j, k]]).sum();
            if i == j {
                let d = a[[i, i]] - s;
                if d <= 0.0 || !d.is_finite() {
                    return Err(Error::SingularRegression);
                }
                l[[i, i]] = d.sqrt();
            } else {
                l[[i, j]] = (a[[i, j]] - s) / l[[j, j]];
            }
        }
    }
    let mut z = Array1::<f64>::zeros(p);
    for i in 0..p {
        let s: f64 = (0..i).map(|k| l[[i, k]] * z[k]).sum();
        z[i] = (b[i] - s) / l[[i, i]];
    }
    let mut out = Array1::<f64>::zeros(p);
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|k| l[[k, i]] * out[k]).sum();
        out[i] = (z[i] - s) / l[[i, i]];
    }
    Ok(out)
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartileSummary {
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

/// Inclusive linear-interpolation percentile on sorted data (rank `(n-1)·p`).
pub(crate) fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let rank = (sorted.len() - 1) as f64 * p;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn quartiles(series: &[f64]) -> Result<QuartileSummary> {
    if series.len() < 4 {
        return Err(Error::TooFewPoints { got: series.len(), needed: 4 });
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = percentile_sorted(&sorted, 0.25);
    let q3 = percentile_sorted(&sorted, 0.75);
    Ok(QuartileSummary { q1, q3, iqr: q3 - q1 })
}

pub const MIN_CONTAMINATION: f64 = 0.001;
pub const MAX_CONTAMINATION: f64 = 0.5;

/// Share of points outside the Tukey fences `[q1 - k·iqr, q3 + k·iqr]`,
/// clamped to `[0.001, 0.5]` so it can seed an isolation-forest threshold.
pub fn contamination_from_iqr(change_signal: &[f64], fence_k: f64) -> Result<f64> {
    Ok(tukey_exceedance(change_signal, fence_k)?.clamp(MIN_CONTAMINATION, MAX_CONTAMINATION))
}

/// Same as [`contamination_from_iqr`] over the defined entries of a signal
/// with gaps (e.g. the edges of a rolling aggregate).
pub fn contamination_from_signal(change_signal: &[Option<f64>], fence_k: f64) -> Result<f64> {
    let defined: Vec<f64> = change_signal.iter().flatten().copied().collect();
    contamination_from_iqr(&defined, fence_k)
}

/// Unclamped fence exceedance rate.
pub fn tukey_exceedance(series: &[f64], fence_k: f64) -> Result<f64> {
    let q = quartiles(series)?;
    let lo = q.q1 - fence_k * q.iqr;
    let hi = q.q3 + fence_k * q.iqr;
    let outside = series.iter().filter(|&&x| x < lo || x > hi).count();
    Ok(outside as f64 / series.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn quartiles_of_one_to_eight() {
        let q = quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        assert!((q.q1 - 2.75).abs() < 1e-12);
        assert!((q.q3 - 6.25).abs() < 1e-12);
        assert!((q.iqr - 3.5).abs() < 1e-12);
    }

    #[test]
    fn quartiles_of_uniform_grid() {
        let grid: Vec<f64> = (0..=100).map(f64::from).collect();
        let q = quartiles(&grid).unwrap();
        assert_eq!((q.q1, q.q3, q.iqr), (25.0, 75.0, 50.0));
    }

    #[test]
    fn quartiles_degenerate() {
        let q = quartiles(&[3.0; 7]).unwrap();
        assert_eq!(q.q1, q.q3);
        assert_eq!(q.iqr, 0.0);
        assert!(matches!(quartiles(&[1.0, 2.0, 3.0]), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn contamination_hand_counted() {
        let mut v = vec![0.0; 95];
        v.extend([100.0; 5]);
        assert!((contamination_from_iqr(&v, 1.5).unwrap() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn contamination_constant_is_clamped() {
        assert_eq!(contamination_from_iqr(&[2.0; 50], 1.5).unwrap(), MIN_CONTAMINATION);
    }

    #[test]
    fn contamination_gaussian() {
        // Two-sided Tukey exceedance for N(0,1) is 2Φ(-2.698) ≈ 0.00698.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sample: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let c = contamination_from_iqr(&sample, 1.5).unwrap();
        assert!((c - 0.007).abs() <= 0.002, "{c}");
    }

    #[test]
    fn signal_with_gaps() {
        let mut s: Vec<Option<f64>> = vec![None, None];
        s.extend((0..95).map(|_| Some(0.0)));
        s.extend((0..5).map(|_| Some(-40.0)));
        s.push(None);
        assert!((contamination_from_signal(&s, 1.5).unwrap() - 0.05).abs() < 1e-12);
    }
}

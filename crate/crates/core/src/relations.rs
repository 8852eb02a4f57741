//! Correlation and lagged-regression causation scores between commodities and
//! indices, and per-commodity selection of the feature indices.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::dataio::MonthlyPanel;
use crate::error::{Error, Result};
use crate::linalg::lstsq_qr;

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 3 {
        return Err(Error::TooFewPoints { got: x.len(), needed: 3 });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CausationScore {
    pub f_stat: f64,
    pub p_value: f64,
}

/// Lagged-regression F-test of whether `cause` helps predict `effect`.
///
/// The restricted model regresses `effect[t]` on an intercept and
/// `effect[t-1..=t-p]`; the unrestricted model adds `cause[t-1..=t-p]`. With
/// `T = n - p` usable rows the statistic is
/// `((RSS_r - RSS_u) / p) / (RSS_u / (T - 2p - 1))`, compared against
/// `F(p, T - 2p - 1)`.
pub fn causation_score(cause: &[f64], effect: &[f64], lags: usize) -> Result<CausationScore> {
    if cause.len() != effect.len() {
        return Err(Error::LengthMismatch { left: cause.len(), right: effect.len() });
    }
    if lags == 0 {
        return Err(Error::InvalidConfig("causation lags must be at least 1".into()));
    }
    let n = effect.len();
    if n < 5 * lags || n < 2 * lags + 2 + lags {
        return Err(Error::SeriesTooShort { len: n, needed: (5 * lags).max(3 * lags + 2) });
    }
    if cause.iter().chain(effect).any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("causation inputs must be finite".into()));
    }
    let p = lags;
    let rows = n - p;
    let y = Array1::from_iter((p..n).map(|t| effect[t]));
    let restricted = Array2::from_shape_fn((rows, 1 + p), |(r, c)| if c == 0 { 1.0 } else { effect[r + p - c] });
    let unrestricted = Array2::from_shape_fn((rows, 1 + 2 * p), |(r, c)| match c {
        0 => 1.0,
        c if c <= p => effect[r + p - c],
        c => cause[r + p - (c - p)],
    });
    let (_, rss_r) = lstsq_qr(restricted.view(), y.view())?;
    let (_, rss_u) = lstsq_qr(unrestricted.view(), y.view())?;
    let df2 = (rows - 2 * p - 1) as f64;
    if rss_u <= f64::EPSILON * rss_r.max(f64::MIN_POSITIVE) {
        return Err(Error::SingularRegression);
    }
    let f_stat = (((rss_r - rss_u) / p as f64) / (rss_u / df2)).max(0.0);
    let dist = FisherSnedecor::new(p as f64, df2).map_err(|_| Error::SingularRegression)?;
    Ok(CausationScore { f_stat, p_value: dist.sf(f_stat) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelationConfig {
    pub lags: usize,
    /// Correlate first differences instead of levels.
    pub differenced: bool,
}

impl Default for RelationConfig {
    fn default() -> Self {
        Self { lags: 3, differenced: false }
    }
}

/// Rows are commodities, columns are indices. Pairs whose lagged regression
/// is singular carry a causation of 0 and a p-value of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationMatrix {
    pub commodities: Vec<String>,
    pub indices: Vec<String>,
    pub correlation: Vec<Vec<f64>>,
    pub causation: Vec<Vec<f64>>,
    pub p_values: Vec<Vec<f64>>,
}

fn differences(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[1] - w[0]).collect()
}

pub fn relation_matrix(
    panel: &MonthlyPanel,
    commodities: &[&str],
    indices: &[&str],
    config: &RelationConfig,
) -> Result<RelationMatrix> {
    let index_cols: Vec<&[f64]> = indices.iter().map(|n| panel.column(n)).collect::<Result<_>>()?;
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = commodities
        .par_iter()
        .map(|name| {
            let target = panel.column(name)?;
            let mut corr = Vec::with_capacity(indices.len());
            let mut caus = Vec::with_capacity(indices.len());
            let mut pv = Vec::with_capacity(indices.len());
            for col in &index_cols {
                let r = if config.differenced {
                    pearson(&differences(col), &differences(target))
                } else {
                    pearson(col, target)
                };
                corr.push(match r {
                    Ok(r) => r,
                    Err(Error::ConstantInput) => 0.0,
                    Err(e) => return Err(e),
                });
                match causation_score(col, target, config.lags) {
                    Ok(s) => {
                        caus.push(s.f_stat);
                        pv.push(s.p_value);
                    }
                    Err(Error::SingularRegression) => {
                        caus.push(0.0);
                        pv.push(1.0);
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok((corr, caus, pv))
        })
        .collect::<Result<_>>()?;
    let mut m = RelationMatrix {
        commodities: commodities.iter().map(|s| s.to_string()).collect(),
        indices: indices.iter().map(|s| s.to_string()).collect(),
        correlation: Vec::new(),
        causation: Vec::new(),
        p_values: Vec::new(),
    };
    for (c, f, p) in rows {
        m.correlation.push(c);
        m.causation.push(f);
        m.p_values.push(p);
    }
    Ok(m)
}

impl RelationMatrix {
    fn row(&self, commodity: &str) -> Result<usize> {
        self.commodities
            .iter()
            .position(|c| c == commodity)
            .ok_or_else(|| Error::UnknownCommodity(commodity.to_string()))
    }

    pub fn write_correlation_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_matrix(writer, &self.commodities, &self.indices, &self.correlation)
    }

    pub fn write_causation_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_matrix(writer, &self.commodities, &self.indices, &self.causation)
    }
}

fn write_matrix<W: Write>(writer: W, rows: &[String], cols: &[String], values: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["commodity".to_string()];
    header.extend(cols.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in rows.iter().zip(values) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    pub commodity: String,
    pub corr_index: String,
    pub corr_value: f64,
    pub caus_index: String,
    pub caus_value: f64,
    pub merged: bool,
}

impl PairingResult {
    /// Feature indices for the commodity, causal pick first; one entry when
    /// both picks coincide.
    pub fn paired_indices(&self) -> Vec<String> {
        if self.merged {
            vec![self.caus_index.clone()]
        } else {
            vec![self.caus_index.clone(), self.corr_index.clone()]
        }
    }
}

/// Highest |correlation| and highest causation for one commodity. Equal
/// |correlation| values fall back to the larger causation, then to the
/// earlier index; equal causation values fall back to the earlier index.
pub fn pair_features(matrix: &RelationMatrix, commodity: &str) -> Result<PairingResult> {
    let r = matrix.row(commodity)?;
    let corr = &matrix.correlation[r];
    let caus = &matrix.causation[r];
    if corr.is_empty() {
        return Err(Error::InvalidConfig("relation matrix has no indices".into()));
    }
    let mut best_corr = 0;
    let mut best_caus = 0;
    for j in 1..corr.len() {
        let (a, b) = (corr[j].abs(), corr[best_corr].abs());
        if a > b || (a == b && caus[j] > caus[best_corr]) {
            best_corr = j;
        }
        if caus[j] > caus[best_caus] {
            best_caus = j;
        }
    }
    Ok(PairingResult {
        commodity: commodity.to_string(),
        corr_index: matrix.indices[best_corr].clone(),
        corr_value: corr[best_corr],
        caus_index: matrix.indices[best_caus].clone(),
        caus_value: caus[best_caus],
        merged: best_corr == best_caus,
    })
}

pub fn pair_all(matrix: &RelationMatrix) -> Result<Vec<PairingResult>> {
    matrix.commodities.iter().map(|c| pair_features(matrix, c)).collect()
}

pub fn write_pairing_csv<W: Write>(pairings: &[PairingResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in pairings {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pairing_csv<R: Read>(reader: R) -> Result<Vec<PairingResult>> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    const INDICES: [&str; 5] = ["Gold", "DOW", "SP500", "Oil", "VIX"];

    fn single_row(corr: [f64; 5], caus: [f64; 5]) -> RelationMatrix {
        RelationMatrix {
            commodities: vec!["c".into()],
            indices: INDICES.iter().map(|s| s.to_string()).collect(),
            correlation: vec![corr.to_vec()],
            causation: vec![caus.to_vec()],
            p_values: vec![vec![0.5; 5]],
        }
    }

    #[test]
    fn pearson_self_and_negation() {
        let x = [1.0, 3.0, 2.0, 7.0, 5.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_hand_value() {
        // deviations (-1.5,-.5,.5,1.5) and (-3.25,-1.25,.75,3.75):
        // Σdxdy = 11.5, Σdx² = 5, Σdy² = 26.75
        let want = 11.5 / (5.0f64 * 26.75).sqrt();
        assert!((pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 9.0]).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::ConstantInput)));
    }

    #[test]
    fn milk_row_pairs_with_dow() {
        let m = single_row([-0.261, 0.803, 0.781, 0.744, 0.427], [1.0, 2.0, 3.0, 4.0, 5.0]);
        let p = pair_features(&m, "c").unwrap();
        assert_eq!(p.corr_index, "DOW");
        assert_eq!(p.corr_value, 0.803);
        assert_eq!(p.caus_index, "VIX");
        assert!(!p.merged);
        assert_eq!(p.paired_indices(), vec!["VIX".to_string(), "DOW".to_string()]);
    }

    #[test]
    fn veal_row_pairs_with_sp500() {
        let m = single_row([0.319, -0.791, -0.808, -0.772, -0.414], [0.1, 0.2, 9.0, 0.3, 0.4]);
        let p = pair_features(&m, "c").unwrap();
        assert_eq!(p.corr_index, "SP500");
        assert_eq!(p.caus_index, "SP500");
        assert!(p.merged);
        assert_eq!(p.paired_indices().len(), 1);
    }

    #[test]
    fn correlation_ties_prefer_causation_then_order() {
        let m = single_row([0.5, -0.5, 0.5, 0.1, 0.0], [1.0, 3.0, 3.0, 0.0, 0.0]);
        let p = pair_features(&m, "c").unwrap();
        assert_eq!(p.corr_index, "DOW");
        assert_eq!(p.caus_index, "DOW");
        assert!(matches!(pair_features(&m, "beef"), Err(Error::UnknownCommodity(_))));
    }

    #[test]
    fn constructed_causal_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cause: Vec<f64> = (0..300).map(|_| rng.sample(StandardNormal)).collect();
        let mut effect = vec![0.0; 300];
        for t in 1..300 {
            effect[t] = 0.8 * cause[t - 1] + 0.05 * rng.sample::<f64, _>(StandardNormal);
        }
        let s = causation_score(&cause, &effect, 3).unwrap();
        assert!(s.p_value < 1e-3 && s.f_stat > 100.0, "{s:?}");
        let back = causation_score(&effect, &cause, 3).unwrap();
        assert!(back.f_stat < s.f_stat);
    }

    #[test]
    fn identical_series_is_singular() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..100).map(|_| rng.sample(StandardNormal)).collect();
        assert!(matches!(causation_score(&x, &x, 3), Err(Error::SingularRegression)));
    }

    #[test]
    fn causation_too_short() {
        assert!(matches!(causation_score(&[0.0; 14], &[1.0; 14], 3), Err(Error::SeriesTooShort { .. })));
    }

    #[test]
    fn matrix_csv_shape() {
        let m = single_row([0.1, 0.2, 0.3, 0.4, 0.5], [1.0, 2.0, 3.0, 4.0, 5.0]);
        let mut buf = Vec::new();
        m.write_correlation_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "commodity,Gold,DOW,SP500,Oil,VIX");
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn pairing_csv_round_trip() {
        let m = single_row([0.1, -0.9, 0.3, 0.4, 0.5], [1.0, 2.0, 3.0, 4.0, 5.0]);
        let pairs = pair_all(&m).unwrap();
        let mut buf = Vec::new();
        write_pairing_csv(&pairs, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("commodity,corr_index,corr_value,caus_index,caus_value,merged\n"));
        assert_eq!(read_pairing_csv(buf.as_slice()).unwrap(), pairs);
    }

    proptest! {
        #[test]
        fn pearson_symmetric(v in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40)) {
            let (x, y): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            if let (Ok(a), Ok(b)) = (pearson(&x, &y), pearson(&y, &x)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn pearson_affine(
            v in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
            a in 0.1f64..10.0,
            b in -50.0f64..50.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            if let Ok(r) = pearson(&x, &y) {
                let pos: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                let neg: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
                prop_assert!((pearson(&pos, &y).unwrap() - r).abs() < 1e-9);
                prop_assert!((pearson(&neg, &y).unwrap() + r).abs() < 1e-9);
            }
        }

        #[test]
        fn pairing_invariant_under_monotone_causation_rescale(
            corr in prop::array::uniform5(-1.0f64..1.0),
            caus in prop::array::uniform5(0.0f64..50.0),
            scale in 0.01f64..100.0,
        ) {
            let m = single_row(corr, caus);
            let mut rescaled = m.clone();
            rescaled.causation[0] = caus.iter().map(|f| (scale * f).sqrt() + 3.0).collect();
            let a = pair_features(&m, "c").unwrap();
            let b = pair_features(&rescaled, "c").unwrap();
            prop_assert_eq!(a.corr_index, b.corr_index);
            prop_assert_eq!(a.caus_index, b.caus_index);
            prop_assert_eq!(a.merged, b.merged);
        }
    }
}

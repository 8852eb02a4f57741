//! Outlier-event detection: IQR-derived contamination rates and an isolation
//! forest run over each index's change signal.

mod forest;
mod iqr;

use std::io::{Read, Write};

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::double_rolling_aggregate;

pub use forest::{
    anomaly_score, average_path_length, fit_isolation_forest, harmonic, score_from_path, IsolationForestConfig,
    IsolationForestModel, IsolationNode, IsolationTree,
};
pub use iqr::{
    contamination_from_iqr, contamination_from_signal, quartiles, tukey_exceedance, QuartileSummary,
    MAX_CONTAMINATION, MIN_CONTAMINATION,
};

/// Per-month scores and flags. Months without a defined change signal carry
/// no score and are never flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierFlags {
    pub months: Vec<NaiveDate>,
    pub scores: Vec<Option<f64>>,
    pub flags: Vec<bool>,
    pub threshold: f64,
}

impl OutlierFlags {
    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn flagged_months(&self) -> Vec<NaiveDate> {
        self.months.iter().zip(&self.flags).filter(|(_, &f)| f).map(|(m, _)| *m).collect()
    }

    /// Flags as a 0/1 feature column.
    pub fn indicator(&self) -> Vec<f64> {
        self.flags.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect()
    }

    /// `month,score,flag` rows; missing scores are left empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["month", "score", "flag"])?;
        for ((m, s), f) in self.months.iter().zip(&self.scores).zip(&self.flags) {
            w.write_record([
                m.format("%Y-%m-%d").to_string(),
                s.map(|v| v.to_string()).unwrap_or_default(),
                u8::from(*f).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `month,score,flag` rows; the threshold is not stored in the file.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut out = OutlierFlags { months: vec![], scores: vec![], flags: vec![], threshold: f64::NAN };
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            let raw = rec.get(0).unwrap_or("");
            let month = NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                .map_err(|_| Error::UnparseableDate { row, value: raw.into() })?;
            let score = match rec.get(1).unwrap_or("") {
                "" => None,
                s => Some(s.parse().map_err(|_| Error::NonFiniteValue { row, value: s.into() })?),
            };
            out.months.push(month);
            out.scores.push(score);
            out.flags.push(rec.get(2) == Some("1"));
        }
        Ok(out)
    }
}

/// Scores a one-feature signal with a fitted model.
pub fn flag_series(model: &IsolationForestModel, signal: &[Option<f64>], months: &[NaiveDate]) -> Result<OutlierFlags> {
    if model.n_features != 1 {
        return Err(Error::DimensionMismatch { expected: model.n_features, got: 1 });
    }
    if signal.len() != months.len() {
        return Err(Error::LengthMismatch { left: months.len(), right: signal.len() });
    }
    let mut scores = Vec::with_capacity(signal.len());
    let mut flags = Vec::with_capacity(signal.len());
    for v in signal {
        match v {
            Some(x) => {
                let s = model.anomaly_score(&[*x])?;
                scores.push(Some(s));
                flags.push(model.is_outlier(s));
            }
            None => {
                scores.push(None);
                flags.push(false);
            }
        }
    }
    Ok(OutlierFlags { months: months.to_vec(), scores, flags, threshold: model.threshold })
}

/// Which series feeds the isolation forest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionInput {
    /// Double-rolling-aggregate change signal.
    #[default]
    ChangeSignal,
    RawLevels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionConfig {
    pub input: DetectionInput,
    /// Double-rolling-aggregate window, in observations.
    pub window: usize,
    pub fence_k: f64,
    pub n_trees: usize,
    pub sample_size: Option<usize>,
    pub seed: u64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self { input: DetectionInput::ChangeSignal, window: 5, fence_k: 1.5, n_trees: 100, sample_size: None, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub contamination: f64,
    pub signal: Vec<Option<f64>>,
    pub model: IsolationForestModel,
    pub flags: OutlierFlags,
}

/// Change signal → IQR contamination → forest fit on the defined points →
/// per-month flags.
pub fn detect_outliers(values: &[f64], months: &[NaiveDate], config: &DetectionConfig) -> Result<Detection> {
    let signal = match config.input {
        DetectionInput::ChangeSignal => double_rolling_aggregate(values, config.window)?,
        DetectionInput::RawLevels => values.iter().copied().map(Some).collect(),
    };
    let contamination = contamination_from_signal(&signal, config.fence_k)?;
    let defined: Vec<f64> = signal.iter().flatten().copied().collect();
    let data = Array2::from_shape_vec((defined.len(), 1), defined).expect("column shape");
    let model = fit_isolation_forest(
        data.view(),
        &IsolationForestConfig {
            n_trees: config.n_trees,
            sample_size: config.sample_size,
            contamination,
            seed: config.seed,
            parallel: true,
        },
    )?;
    let flags = flag_series(&model, &signal, months)?;
    Ok(Detection { contamination, signal, model, flags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic, SyntheticSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn months(n: usize) -> Vec<NaiveDate> {
        let mut m = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
        (0..n)
            .map(|_| {
                let cur = m;
                m = crate::dataio::next_month(m);
                cur
            })
            .collect()
    }

    #[test]
    fn injected_shocks_are_flagged() {
        let spec = SyntheticSpec {
            n_months: 300,
            trend: 0.2,
            seasonal_amplitude: 2.0,
            noise_std: 1.0,
            shock_months: vec![60, 150, 240],
            shock_magnitude: 8.0,
            seed: 21,
            ..Default::default()
        };
        let s = generate_synthetic(&spec).unwrap();
        let cfg = DetectionConfig { window: 1, seed: 4, ..Default::default() };
        let det = detect_outliers(&s.values(), &s.dates(), &cfg).unwrap();
        for m in [60, 150, 240] {
            assert!(det.flags.flags[m], "shock month {m} not flagged");
        }
    }

    #[test]
    fn pure_noise_flag_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let noise: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
        let data = Array2::from_shape_vec((200, 1), noise.clone()).unwrap();
        let model = fit_isolation_forest(
            data.view(),
            &IsolationForestConfig { contamination: 0.05, seed: 1, ..Default::default() },
        )
        .unwrap();
        let signal: Vec<Option<f64>> = noise.into_iter().map(Some).collect();
        let flags = flag_series(&model, &signal, &months(200)).unwrap();
        assert!((flags.count() as i64 - 10).abs() <= 1, "{}", flags.count());
    }

    #[test]
    fn constant_series_has_no_flags() {
        let values = vec![5.0; 120];
        let det = detect_outliers(&values, &months(120), &DetectionConfig::default()).unwrap();
        assert_eq!(det.contamination, MIN_CONTAMINATION);
        assert_eq!(det.flags.count(), 0);
    }

    #[test]
    fn missing_signal_months_are_unflagged() {
        let spec = SyntheticSpec { n_months: 60, noise_std: 1.0, seed: 3, ..Default::default() };
        let s = generate_synthetic(&spec).unwrap();
        let det = detect_outliers(&s.values(), &s.dates(), &DetectionConfig::default()).unwrap();
        for t in (0..5).chain(56..60) {
            assert_eq!(det.flags.scores[t], None);
            assert!(!det.flags.flags[t]);
        }
    }

    #[test]
    fn flags_csv_round_trip() {
        let spec = SyntheticSpec { n_months: 48, noise_std: 1.0, seed: 8, ..Default::default() };
        let s = generate_synthetic(&spec).unwrap();
        let det = detect_outliers(&s.values(), &s.dates(), &DetectionConfig::default()).unwrap();
        let mut buf = Vec::new();
        det.flags.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("month,score,flag\n"));
        let back = OutlierFlags::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.months, det.flags.months);
        assert_eq!(back.flags, det.flags.flags);
        assert_eq!(back.scores, det.flags.scores);
    }

    #[test]
    fn two_feature_model_rejected_by_flag_series() {
        let data = Array2::from_shape_fn((20, 2), |(i, j)| (i * (j + 1)) as f64);
        let model = fit_isolation_forest(data.view(), &Default::default()).unwrap();
        assert!(matches!(flag_series(&model, &[Some(1.0)], &months(1)), Err(Error::DimensionMismatch { .. })));
    }

    // For 1-D data the point farthest from the median should carry the top
    // forest-averaged score. Each trial draws a Gaussian bulk plus one point
    // 3.5–6σ out; with a pure Gaussian sample the tail with the wider gap to
    // its neighbour wins instead, whichever side is farther.
    #[test]
    fn monotone_isolation_statistical() {
        let trials = 40;
        let seeds = 50;
        let mut hits = 0;
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
            let mut values: Vec<f64> = (0..149).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            values.push(sign * rng.random_range(3.5..6.0));
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let median = sorted[75];
            let far = (0..values.len())
                .max_by(|&a, &b| (values[a] - median).abs().total_cmp(&(values[b] - median).abs()))
                .unwrap();
            let data = Array2::from_shape_vec((values.len(), 1), values.clone()).unwrap();
            let mut mean_scores = vec![0.0; values.len()];
            for seed in 0..seeds {
                let model = fit_isolation_forest(
                    data.view(),
                    &IsolationForestConfig { seed: trial * 1000 + seed, ..Default::default() },
                )
                .unwrap();
                for (acc, &v) in mean_scores.iter_mut().zip(&values) {
                    *acc += model.anomaly_score(&[v]).unwrap() / seeds as f64;
                }
            }
            let top = (0..values.len()).max_by(|&a, &b| mean_scores[a].total_cmp(&mean_scores[b])).unwrap();
            if top == far {
                hits += 1;
            }
        }
        assert!(hits as f64 >= 0.95 * trials as f64, "{hits}/{trials}");
    }
}

//! Seeded synthetic data: single monthly series with injected shocks, and
//! full index/commodity snapshots whose production responds to index shocks.

use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{months_in_range, next_month, TimeSeries};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub name: String,
    pub start: NaiveDate,
    pub n_months: usize,
    /// Value at month 0 before seasonality and noise.
    pub level: f64,
    /// Added per month.
    pub trend: f64,
    pub seasonal_amplitude: f64,
    pub seasonal_period: usize,
    pub noise_std: f64,
    /// Zero-based month offsets receiving an additive shock.
    pub shock_months: Vec<usize>,
    pub shock_magnitude: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            start: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
            n_months: 240,
            level: 0.0,
            trend: 0.0,
            seasonal_amplitude: 0.0,
            seasonal_period: 12,
            noise_std: 0.0,
            shock_months: Vec::new(),
            shock_magnitude: 0.0,
            seed: 0,
        }
    }
}

/// `level + trend·t + A·sin(2πt/period) + σ·z_t + shock·[t ∈ shocks]`.
///
/// One standard normal is drawn per month regardless of `noise_std`, so two
/// specs differing only in shocks share the same noise path.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<TimeSeries> {
    if spec.n_months < 24 {
        return Err(Error::InvalidSpec(format!("n_months = {} < 24", spec.n_months)));
    }
    if !(spec.noise_std >= 0.0 && spec.noise_std.is_finite()) {
        return Err(Error::InvalidSpec("noise_std must be finite and non-negative".into()));
    }
    if spec.seasonal_period < 2 {
        return Err(Error::InvalidSpec("seasonal_period must be at least 2".into()));
    }
    if let Some(&m) = spec.shock_months.iter().find(|&&m| m >= spec.n_months) {
        return Err(Error::InvalidSpec(format!("shock month {m} outside series")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut date = super::month_start(spec.start);
    let mut dates = Vec::with_capacity(spec.n_months);
    let mut values = Vec::with_capacity(spec.n_months);
    for t in 0..spec.n_months {
        let z: f64 = rng.sample(StandardNormal);
        let phase = 2.0 * std::f64::consts::PI * t as f64 / spec.seasonal_period as f64;
        let mut v = spec.level + spec.trend * t as f64 + spec.seasonal_amplitude * phase.sin() + spec.noise_std * z;
        if spec.shock_months.contains(&t) {
            v += spec.shock_magnitude;
        }
        dates.push(date);
        values.push(v);
        date = next_month(date);
    }
    Ok(TimeSeries::from_values(&spec.name, &dates, &values)?.with_provenance("synthetic"))
}

/// Layout of a synthetic index/commodity snapshot.
///
/// Each index follows a drifting random walk at monthly resolution with
/// occasional downward level shifts ("shocks"), sampled every weekday. Each
/// commodity is linked to one index: it tracks that index's lagged level and
/// dips for a few months after each of its shocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticPanelSpec {
    pub start: NaiveDate,
    pub n_months: usize,
    pub indices: Vec<String>,
    pub commodities: Vec<String>,
    /// Per-month probability of a shock on each index.
    pub shock_rate: f64,
    /// Level shift at a shock, in units of the monthly random-walk volatility.
    pub shock_sigmas: f64,
    /// Production dip right after a linked shock, as a fraction of the
    /// commodity's base level.
    pub response: f64,
    /// Geometric decay of the dip per month.
    pub response_decay: f64,
    /// Production noise as a fraction of base level.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticPanelSpec {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
            n_months: 240,
            indices: ["Gold", "Oil", "DOW", "SP500", "VIX"].map(String::from).to_vec(),
            commodities: [
                "Beef", "Butter", "Cheese", "Chickens", "Ducks", "Eggs", "IceCream", "LambMutton", "Milk",
                "OtherPoultry", "Pork", "Sherbet", "Turkeys", "Veal", "WaterIces",
            ]
            .map(String::from)
            .to_vec(),
            shock_rate: 0.05,
            shock_sigmas: 6.0,
            response: 0.15,
            response_decay: 0.6,
            noise: 0.01,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    /// Weekday closes, one series per index.
    pub daily_indices: Vec<TimeSeries>,
    /// Month-start production, one series per commodity.
    pub commodities: Vec<TimeSeries>,
    /// Zero-based month offsets of the shocks injected into each index.
    pub index_shocks: BTreeMap<String, Vec<usize>>,
    /// Index each commodity was generated from.
    pub links: BTreeMap<String, String>,
}

pub fn generate_synthetic_panel(spec: &SyntheticPanelSpec) -> Result<SyntheticPanel> {
    if spec.n_months < 24 {
        return Err(Error::InvalidSpec(format!("n_months = {} < 24", spec.n_months)));
    }
    if spec.indices.is_empty() || spec.commodities.is_empty() {
        return Err(Error::InvalidSpec("need at least one index and one commodity".into()));
    }
    if !(0.0..=0.5).contains(&spec.shock_rate) || !(0.0..1.0).contains(&spec.response_decay) {
        return Err(Error::InvalidSpec("shock_rate must lie in [0, 0.5], response_decay in [0, 1)".into()));
    }
    let start = super::month_start(spec.start);
    let months = {
        let mut m = start;
        let mut out = Vec::with_capacity(spec.n_months);
        for _ in 0..spec.n_months {
            out.push(m);
            m = next_month(m);
        }
        out
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // monthly latent index paths
    let mut latent = Vec::with_capacity(spec.indices.len());
    let mut index_shocks = BTreeMap::new();
    for (k, name) in spec.indices.iter().enumerate() {
        let base = 100.0 * (k as f64 + 1.0);
        let vol = 0.02 * base;
        let drift = rng.random_range(-0.2..0.6) * vol;
        let mut shocks = Vec::new();
        let mut path = Vec::with_capacity(spec.n_months + 1);
        let mut x = base;
        // one extra month so the last month's days can interpolate forward
        for t in 0..=spec.n_months {
            if t > 0 {
                let z: f64 = rng.sample(StandardNormal);
                x += drift + vol * z;
                let last = shocks.last().copied();
                let spaced = last.is_none_or(|s: usize| t >= s + 6);
                if t >= 6 && t < spec.n_months && spaced && rng.random::<f64>() < spec.shock_rate {
                    x -= spec.shock_sigmas * vol;
                    shocks.push(t);
                }
                x = x.max(0.05 * base);
            }
            path.push(x);
        }
        latent.push(path);
        index_shocks.insert(name.clone(), shocks);
    }

    // weekday closes; the first week before `start` lets month 0 align
    let mut daily_indices = Vec::with_capacity(spec.indices.len());
    let first_day = start - Duration::days(7);
    let last_day = months[spec.n_months - 1] + Duration::days(20);
    for (k, name) in spec.indices.iter().enumerate() {
        let base = 100.0 * (k as f64 + 1.0);
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for day in first_day.iter_days().take_while(|d| *d <= last_day) {
            if matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
                continue;
            }
            let (t, frac) = month_position(&months, day);
            let v = latent[k][t] + (latent[k][t + 1] - latent[k][t]) * frac;
            let z: f64 = rng.sample(StandardNormal);
            dates.push(day);
            values.push((v + 0.002 * base * z).max(0.01 * base));
        }
        daily_indices.push(TimeSeries::from_values(name, &dates, &values)?.with_units("USD"));
    }

    let mut commodities = Vec::with_capacity(spec.commodities.len());
    let mut links = BTreeMap::new();
    for (c, name) in spec.commodities.iter().enumerate() {
        let k = c % spec.indices.len();
        let base = 1.0e6 * (1.0 + (c as f64 * 0.37).fract() * 9.0);
        let sign = if c % 3 == 2 { -1.0 } else { 1.0 };
        let coupling = 0.004 * base / (100.0 * (k as f64 + 1.0));
        let trend = rng.random_range(-0.5..1.5) * 1e-3 * base;
        let season = rng.random_range(0.0..0.04) * base;
        let shocks = &index_shocks[&spec.indices[k]];
        let mut values = Vec::with_capacity(spec.n_months);
        for t in 0..spec.n_months {
            let lagged = if t == 0 { latent[k][0] } else { latent[k][t - 1] } - latent[k][0];
            let dip: f64 = shocks
                .iter()
                .filter(|&&s| s < t)
                .map(|&s| spec.response * base * spec.response_decay.powi((t - s - 1) as i32))
                .sum();
            let z: f64 = rng.sample(StandardNormal);
            let phase = 2.0 * std::f64::consts::PI * t as f64 / 12.0;
            let v = base + trend * t as f64 + season * phase.sin() + sign * coupling * lagged - dip
                + spec.noise * base * z;
            values.push(v.max(0.01 * base));
        }
        commodities.push(
            TimeSeries::from_values(name, &months, &values)?
                .with_units("lbs")
                .with_provenance("synthetic"),
        );
        links.insert(name.clone(), spec.indices[k].clone());
    }

    Ok(SyntheticPanel { daily_indices, commodities, index_shocks, links })
}

/// Month offset containing `day` (clamped to the range) and the fraction of
/// the way through that month.
fn month_position(months: &[NaiveDate], day: NaiveDate) -> (usize, f64) {
    let idx = months.partition_point(|m| *m <= day);
    if idx == 0 {
        return (0, 0.0);
    }
    let t = idx - 1;
    let m = months[t];
    let len = (next_month(m) - m).num_days() as f64;
    (t, (day - m).num_days() as f64 / len)
}

/// All month starts of a synthetic panel spec.
pub fn synthetic_months(spec: &SyntheticPanelSpec) -> Vec<NaiveDate> {
    let start = super::month_start(spec.start);
    let mut end = start;
    for _ in 1..spec.n_months {
        end = next_month(end);
    }
    months_in_range(start, end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{align_to_month_start, merge_panel, to_monthly};

    #[test]
    fn noise_free_ramp() {
        let spec = SyntheticSpec { n_months: 30, trend: 1.0, ..Default::default() };
        let s = generate_synthetic(&spec).unwrap();
        let expected: Vec<f64> = (0..30).map(|t| t as f64).collect();
        assert_eq!(s.values(), expected);
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = SyntheticSpec { noise_std: 1.0, seasonal_amplitude: 3.0, seed: 42, ..Default::default() };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SyntheticSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn shock_is_additive() {
        let base = SyntheticSpec { noise_std: 1.0, trend: 0.5, seed: 9, ..Default::default() };
        let shocked = SyntheticSpec { shock_months: vec![50], shock_magnitude: 10.0, ..base.clone() };
        let a = generate_synthetic(&base).unwrap().values();
        let b = generate_synthetic(&shocked).unwrap().values();
        for t in 0..a.len() {
            if t == 50 {
                assert!((b[t] - a[t] - 10.0).abs() < 1e-12);
            } else {
                assert_eq!(a[t], b[t]);
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_synthetic(&SyntheticSpec { n_months: 23, ..Default::default() }).is_err());
        assert!(generate_synthetic(&SyntheticSpec { noise_std: -1.0, ..Default::default() }).is_err());
        assert!(generate_synthetic(&SyntheticSpec { shock_months: vec![240], ..Default::default() }).is_err());
    }

    #[test]
    fn panel_aligns_and_merges() {
        let spec = SyntheticPanelSpec { n_months: 36, ..Default::default() };
        let p = generate_synthetic_panel(&spec).unwrap();
        let mut all = Vec::new();
        for d in &p.daily_indices {
            all.push(align_to_month_start(d, 7).unwrap());
        }
        for c in &p.commodities {
            all.push(to_monthly(c).unwrap());
        }
        let panel = merge_panel(&all).unwrap();
        assert_eq!(panel.len(), 36);
        assert_eq!(panel.columns().len(), 20);
        assert_eq!(panel.months(), synthetic_months(&spec).as_slice());
    }
}

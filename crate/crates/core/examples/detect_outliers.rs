//! Flags shock months in a noisy monthly series with an isolation forest
//! whose threshold comes from the IQR contamination rate.
//!
//!     cargo run --example detect_outliers

use agforecast::dataio::{generate_synthetic, SyntheticSpec};
use agforecast::outliers::{detect_outliers, DetectionConfig};

fn main() -> agforecast::Result<()> {
    let spec = SyntheticSpec {
        name: "index".into(),
        n_months: 240,
        level: 100.0,
        trend: 0.1,
        seasonal_amplitude: 2.0,
        noise_std: 1.0,
        shock_months: vec![40, 117, 200],
        shock_magnitude: 9.0,
        seed: 3,
        ..Default::default()
    };
    let series = generate_synthetic(&spec)?;
    let cfg = DetectionConfig { window: 1, seed: 3, ..Default::default() };
    let det = detect_outliers(&series.values(), &series.dates(), &cfg)?;

    println!("contamination {:.4}, threshold {:.4}", det.contamination, det.flags.threshold);
    for (t, month) in det.flags.months.iter().enumerate() {
        if det.flags.flags[t] {
            let injected = if spec.shock_months.contains(&t) { "  <- injected shock" } else { "" };
            println!("{month}  score {:.3}{injected}", det.flags.scores[t].unwrap_or(f64::NAN));
        }
    }
    Ok(())
}

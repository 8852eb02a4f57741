//! Trains the LSTM forecaster with and without outlier indicator features
//! and prints both forecasts.
//!
//!     cargo run --release --example lstm_forecast

use agforecast::dataio::{align_to_month_start, generate_synthetic_panel, merge_panel, SyntheticPanelSpec};
use agforecast::lstm::{fit_and_forecast, ForecastSetup, TrainConfig, Variant};
use agforecast::outliers::{detect_outliers, DetectionConfig};

fn main() -> agforecast::Result<()> {
    let spec = SyntheticPanelSpec { indices: vec!["Gold".into()], commodities: vec!["Milk".into()], seed: 105, ..Default::default() };
    let synth = generate_synthetic_panel(&spec)?;
    let mut series = vec![align_to_month_start(&synth.daily_indices[0], 7)?];
    series.extend(synth.commodities.iter().cloned());
    let mut panel = merge_panel(&series)?;

    let det = detect_outliers(panel.column("Gold")?, panel.months(), &DetectionConfig { window: 1, ..Default::default() })?;
    println!("{} flagged months, {} injected shocks", det.flags.count(), synth.index_shocks["Gold"].len());
    panel.push_column("Gold_outlier", det.flags.indicator())?;

    let setup = ForecastSetup {
        target: "Milk".into(),
        indices: vec!["Gold".into()],
        flag_columns: vec!["Gold_outlier".into()],
        lookback: 12,
        horizon: 3,
        hidden: 8,
        split_fraction: 0.8,
        train: TrainConfig { epochs: 400, learning_rate: 0.01, seed: 5, ..Default::default() },
    };
    for variant in [Variant::WithOutliers, Variant::WithoutOutliers] {
        let (model, res) = fit_and_forecast(&panel, &setup, variant)?;
        println!(
            "{}: {} parameters, test rmse {:.4}, loss {:.5} -> {:.5}",
            variant.label(),
            model.n_params(),
            res.rmse_scaled,
            res.loss_trace[0],
            res.loss_trace.last().unwrap()
        );
        for (m, v) in res.forecast_months.iter().zip(&res.forecast) {
            println!("  {m}  {v:.0}");
        }
    }
    Ok(())
}

//! Scores the five regression baselines on a chronological split.
//!
//!     cargo run --example baselines

use agforecast::baselines::{evaluate_baselines, BaselinesConfig};
use agforecast::dataio::{align_to_month_start, generate_synthetic_panel, merge_panel, SyntheticPanelSpec};

fn main() -> agforecast::Result<()> {
    let spec = SyntheticPanelSpec { indices: vec!["Gold".into(), "Oil".into()], commodities: vec!["Cheese".into()], ..Default::default() };
    let synth = generate_synthetic_panel(&spec)?;
    let mut series = synth.daily_indices.iter().map(|d| align_to_month_start(d, 7)).collect::<agforecast::Result<Vec<_>>>()?;
    series.extend(synth.commodities.iter().cloned());
    let panel = merge_panel(&series)?;

    let evals = evaluate_baselines(&panel, "Cheese", &["Gold", "Oil"], 0.8, &BaselinesConfig::default())?;
    println!("{:<22} {:>10} {:>14} {:>8}", "model", "rmse", "rmse (units)", "r2");
    for e in evals {
        let r2 = e.r2.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!("{:<22} {:>10.4} {:>14.0} {:>8}", e.kind.label(), e.rmse_scaled, e.rmse, r2);
    }
    Ok(())
}

//! Aligns daily index closes to month starts and merges them with monthly
//! production into one panel.
//!
//!     cargo run --example ingest_align

use agforecast::dataio::{align_to_month_start, generate_synthetic_panel, merge_panel, write_panel_csv, SyntheticPanelSpec};

fn main() -> agforecast::Result<()> {
    let spec = SyntheticPanelSpec { n_months: 36, ..Default::default() };
    let synth = generate_synthetic_panel(&spec)?;

    let gold = &synth.daily_indices[0];
    println!("{}: {} weekday closes from {} to {}", gold.name(), gold.len(), gold.first_date(), gold.last_date());

    let mut series = Vec::new();
    for daily in &synth.daily_indices {
        // a month start on a weekend takes the last close within 7 days before it
        series.push(align_to_month_start(daily, 7)?);
    }
    series.extend(synth.commodities.iter().take(3).cloned());
    let panel = merge_panel(&series)?;
    println!("panel: {} months x {} columns", panel.len(), panel.columns().len());

    let mut out = Vec::new();
    write_panel_csv(&panel.slice(0, 4), &mut out)?;
    print!("{}", String::from_utf8_lossy(&out));
    Ok(())
}

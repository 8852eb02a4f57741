//! Correlation and lagged-causation scores between every commodity and
//! index, and the resulting feature pairing.
//!
//!     cargo run --example relate_pairing

use agforecast::dataio::{align_to_month_start, generate_synthetic_panel, merge_panel, SyntheticPanelSpec};
use agforecast::relations::{pair_all, relation_matrix, write_pairing_csv, RelationConfig};

fn main() -> agforecast::Result<()> {
    let spec = SyntheticPanelSpec { commodities: vec!["Milk".into(), "Eggs".into(), "Pork".into(), "Veal".into()], ..Default::default() };
    let synth = generate_synthetic_panel(&spec)?;
    let mut series = synth.daily_indices.iter().map(|d| align_to_month_start(d, 7)).collect::<agforecast::Result<Vec<_>>>()?;
    series.extend(synth.commodities.iter().cloned());
    let panel = merge_panel(&series)?;

    let c: Vec<&str> = spec.commodities.iter().map(String::as_str).collect();
    let i: Vec<&str> = spec.indices.iter().map(String::as_str).collect();
    let m = relation_matrix(&panel, &c, &i, &RelationConfig::default())?;

    let mut out = Vec::new();
    m.write_correlation_csv(&mut out)?;
    println!("correlation\n{}", String::from_utf8_lossy(&out));

    let pairs = pair_all(&m)?;
    let mut out = Vec::new();
    write_pairing_csv(&pairs, &mut out)?;
    println!("pairing\n{}", String::from_utf8_lossy(&out));
    for p in &pairs {
        println!("{} generated from {}, paired with {:?}", p.commodity, synth.links[&p.commodity], p.paired_indices());
    }
    Ok(())
}

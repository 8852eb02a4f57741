//! Runs every pipeline stage on a small synthetic snapshot and prints the
//! comparison table.
//!
//!     cargo run --release --example full_pipeline [output_dir]

use agforecast::lstm::Variant;
use agforecast::pipeline::{Pipeline, PipelineConfig};

const CONFIG: &str = r#"
output_dir = "out"
[data]
source = "synthetic"
n_months = 120
commodities = ["Milk", "Eggs", "Pork", "Beef", "Veal"]
[preprocess]
window = 1
[baselines.forest]
n_trees = 30
[lstm]
lookback = 12
horizon = 3
hidden = 8
epochs = 60
learning_rate = 0.01
"#;

fn main() -> agforecast::Result<()> {
    let mut config = PipelineConfig::from_toml_str(CONFIG)?;
    config.output_dir = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("agforecast_example"), Into::into);
    let pipeline = Pipeline::new(config)?;
    let report = pipeline.run_all(&[Variant::WithOutliers, Variant::WithoutOutliers])?;

    let comparison = report.comparison.as_ref().expect("report stage builds a comparison");
    for row in &comparison.rows {
        println!(
            "{:<6} best baseline {:<22} {:.4} | with {:.4} | without {:.4} | winner {}",
            row.commodity,
            row.best_baseline,
            row.best_baseline_rmse,
            row.rmse_with,
            row.rmse_without,
            row.winners.join("/")
        );
    }
    let s = &comparison.summary;
    println!("with outliers beat without on {} of {} commodities", s.with_beats_without, s.commodities);
    println!("artifacts in {}", pipeline.out_dir().display());
    Ok(())
}

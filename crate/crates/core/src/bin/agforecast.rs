use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use agforecast::lstm::Variant;
use agforecast::pipeline::{Pipeline, PipelineConfig};

#[derive(Parser)]
#[command(name = "agforecast", version, about = "Outlier-aware production forecasting pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Pipeline config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed applied to every stochastic stage.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Which LSTM variants `train` and `run-all` fit.
    #[arg(long, global = true, value_enum, default_value_t = VariantArg::Both)]
    variant: VariantArg,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Load index and commodity series and build the monthly panel.
    Ingest,
    /// Flag outlier months of every index.
    Detect,
    /// Score correlation and causation, then pair indices with commodities.
    Relate,
    /// Fit and score the regression baselines.
    Baselines,
    /// Train the LSTM forecasters.
    Train,
    /// Compare all models and write the summary tables.
    Report,
    /// Every stage in order.
    RunAll,
}

#[derive(ValueEnum, Clone, Copy)]
enum VariantArg {
    With,
    Without,
    Both,
}

impl VariantArg {
    fn variants(self) -> Vec<Variant> {
        match self {
            VariantArg::With => vec![Variant::WithOutliers],
            VariantArg::Without => vec![Variant::WithoutOutliers],
            VariantArg::Both => vec![Variant::WithOutliers, Variant::WithoutOutliers],
        }
    }
}

fn run(cli: &Cli) -> agforecast::Result<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| agforecast::Error::Config("--config <path> is required".into()))?;
    let mut config = PipelineConfig::load(path)?;
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.override_seed(seed);
    }
    let pipeline = Pipeline::new(config)?;
    let variants = cli.variant.variants();
    match cli.command {
        Command::Ingest => {
            let s = pipeline.ingest()?;
            log::info!("{} indices, {} commodities, {} months", s.indices.len(), s.commodities.len(), s.months);
        }
        Command::Detect => {
            pipeline.detect()?;
        }
        Command::Relate => {
            pipeline.relate()?;
        }
        Command::Baselines => {
            pipeline.baselines()?;
        }
        Command::Train => {
            pipeline.train(&variants)?;
        }
        Command::Report => {
            pipeline.report()?;
        }
        Command::RunAll if variants.len() == 2 => {
            pipeline.run_all(&variants)?;
        }
        Command::RunAll => {
            pipeline.ingest()?;
            pipeline.detect()?;
            pipeline.relate()?;
            pipeline.baselines()?;
            pipeline.train(&variants)?;
            log::warn!("report skipped: it compares both LSTM variants");
        }
    }
    println!("artifacts in {}", pipeline.out_dir().display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::BaselinesConfig;
use crate::dataio::{CsvSchema, SyntheticPanelSpec};
use crate::error::{Error, Result};
use crate::lstm::TrainConfig;
use crate::outliers::DetectionInput;
use crate::relations::RelationConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub outliers: OutlierStageConfig,
    #[serde(default)]
    pub relations: RelationConfig,
    #[serde(default)]
    pub baselines: BaselinesConfig,
    #[serde(default)]
    pub lstm: LstmStageConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataConfig {
    /// One CSV per index (daily closes) and one per commodity (monthly
    /// production). Series are named after the file stems.
    Csv {
        indices_dir: PathBuf,
        commodities_dir: PathBuf,
        #[serde(default)]
        schema: CsvSchema,
        #[serde(default = "default_lookback_days")]
        lookback_days: i64,
    },
    Synthetic {
        #[serde(flatten)]
        spec: SyntheticPanelSpec,
    },
}

fn default_lookback_days() -> i64 {
    7
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Double-rolling-aggregate window, in observations.
    pub window: usize,
    pub split_fraction: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { window: 5, split_fraction: 0.8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagScope {
    /// Flags of the commodity's paired indices only.
    #[default]
    Paired,
    /// Flags of every index.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutlierStageConfig {
    pub n_trees: usize,
    /// Rows per tree; `min(256, n)` when absent.
    pub sample_size: Option<usize>,
    pub fence_k: f64,
    pub seed: u64,
    pub input: DetectionInput,
    pub flag_scope: FlagScope,
}

impl Default for OutlierStageConfig {
    fn default() -> Self {
        Self { n_trees: 100, sample_size: None, fence_k: 1.5, seed: 0, input: DetectionInput::ChangeSignal, flag_scope: FlagScope::Paired }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmStageConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: Option<usize>,
    pub gradient_clip: f64,
    pub seed: u64,
}

impl Default for LstmStageConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            lookback: 60,
            horizon: 30,
            hidden: 64,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            gradient_clip: t.gradient_clip,
            seed: t.seed,
        }
    }
}

impl LstmStageConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed: self.seed,
            gradient_clip: self.gradient_clip,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let DataConfig::Csv { indices_dir, commodities_dir, .. } = &mut cfg.data {
            for dir in [indices_dir, commodities_dir] {
                if dir.is_relative() {
                    *dir = base.join(&*dir);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.lstm.lookback == 0 || self.lstm.horizon == 0 || self.lstm.hidden == 0 {
            return bad("lstm lookback, horizon and hidden must be at least 1".into());
        }
        let f = self.preprocess.split_fraction;
        if !(f > 0.5 && f < 0.95) {
            return bad(format!("split_fraction {f} must lie in (0.5, 0.95)"));
        }
        if self.preprocess.window == 0 {
            return bad("preprocess window must be at least 1".into());
        }
        if self.outliers.n_trees == 0 {
            return bad("outliers n_trees must be at least 1".into());
        }
        if self.relations.lags == 0 {
            return bad("relations lags must be at least 1".into());
        }
        Ok(())
    }

    /// Paths must exist when a stage actually reads them.
    pub fn check_paths(&self) -> Result<()> {
        if let DataConfig::Csv { indices_dir, commodities_dir, .. } = &self.data {
            for dir in [indices_dir, commodities_dir] {
                if !dir.is_dir() {
                    return Err(Error::Config(format!("data directory {} does not exist", dir.display())));
                }
            }
        }
        Ok(())
    }

    /// Points every stochastic component at one seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.outliers.seed = seed;
        self.baselines.forest.seed = seed;
        self.baselines.gbt.seed = seed;
        self.lstm.seed = seed;
        if let DataConfig::Synthetic { spec } = &mut self.data {
            spec.seed = seed;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
output_dir = "out"
[data]
source = "synthetic"
n_months = 120
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = PipelineConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.lstm.lookback, 60);
        assert_eq!(cfg.lstm.horizon, 30);
        assert_eq!(cfg.preprocess.split_fraction, 0.8);
        match cfg.data {
            DataConfig::Synthetic { spec } => {
                assert_eq!(spec.n_months, 120);
                assert_eq!(spec.commodities.len(), 15);
            }
            _ => panic!("expected synthetic data"),
        }
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let bad_split = format!("{MINIMAL}\n[preprocess]\nsplit_fraction = 0.99\n");
        let e = PipelineConfig::from_toml_str(&bad_split).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let bad_key = format!("{MINIMAL}\n[lstm]\nlookbak = 3\n");
        assert!(matches!(PipelineConfig::from_toml_str(&bad_key), Err(Error::Config(_))));
        let zero = format!("{MINIMAL}\n[lstm]\nhorizon = 0\n");
        assert!(matches!(PipelineConfig::from_toml_str(&zero), Err(Error::Config(_))));
    }

    #[test]
    fn csv_source_requires_existing_dirs() {
        let text = r#"
output_dir = "out"
[data]
source = "csv"
indices_dir = "/nonexistent/indices"
commodities_dir = "/nonexistent/commodities"
"#;
        let cfg = PipelineConfig::from_toml_str(text).unwrap();
        assert!(matches!(cfg.check_paths(), Err(Error::Config(_))));

        let custom = format!("{text}[data.schema]\ndate_column = \"Date\"\nvalue_column = \"Close\"\n");
        match PipelineConfig::from_toml_str(&custom).unwrap().data {
            DataConfig::Csv { schema, lookback_days, .. } => {
                assert_eq!((schema.date_column.as_str(), schema.value_column.as_str()), ("Date", "Close"));
                assert_eq!(lookback_days, 7);
            }
            _ => panic!("expected csv data"),
        }
    }

    #[test]
    fn seed_override_reaches_every_stage() {
        let mut cfg = PipelineConfig::from_toml_str(MINIMAL).unwrap();
        cfg.override_seed(99);
        assert_eq!(
            (cfg.outliers.seed, cfg.baselines.forest.seed, cfg.baselines.gbt.seed, cfg.lstm.seed),
            (99, 99, 99, 99)
        );
    }
}

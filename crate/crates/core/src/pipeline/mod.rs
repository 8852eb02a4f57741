//! Stage-by-stage orchestration. Every stage reads the artifacts of earlier
//! stages from the output directory and writes its own next to them; after
//! each stage `manifest.json` is rewritten with the SHA-256 of every file.
//!
//! | stage     | reads                                   | writes |
//! |-----------|-----------------------------------------|--------|
//! | ingest    | config data source                      | `panel.csv`, `daily/<index>.csv`, `ingest.json` |
//! | detect    | ingest outputs                          | `flags/<index>.csv`, `contamination_daily.csv`, `contamination_monthly.csv` |
//! | relate    | `panel.csv`, `ingest.json`              | `correlation.csv`, `causation.csv`, `causation_pvalues.csv`, `pairing.csv` |
//! | baselines | `panel.csv`, `pairing.csv`              | `baselines.csv`, `baselines.json` |
//! | train     | `panel.csv`, `pairing.csv`, `flags/`    | `lstm_<variant>.json`, `forecasts_<variant>.json`, `models/` |
//! | report    | baselines and both train variants       | `report.json`, `table5.csv`, `table6.csv`, `model_scores.csv`, `forecast_<commodity>.csv` |

mod config;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{DataConfig, FlagScope, LstmStageConfig, OutlierStageConfig, PipelineConfig, PreprocessConfig};

use crate::baselines::evaluate_baselines;
use crate::dataio::{
    align_to_month_start, generate_synthetic_panel, load_csv, merge_panel, read_csv, read_panel_csv, to_monthly,
    write_panel_csv, write_series_csv, CsvSchema, MonthlyPanel, TimeSeries,
};
use crate::error::{Error, Result};
use crate::lstm::{fit_and_forecast, ForecastResult, ForecastSetup, Variant};
use crate::outliers::{contamination_from_signal, detect_outliers, DetectionConfig, OutlierFlags};
use crate::preprocess::double_rolling_aggregate;
use crate::relations::{pair_all, read_pairing_csv, relation_matrix, write_pairing_csv, PairingResult};
use crate::report::{
    build_comparison, write_forecast_csv, write_model_scores, write_table5, write_table6, EvalReport, EvalRow,
    ForecastTable, ReportMetadata,
};

pub const MANIFEST: &str = "manifest.json";

/// Names of the series found by `ingest`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub indices: Vec<String>,
    pub commodities: Vec<String>,
    pub months: usize,
    pub first_month: String,
    pub last_month: String,
    /// Rows skipped for empty values, per series (CSV sources only).
    pub dropped_rows: BTreeMap<String, usize>,
    pub provenance: BTreeMap<String, String>,
}

/// Contamination and flag counts for one index at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationRow {
    pub index: String,
    pub observations: usize,
    pub contamination: f64,
    pub flagged: usize,
}

pub fn flag_column(index: &str) -> String {
    format!("{index}_outlier")
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_hash(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, stage: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|_| Error::MissingArtifact(stage.to_string()))?;
    Ok(serde_json::from_str(&text)?)
}

fn open_artifact(path: &Path, stage: &str) -> Result<File> {
    File::open(path).map_err(|_| Error::MissingArtifact(stage.to_string()))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Relative path → SHA-256 for every file under `dir` except the manifest.
pub fn build_manifest(dir: &Path) -> Result<BTreeMap<String, String>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).expect("under root").to_string_lossy().replace('\\', "/");
                if rel != MANIFEST {
                    out.insert(rel, file_hash(&path)?);
                }
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out)?;
    Ok(out)
}

/// A configured pipeline bound to its output directory.
pub struct Pipeline {
    pub config: PipelineConfig,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.output_dir
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.config.output_dir.join(rel)
    }

    /// Wraps stage errors, leaving config and missing-artifact errors as is.
    fn stage<T>(&self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        log::info!("stage {name}");
        fs::create_dir_all(self.out_dir())?;
        let out = f().map_err(|e| match e {
            Error::Config(_) | Error::MissingArtifact(_) | Error::StageFailure { .. } => e,
            other => Error::StageFailure { stage: name.to_string(), source: Box::new(other) },
        })?;
        write_json(&self.path(MANIFEST), &build_manifest(self.out_dir())?)?;
        Ok(out)
    }

    fn load_panel(&self) -> Result<MonthlyPanel> {
        read_panel_csv(open_artifact(&self.path("panel.csv"), "ingest")?)
    }

    fn load_summary(&self) -> Result<IngestSummary> {
        read_json(&self.path("ingest.json"), "ingest")
    }

    fn load_pairings(&self) -> Result<Vec<PairingResult>> {
        read_pairing_csv(open_artifact(&self.path("pairing.csv"), "relate")?)
    }

    pub fn ingest(&self) -> Result<IngestSummary> {
        self.stage("ingest", || {
            let (daily, commodities, dropped) = match &self.config.data {
                DataConfig::Synthetic { spec } => {
                    let p = generate_synthetic_panel(spec)?;
                    (p.daily_indices, p.commodities, BTreeMap::new())
                }
                DataConfig::Csv { indices_dir, commodities_dir, schema, .. } => {
                    self.config.check_paths()?;
                    let mut dropped = BTreeMap::new();
                    let daily = load_dir(indices_dir, schema, &mut dropped)?;
                    let monthly = load_dir(commodities_dir, schema, &mut dropped)?
                        .iter()
                        .map(to_monthly)
                        .collect::<Result<Vec<_>>>()?;
                    (daily, monthly, dropped)
                }
            };
            let lookback = match &self.config.data {
                DataConfig::Csv { lookback_days, .. } => *lookback_days,
                DataConfig::Synthetic { .. } => 7,
            };
            let mut monthly: Vec<TimeSeries> =
                daily.iter().map(|d| align_to_month_start(d, lookback)).collect::<Result<_>>()?;
            monthly.extend(commodities.iter().cloned());
            let panel = merge_panel(&monthly)?;
            for d in &daily {
                write_series_csv(d, create(&self.path(&format!("daily/{}.csv", d.name())))?)?;
            }
            write_panel_csv(&panel, create(&self.path("panel.csv"))?)?;
            let summary = IngestSummary {
                indices: daily.iter().map(|d| d.name().to_string()).collect(),
                commodities: commodities.iter().map(|c| c.name().to_string()).collect(),
                months: panel.len(),
                first_month: panel.months()[0].to_string(),
                last_month: panel.months()[panel.len() - 1].to_string(),
                dropped_rows: dropped,
                provenance: panel.provenance().clone(),
            };
            write_json(&self.path("ingest.json"), &summary)?;
            Ok(summary)
        })
    }

    fn detection_config(&self) -> DetectionConfig {
        let o = &self.config.outliers;
        DetectionConfig {
            input: o.input,
            window: self.config.preprocess.window,
            fence_k: o.fence_k,
            n_trees: o.n_trees,
            sample_size: o.sample_size,
            seed: o.seed,
        }
    }

    /// Daily and monthly contamination per index, plus monthly flags.
    pub fn detect(&self) -> Result<(Vec<ContaminationRow>, Vec<ContaminationRow>)> {
        self.stage("detect", || {
            let summary = self.load_summary()?;
            let panel = self.load_panel()?;
            let cfg = self.detection_config();
            let mut daily_rows = Vec::new();
            let mut monthly_rows = Vec::new();
            for name in &summary.indices {
                let file = open_artifact(&self.path(&format!("daily/{name}.csv")), "ingest")?;
                let daily = read_csv(file, name, &CsvSchema::default())?.series;
                let dates = daily.dates();
                let det = detect_outliers(&daily.values(), &dates, &cfg)?;
                daily_rows.push(ContaminationRow {
                    index: name.clone(),
                    observations: daily.len(),
                    contamination: det.contamination,
                    flagged: det.flags.count(),
                });

                let values = panel.column(name)?;
                let det = detect_outliers(values, panel.months(), &cfg)?;
                det.flags.write_csv(create(&self.path(&format!("flags/{name}.csv")))?)?;
                monthly_rows.push(ContaminationRow {
                    index: name.clone(),
                    observations: values.len(),
                    contamination: det.contamination,
                    flagged: det.flags.count(),
                });
            }
            write_rows(&self.path("contamination_daily.csv"), &daily_rows)?;
            write_rows(&self.path("contamination_monthly.csv"), &monthly_rows)?;
            Ok((daily_rows, monthly_rows))
        })
    }

    pub fn relate(&self) -> Result<Vec<PairingResult>> {
        self.stage("relate", || {
            let summary = self.load_summary()?;
            let panel = self.load_panel()?;
            let c: Vec<&str> = summary.commodities.iter().map(String::as_str).collect();
            let i: Vec<&str> = summary.indices.iter().map(String::as_str).collect();
            let m = relation_matrix(&panel, &c, &i, &self.config.relations)?;
            m.write_correlation_csv(create(&self.path("correlation.csv"))?)?;
            m.write_causation_csv(create(&self.path("causation.csv"))?)?;
            let pv = crate::relations::RelationMatrix { causation: m.p_values.clone(), ..m.clone() };
            pv.write_causation_csv(create(&self.path("causation_pvalues.csv"))?)?;
            let pairs = pair_all(&m)?;
            write_pairing_csv(&pairs, create(&self.path("pairing.csv"))?)?;
            Ok(pairs)
        })
    }

    pub fn baselines(&self) -> Result<EvalReport> {
        self.stage("baselines", || {
            let panel = self.load_panel()?;
            let pairs = self.load_pairings()?;
            let split = self.config.preprocess.split_fraction;
            let per_commodity: Vec<Vec<EvalRow>> = pairs
                .par_iter()
                .map(|p| {
                    let paired = p.paired_indices();
                    let refs: Vec<&str> = paired.iter().map(String::as_str).collect();
                    let evals = evaluate_baselines(&panel, &p.commodity, &refs, split, &self.config.baselines)?;
                    Ok(evals
                        .into_iter()
                        .map(|e| EvalRow {
                            commodity: p.commodity.clone(),
                            model: e.kind.label().to_string(),
                            rmse_scaled: e.rmse_scaled,
                            rmse: e.rmse,
                            r2: e.r2,
                            prediction_last: e.prediction_last,
                            paired_indices: paired.clone(),
                        })
                        .collect())
                })
                .collect::<Result<_>>()?;
            let report = EvalReport::from_rows(per_commodity.into_iter().flatten().collect());
            write_model_scores(&report, create(&self.path("baselines.csv"))?)?;
            write_json(&self.path("baselines.json"), &report)?;
            Ok(report)
        })
    }

    /// Trains one LSTM per commodity and variant.
    pub fn train(&self, variants: &[Variant]) -> Result<Vec<EvalReport>> {
        self.stage("train", || {
            let summary = self.load_summary()?;
            let mut panel = self.load_panel()?;
            let pairs = self.load_pairings()?;
            for index in &summary.indices {
                let file = open_artifact(&self.path(&format!("flags/{index}.csv")), "outliers")?;
                let flags = OutlierFlags::read_csv(file)?;
                if flags.months != panel.months() {
                    return Err(Error::MissingArtifact("outliers".into()));
                }
                panel.push_column(flag_column(index), flags.indicator())?;
            }
            let lstm = &self.config.lstm;
            let jobs: Vec<(&PairingResult, Variant)> =
                pairs.iter().flat_map(|p| variants.iter().map(move |&v| (p, v))).collect();
            let results: Vec<(EvalRow, ForecastResult, String)> = jobs
                .par_iter()
                .map(|&(p, variant)| {
                    let paired = p.paired_indices();
                    let flag_sources = match self.config.outliers.flag_scope {
                        FlagScope::Paired => paired.clone(),
                        FlagScope::All => summary.indices.clone(),
                    };
                    let setup = ForecastSetup {
                        target: p.commodity.clone(),
                        indices: paired.clone(),
                        flag_columns: flag_sources.iter().map(|i| flag_column(i)).collect(),
                        lookback: lstm.lookback,
                        horizon: lstm.horizon,
                        hidden: lstm.hidden,
                        split_fraction: self.config.preprocess.split_fraction,
                        train: lstm.train_config(),
                    };
                    let (model, res) = fit_and_forecast(&panel, &setup, variant)?;
                    let row = EvalRow {
                        commodity: p.commodity.clone(),
                        model: variant.label().to_string(),
                        rmse_scaled: res.rmse_scaled,
                        rmse: res.rmse,
                        r2: res.r2,
                        prediction_last: *res.forecast.last().expect("horizon ≥ 1"),
                        paired_indices: paired,
                    };
                    Ok((row, res, model.to_json()?))
                })
                .collect::<Result<_>>()?;
            let mut fragments = Vec::new();
            for &variant in variants {
                let picked: Vec<&(EvalRow, ForecastResult, String)> =
                    results.iter().filter(|r| r.1.variant == variant).collect();
                for (row, _, model) in &picked {
                    fs::create_dir_all(self.path("models"))?;
                    fs::write(self.path(&format!("models/lstm_{}_{}.json", row.commodity, variant.tag())), model)?;
                }
                let report = EvalReport::from_rows(picked.iter().map(|r| r.0.clone()).collect());
                let forecasts: Vec<(&str, &ForecastResult)> =
                    picked.iter().map(|r| (r.0.commodity.as_str(), &r.1)).collect();
                write_json(&self.path(&format!("lstm_{}.json", variant.tag())), &report)?;
                write_json(&self.path(&format!("forecasts_{}.json", variant.tag())), &forecasts)?;
                fragments.push(report);
            }
            Ok(fragments)
        })
    }

    pub fn report(&self) -> Result<EvalReport> {
        self.stage("report", || {
            let panel = self.load_panel()?;
            let baselines: EvalReport = read_json(&self.path("baselines.json"), "baselines")?;
            let with: EvalReport = read_json(&self.path("lstm_with_outliers.json"), "train")?;
            let without: EvalReport = read_json(&self.path("lstm_without_outliers.json"), "train")?;
            let fc_with: Vec<(String, ForecastResult)> = read_json(&self.path("forecasts_with_outliers.json"), "train")?;
            let fc_without: Vec<(String, ForecastResult)> =
                read_json(&self.path("forecasts_without_outliers.json"), "train")?;

            let mut report = build_comparison(&[baselines, with, without])?;
            report.metadata = self.metadata()?;
            write_json(&self.path("report.json"), &report)?;
            write_table5(&report, create(&self.path("table5.csv"))?)?;
            write_table6(report.comparison.as_ref().expect("comparison built"), create(&self.path("table6.csv"))?)?;
            write_model_scores(&report, create(&self.path("model_scores.csv"))?)?;

            for (name, w) in &fc_with {
                let wo = fc_without
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, r)| r)
                    .ok_or(Error::CommoditySetMismatch)?;
                let actual = panel.column(name)?;
                let n = panel.len();
                let h = w.forecast.len();
                let mut t = ForecastTable::default();
                t.months.extend(panel.months().iter().chain(&w.forecast_months).copied());
                t.actual.extend(actual.iter().map(|&v| Some(v)).chain(std::iter::repeat_n(None, h)));
                t.fitted.extend(w.history_fit.iter().copied().chain(std::iter::repeat_n(None, h)));
                t.forecast_with.extend(std::iter::repeat_n(None, n).chain(w.forecast.iter().map(|&v| Some(v))));
                t.forecast_without.extend(std::iter::repeat_n(None, n).chain(wo.forecast.iter().map(|&v| Some(v))));
                write_forecast_csv(&t, create(&self.path(&format!("forecast_{name}.csv")))?)?;
            }
            Ok(report)
        })
    }

    fn metadata(&self) -> Result<ReportMetadata> {
        let mut seeds = BTreeMap::new();
        seeds.insert("outliers".to_string(), self.config.outliers.seed);
        seeds.insert("random_forest".to_string(), self.config.baselines.forest.seed);
        seeds.insert("gradient_boosting".to_string(), self.config.baselines.gbt.seed);
        seeds.insert("lstm".to_string(), self.config.lstm.seed);
        if let DataConfig::Synthetic { spec } = &self.config.data {
            seeds.insert("synthetic_data".to_string(), spec.seed);
        }
        let mut data_hashes = BTreeMap::new();
        data_hashes.insert("panel.csv".to_string(), file_hash(&self.path("panel.csv"))?);
        let mut config = serde_json::to_value(&self.config)?;
        // the output location does not change any result
        if let Some(obj) = config.as_object_mut() {
            obj.remove("output_dir");
        }
        Ok(ReportMetadata { config, seeds, data_hashes })
    }

    pub fn run_all(&self, variants: &[Variant]) -> Result<EvalReport> {
        self.ingest()?;
        self.detect()?;
        self.relate()?;
        self.baselines()?;
        self.train(variants)?;
        self.report()
    }
}

fn load_dir(dir: &Path, schema: &CsvSchema, dropped: &mut BTreeMap<String, usize>) -> Result<Vec<TimeSeries>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")));
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!("no CSV files in {}", dir.display())));
    }
    files
        .iter()
        .map(|f| {
            let loaded = load_csv(f, schema)?;
            dropped.insert(loaded.series.name().to_string(), loaded.dropped_rows);
            Ok(loaded.series)
        })
        .collect()
}

/// Contamination of a change signal without fitting a forest; used for quick
/// per-index summaries.
pub fn signal_contamination(values: &[f64], window: usize, fence_k: f64) -> Result<f64> {
    contamination_from_signal(&double_rolling_aggregate(values, window)?, fence_k)
}

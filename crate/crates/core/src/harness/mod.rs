//! Experiment driver: configuration, the feature pipeline, sweeps over
//! connectivity and coupling grids, CUE ensembles, entropy scans, PCA-only
//! baselines and plot-ready series.
//!
//! Every sweep point derives its seeds from the experiment seed and its own
//! descriptor, so rows are identical whichever worker ran them. Result files
//! are written through a temporary file and renamed into place.

mod cache;
mod config;
mod pipeline;
mod plot;
mod sweep;

pub use cache::{content_key, FeatureCache, FeatureSet, FEATURE_FORMAT_VERSION, FEATURE_MAGIC};
pub use config::{
    parse_angle, ExperimentConfig, Grid, ReservoirChoice, SchemeSelection, TrainSettings,
    DEFAULT_GRID_POINTS, THETA_C_SEARCH_POINTS,
};
pub use pipeline::{
    baseline_learning_rate, compute_features, encode_data, evaluate_point, reservoir_features,
    run_pca_baseline_on, test_set_entropy, EncodedData, PointOutcome, PreparedData,
};
pub use plot::{emit_plot_data, PlotKind, PlotRow};
pub use sweep::{
    build_spec, enumerate_configs, enumerate_points, flag_eta_star, group_key, run_cue_ensemble_on,
    run_entropy_sweep_on, run_single_on, run_sweep_on, summarize_ensemble, EnsembleRow,
    EntropyRow, EnumerationRow, SingleOutcome, SweepPoint, SweepResultRow,
};

use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

use crate::classifier::{ClassifierError, RunResult};
use crate::datasets::{Dataset, DatasetError};
use crate::entanglement::EntanglementError;
use crate::preprocess::PreprocessError;
use crate::reservoir::ReservoirError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("sweep has {points} points, above the cap of {cap}; raise max_points or narrow the grid")]
    Cap { points: usize, cap: usize },
    #[error("cache: {0}")]
    Cache(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Reservoir(#[from] ReservoirError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Entanglement(#[from] EntanglementError),
    #[error("worker pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// `<crate version> (<git describe>)`, fixed at build time.
pub const fn version() -> &'static str {
    concat!(env!("CARGO_PKG_VERSION"), " (", env!("MQERC_GIT_DESCRIBE"), ")")
}

/// Shared settings of a harness invocation.
#[derive(Debug, Clone, Default)]
pub struct Harness {
    pub data_dir: PathBuf,
    pub cache: Option<FeatureCache>,
    /// Worker threads; the rayon default when `None`.
    pub jobs: Option<usize>,
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    command: &'a str,
    version: &'static str,
    config: &'a ExperimentConfig,
    wall_time_s: f64,
    rows: usize,
    outputs: Vec<String>,
    details: T,
}

/// Serialises `rows` as CSV with a header row, even when empty.
pub fn rows_to_csv<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| HarnessError::Cache(e.to_string()))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    cache::write_atomic(path, |f| std::io::Write::write_all(f, bytes))
}

pub const SWEEP_COLUMNS: [&str; 24] = [
    "config_descriptor", "dataset", "kind", "layout", "scheme", "family", "group", "r_cross", "n_a", "n_l",
    "connected", "theta_j", "alpha", "range", "theta_c", "theta_g", "realization", "seed", "eta", "eta_star",
    "mean_entropy_bits", "std_entropy_bits", "max_unitarity_defect", "wall_time_s",
];

pub const ENTROPY_COLUMNS: [&str; 5] = ["config_descriptor", "theta_c", "mean_entropy_bits", "std_entropy_bits", "n_test"];

pub const ENSEMBLE_COLUMNS: [&str; 8] = [
    "n_l", "theta_c", "realizations", "mean_eta", "std_eta", "mean_entropy_bits", "std_entropy_bits",
    "max_unitarity_defect",
];

pub const PLOT_COLUMNS: [&str; 7] = ["group", "x", "y", "spread", "y_min", "y_max", "count"];

pub const ENUMERATION_COLUMNS: [&str; 9] = ["index", "scheme", "family", "group", "r_cross", "n_a", "n_l", "n_edges", "connected"];

/// One line of the PCA-only baseline CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRow {
    pub dataset: String,
    pub components: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub eta: f64,
    pub wall_time_s: f64,
}

impl Harness {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self { data_dir: data_dir.into(), cache: None, jobs: None }
    }

    /// Runs `f` on a pool of `jobs` threads (or the global pool).
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R> {
        match self.jobs {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| HarnessError::Pool(e.to_string()))?;
                Ok(pool.install(f))
            }
            None => Ok(f()),
        }
    }

    pub fn load(&self, cfg: &ExperimentConfig) -> Result<PreparedData> {
        let ds = Dataset::load(cfg.dataset, &self.data_dir)?;
        Ok(PreparedData::new(&ds, cfg.train_subset, cfg.test_subset))
    }

    fn stem(cfg: &ExperimentConfig, default: &str) -> String {
        cfg.output_stem.clone().unwrap_or_else(|| default.to_string())
    }

    fn finish<T: Serialize>(
        cfg: &ExperimentConfig,
        command: &str,
        start: Instant,
        rows: usize,
        mut outputs: Vec<PathBuf>,
        details: T,
    ) -> Result<Vec<PathBuf>> {
        let path = cfg.output_dir.join(format!("{}.summary.json", Self::stem(cfg, command)));
        let summary = Summary {
            command,
            version: version(),
            config: cfg,
            wall_time_s: start.elapsed().as_secs_f64(),
            rows,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            details,
        };
        write_file(&path, &serde_json::to_vec_pretty(&summary)?)?;
        outputs.push(path);
        Ok(outputs)
    }

    fn write_run(cfg: &ExperimentConfig, stem: &str, run: &RunResult, outputs: &mut Vec<PathBuf>) -> Result<()> {
        let mut epochs = Vec::new();
        run.write_epoch_csv(&mut epochs).map_err(|source| HarnessError::Io { path: cfg.output_dir.clone(), source })?;
        let path = cfg.output_dir.join(format!("{stem}.epochs.csv"));
        write_file(&path, &epochs)?;
        outputs.push(path);
        Ok(())
    }

    /// `run`: one configuration; writes the result row, epoch series and summary.
    pub fn run(&self, cfg: &ExperimentConfig) -> Result<(SingleOutcome, Vec<PathBuf>)> {
        cfg.validate()?;
        let data = self.load(cfg)?;
        self.run_with(cfg, &data)
    }

    pub fn run_with(&self, cfg: &ExperimentConfig, data: &PreparedData) -> Result<(SingleOutcome, Vec<PathBuf>)> {
        let start = Instant::now();
        let outcome = self.install(|| run_single_on(data, cfg, self.cache.as_ref()))??;
        let stem = Self::stem(cfg, "run");
        let path = cfg.output_dir.join(format!("{stem}.csv"));
        write_file(&path, &rows_to_csv(std::slice::from_ref(&outcome.row), &SWEEP_COLUMNS)?)?;
        let mut outputs = vec![path];
        Self::write_run(cfg, &stem, &outcome.run, &mut outputs)?;
        let details = serde_json::json!({ "run": &outcome.run, "entropy": &outcome.entropy, "spec": &outcome.spec });
        let outputs = Self::finish(cfg, "run", start, 1, outputs, details)?;
        Ok((outcome, outputs))
    }

    /// `sweep`: every point of the configuration.
    pub fn sweep(&self, cfg: &ExperimentConfig) -> Result<(Vec<SweepResultRow>, Vec<PathBuf>)> {
        cfg.validate()?;
        enumerate_points(cfg)?;
        let data = self.load(cfg)?;
        self.sweep_with(cfg, &data)
    }

    pub fn sweep_with(&self, cfg: &ExperimentConfig, data: &PreparedData) -> Result<(Vec<SweepResultRow>, Vec<PathBuf>)> {
        let start = Instant::now();
        let n_points = enumerate_points(cfg)?.len();
        let rows = self.install(|| run_sweep_on(data, cfg, self.cache.as_ref()))??;
        let path = cfg.output_dir.join(format!("{}.csv", Self::stem(cfg, "sweep")));
        write_file(&path, &rows_to_csv(&rows, &SWEEP_COLUMNS)?)?;
        let outputs = Self::finish(cfg, "sweep", start, rows.len(), vec![path], serde_json::json!({ "points": n_points }))?;
        Ok((rows, outputs))
    }

    /// `cue`: CUE realizations plus the ensemble summary.
    pub fn cue(&self, cfg: &ExperimentConfig) -> Result<(Vec<EnsembleRow>, Vec<PathBuf>)> {
        cfg.validate()?;
        enumerate_points(cfg)?;
        let data = self.load(cfg)?;
        self.cue_with(cfg, &data)
    }

    pub fn cue_with(&self, cfg: &ExperimentConfig, data: &PreparedData) -> Result<(Vec<EnsembleRow>, Vec<PathBuf>)> {
        let start = Instant::now();
        let (rows, summary) = self.install(|| run_cue_ensemble_on(data, cfg, self.cache.as_ref()))??;
        let stem = Self::stem(cfg, "cue");
        let rows_path = cfg.output_dir.join(format!("{stem}.csv"));
        write_file(&rows_path, &rows_to_csv(&rows, &SWEEP_COLUMNS)?)?;
        let ens_path = cfg.output_dir.join(format!("{stem}.ensemble.csv"));
        write_file(&ens_path, &rows_to_csv(&summary, &ENSEMBLE_COLUMNS)?)?;
        let outputs = Self::finish(cfg, "cue", start, rows.len(), vec![rows_path, ens_path], &summary)?;
        Ok((summary, outputs))
    }

    /// `entropy`: test-set `S̄` over the configured points.
    pub fn entropy(&self, cfg: &ExperimentConfig) -> Result<(Vec<EntropyRow>, Vec<PathBuf>)> {
        cfg.validate()?;
        enumerate_points(cfg)?;
        let data = self.load(cfg)?;
        self.entropy_with(cfg, &data)
    }

    pub fn entropy_with(&self, cfg: &ExperimentConfig, data: &PreparedData) -> Result<(Vec<EntropyRow>, Vec<PathBuf>)> {
        let start = Instant::now();
        let rows = self.install(|| run_entropy_sweep_on(data, cfg, self.cache.as_ref()))??;
        let path = cfg.output_dir.join(format!("{}.csv", Self::stem(cfg, "entropy")));
        write_file(&path, &rows_to_csv(&rows, &ENTROPY_COLUMNS)?)?;
        let outputs = Self::finish(cfg, "entropy", start, rows.len(), vec![path], ())?;
        Ok((rows, outputs))
    }

    /// `baseline-pca`: rescaled PCA components straight into the classifier.
    pub fn baseline_pca(&self, cfg: &ExperimentConfig, components: usize) -> Result<(RunResult, Vec<PathBuf>)> {
        let data = self.load(cfg)?;
        self.baseline_pca_with(cfg, &data, components)
    }

    pub fn baseline_pca_with(
        &self,
        cfg: &ExperimentConfig,
        data: &PreparedData,
        components: usize,
    ) -> Result<(RunResult, Vec<PathBuf>)> {
        let start = Instant::now();
        let lr = cfg.train.learning_rate.unwrap_or_else(|| baseline_learning_rate(components));
        let seed = crate::seed::derive_seed(cfg.seed, "baseline-pca", &[components as u64]);
        let train_cfg = cfg.train.to_train_config(lr, seed);
        let run = self.install(|| run_pca_baseline_on(data, components, &train_cfg))??;
        let stem = Self::stem(cfg, &format!("baseline-pca-{}-{components}", cfg.dataset));
        let row = BaselineRow {
            dataset: cfg.dataset.to_string(),
            components,
            learning_rate: lr,
            seed,
            eta: run.eta,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        let path = cfg.output_dir.join(format!("{stem}.csv"));
        write_file(&path, &rows_to_csv(&[row], &[])?)?;
        let mut outputs = vec![path];
        Self::write_run(cfg, &stem, &run, &mut outputs)?;
        let outputs = Self::finish(cfg, "baseline-pca", start, 1, outputs, &run)?;
        Ok((run, outputs))
    }

    /// `enumerate`: lists the configurations a scheme selection expands to.
    pub fn enumerate(&self, cfg: &ExperimentConfig) -> Result<(Vec<EnumerationRow>, Vec<PathBuf>)> {
        let start = Instant::now();
        let rows = enumerate_configs(cfg)?;
        let path = cfg.output_dir.join(format!("{}.csv", Self::stem(cfg, "enumerate")));
        write_file(&path, &rows_to_csv(&rows, &ENUMERATION_COLUMNS)?)?;
        let connected = rows.iter().filter(|r| r.connected).count();
        let outputs = Self::finish(cfg, "enumerate", start, rows.len(), vec![path], serde_json::json!({ "connected": connected }))?;
        Ok((rows, outputs))
    }
}

/// `plot-data`: reads a result CSV and writes the series for `kind`.
pub fn plot_data_file(input: &Path, kind: PlotKind, output: &Path) -> Result<Vec<PlotRow>> {
    let file = std::fs::File::open(input).map_err(|source| HarnessError::Io { path: input.to_path_buf(), source })?;
    let rows = emit_plot_data(file, kind)?;
    write_file(output, &rows_to_csv(&rows, &PLOT_COLUMNS)?)?;
    Ok(rows)
}

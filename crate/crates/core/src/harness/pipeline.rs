use log::{debug, info};
use rayon::prelude::*;
use std::sync::OnceLock;
use std::time::Instant;

use super::cache::{content_key, FeatureCache, FeatureSet};
use super::{HarnessError, Result};
use crate::classifier::{train, RunResult, Standardizer, TrainConfig};
use crate::datasets::Dataset;
use crate::entanglement::{average_entropy_with, EntropyReport};
use crate::matrix::SampleMatrix;
use crate::preprocess::{fit_pca, FeatureMap, PcaModel};
use crate::reservoir::{ReservoirKind, ReservoirSpec};
use crate::statevector::unitarity_defect;

/// A dataset after subsetting, with a lazily computed content fingerprint.
#[derive(Debug)]
pub struct PreparedData {
    pub dataset: Dataset,
    fingerprint: OnceLock<String>,
}

impl PreparedData {
    pub fn new(dataset: &Dataset, train_subset: Option<usize>, test_subset: Option<usize>) -> Self {
        let mut ds = dataset.with_train_subset(train_subset);
        if let Some(n) = test_subset.filter(|&n| n < ds.test_x.rows()) {
            ds.test_x = ds.test_x.head(n);
            ds.test_y.truncate(n);
        }
        Self { dataset: ds, fingerprint: OnceLock::new() }
    }

    /// SHA-256 over the name, shapes, pixels and labels of both splits.
    pub fn fingerprint(&self) -> &str {
        self.fingerprint.get_or_init(|| {
            let ds = &self.dataset;
            let bytes = |m: &SampleMatrix| -> Vec<u8> { m.as_slice().iter().flat_map(|x| x.to_le_bytes()).collect() };
            let shape = format!("{}:{}x{}:{}x{}", ds.name, ds.train_x.rows(), ds.train_x.cols(), ds.test_x.rows(), ds.test_x.cols());
            content_key(&[
                shape.as_bytes(),
                &bytes(&ds.train_x),
                &ds.train_y,
                &bytes(&ds.test_x),
                &ds.test_y,
            ])
        })
    }
}

/// PCA fitted on the training split and the rescaled components of both splits.
#[derive(Debug, Clone)]
pub struct EncodedData {
    pub pca: PcaModel,
    pub train: SampleMatrix,
    pub test: SampleMatrix,
    pub train_y: Vec<u8>,
    pub test_y: Vec<u8>,
    /// Fingerprint of the source data plus `k`, used in cache keys.
    pub key: Option<String>,
}

fn rescale_all(pca: &PcaModel, x: &SampleMatrix) -> SampleMatrix {
    let k = pca.n_components();
    let mut out = SampleMatrix::zeros(x.rows(), k);
    out.as_mut_slice()
        .par_chunks_mut(k)
        .enumerate()
        .for_each(|(i, row)| pca.project_rescale_into(x.row(i), row));
    out
}

pub fn encode_data(data: &PreparedData, k: usize, cache: Option<&FeatureCache>) -> Result<EncodedData> {
    let ds = &data.dataset;
    let key = cache.map(|_| content_key(&[data.fingerprint().as_bytes(), b"pca", &(k as u64).to_le_bytes()]));
    let cached = match (cache, &key) {
        (Some(c), Some(key)) => c.load_pca(key).filter(|m| m.n_components() == k && m.dim() == ds.train_x.cols()),
        _ => None,
    };
    let pca = match cached {
        Some(m) => {
            debug!("PCA cache hit");
            m
        }
        None => {
            info!("fitting PCA with {k} components on {} samples", ds.train_x.rows());
            let m = fit_pca(&ds.train_x, k)?;
            if let (Some(c), Some(key)) = (cache, &key) {
                c.store_pca(key, &m)?;
            }
            m
        }
    };
    Ok(EncodedData {
        train: rescale_all(&pca, &ds.train_x),
        test: rescale_all(&pca, &ds.test_x),
        train_y: ds.train_y.clone(),
        test_y: ds.test_y.clone(),
        pca,
        key,
    })
}

/// Probabilities of the final states for every row of rescaled components.
pub fn compute_features(map: &FeatureMap, rescaled: &SampleMatrix) -> Result<SampleMatrix> {
    let dim = map.n_features();
    let mut out = SampleMatrix::zeros(rescaled.rows(), dim);
    out.as_mut_slice()
        .par_chunks_mut(dim)
        .enumerate()
        .try_for_each(|(i, row)| map.map_rescaled_into(rescaled.row(i), row))?;
    Ok(out)
}

/// Train and test features for `spec`, from the cache when possible.
pub fn reservoir_features(
    encoded: &EncodedData,
    map: &FeatureMap,
    spec: &ReservoirSpec,
    cache: Option<&FeatureCache>,
) -> Result<(SampleMatrix, SampleMatrix)> {
    let n = spec.n_qubits();
    let key = |split: &str| {
        encoded
            .key
            .as_ref()
            .map(|k| content_key(&[k.as_bytes(), spec.describe().as_bytes(), split.as_bytes()]))
    };
    let mut splits = Vec::with_capacity(2);
    for (split, rescaled, labels) in [("train", &encoded.train, &encoded.train_y), ("test", &encoded.test, &encoded.test_y)] {
        let key = key(split);
        let hit = match (cache, &key) {
            (Some(c), Some(k)) => c
                .load_features(k)
                .filter(|s| s.n_qubits == n && s.labels == *labels && s.features.rows() == rescaled.rows()),
            _ => None,
        };
        let features = match hit {
            Some(set) => set.features,
            None => {
                let features = compute_features(map, rescaled)?;
                if let (Some(c), Some(k)) = (cache, &key) {
                    let set = FeatureSet { n_qubits: n, features, labels: labels.clone() };
                    c.store_features(k, &set)?;
                    set.features
                } else {
                    features
                }
            }
        };
        splits.push(features);
    }
    let test = splits.pop().expect("two splits");
    let train = splits.pop().expect("two splits");
    Ok((train, test))
}

/// Outcome of training (and optionally measuring) one reservoir configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PointOutcome {
    pub run: RunResult,
    pub entropy: Option<EntropyReport>,
    pub max_unitarity_defect: Option<f64>,
    pub wall_time_s: f64,
}

/// Module-1 entropy averaged over the test split (two-module layouts only).
pub fn test_set_entropy(encoded: &EncodedData, map: &FeatureMap, spec: &ReservoirSpec) -> Result<Option<EntropyReport>> {
    if spec.layout.n_modules() != 2 {
        return Ok(None);
    }
    let n_a = spec.layout.sizes()[0];
    let report = average_entropy_with(encoded.test.rows(), n_a, false, |i| {
        map.final_state_from_rescaled(encoded.test.row(i))
    })?;
    Ok(Some(report))
}

fn cue_defect(map: &FeatureMap, spec: &ReservoirSpec) -> Option<f64> {
    matches!(spec.kind, ReservoirKind::Cue { .. }).then(|| {
        map.reservoir()
            .module_unitaries()
            .iter()
            .map(|(_, u)| unitarity_defect(u.matrix()))
            .fold(0.0, f64::max)
    })
}

/// Standardises, trains and (optionally) measures `S̄` for one configuration.
pub fn evaluate_point(
    encoded: &EncodedData,
    spec: &ReservoirSpec,
    train_config: &TrainConfig,
    with_entropy: bool,
    cache: Option<&FeatureCache>,
) -> Result<PointOutcome> {
    let start = Instant::now();
    let map = FeatureMap::new(encoded.pca.clone(), spec)?;
    let (mut train_x, mut test_x) = reservoir_features(encoded, &map, spec, cache)?;
    let standardizer = Standardizer::fit(&train_x)?;
    standardizer.transform_in_place(&mut train_x)?;
    standardizer.transform_in_place(&mut test_x)?;
    let run = train(&train_x, &encoded.train_y, &test_x, &encoded.test_y, train_config)?;
    drop((train_x, test_x));
    let entropy = if with_entropy { test_set_entropy(encoded, &map, spec)? } else { None };
    let outcome = PointOutcome {
        max_unitarity_defect: cue_defect(&map, spec),
        run,
        entropy,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    info!(
        "{}: eta={:.4}{}",
        spec.describe(),
        outcome.run.eta,
        outcome.entropy.as_ref().map(|e| format!(" S={:.4}", e.mean_entropy)).unwrap_or_default()
    );
    Ok(outcome)
}

/// Rescaled PCA components fed straight to the classifier, bypassing the reservoir.
pub fn run_pca_baseline_on(data: &PreparedData, components: usize, train_config: &TrainConfig) -> Result<RunResult> {
    if components > data.dataset.train_x.cols() {
        return Err(HarnessError::Config(format!(
            "{components} components requested from {}-dimensional inputs",
            data.dataset.train_x.cols()
        )));
    }
    let encoded = encode_data(data, components, None)?;
    let standardizer = Standardizer::fit(&encoded.train)?;
    let train_x = standardizer.transform(&encoded.train)?;
    let test_x = standardizer.transform(&encoded.test)?;
    Ok(train(&train_x, &encoded.train_y, &test_x, &encoded.test_y, train_config)?)
}

/// Learning rate for the PCA-only baseline: the value used for a register fed the same number of components.
pub fn baseline_learning_rate(components: usize) -> f64 {
    TrainConfig::learning_rate_for_qubits(components.div_ceil(2))
}

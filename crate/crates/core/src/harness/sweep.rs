use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::cache::FeatureCache;
use super::config::{ExperimentConfig, ReservoirChoice};
use super::pipeline::{encode_data, evaluate_point, test_set_entropy, EncodedData, PointOutcome, PreparedData};
use super::{HarnessError, Result};
use crate::classifier::RunResult;
use crate::entanglement::EntropyReport;
use crate::preprocess::FeatureMap;
use crate::reservoir::{Connectivity, IntraCoupling, ReservoirKind, ReservoirSpec, SchemeFamily};
use crate::seed::derive_seed;

/// One reservoir configuration of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub connectivity: Connectivity,
    pub theta_j: Option<f64>,
    pub alpha: Option<f64>,
    pub range: Option<usize>,
    pub theta_c: f64,
    pub realization: usize,
}

/// Label of the η* group: family plus connection count.
pub fn group_key(c: &Connectivity) -> String {
    match c.family() {
        SchemeFamily::None => "none".into(),
        SchemeFamily::BoundaryCross => format!("bx({})", c.r_cross()),
        SchemeFamily::Arbitrary => format!("arb({},{})", c.r_cross(), c.n_arbitrary()),
        SchemeFamily::Parallel => format!("par({})", c.n_parallel()),
    }
}

/// Cartesian product of connectivity × couplings × θ_c × realizations.
pub fn enumerate_points(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let configs = cfg.scheme.configs(&cfg.layout)?;
    let couplings: Vec<(Option<f64>, Option<f64>, Option<usize>)> = match &cfg.reservoir {
        ReservoirChoice::Zz { theta_j, alpha, range } => {
            let full = cfg.layout.sizes().iter().max().copied().unwrap_or(1).saturating_sub(1);
            let ranges = range.clone().unwrap_or_else(|| vec![full]);
            let mut v = Vec::new();
            for &r in &ranges {
                for tj in theta_j.values() {
                    for a in alpha.values() {
                        v.push((Some(tj), Some(a), Some(r)));
                    }
                }
            }
            v
        }
        ReservoirChoice::Cue { .. } => vec![(None, None, None)],
    };
    let thetas = cfg.theta_c.values();
    let total = configs.len() * couplings.len() * thetas.len() * cfg.realizations;
    if total > cfg.max_points {
        return Err(HarnessError::Cap { points: total, cap: cfg.max_points });
    }
    let mut points = Vec::with_capacity(total);
    for c in &configs {
        for &(theta_j, alpha, range) in &couplings {
            for &theta_c in &thetas {
                for realization in 0..cfg.realizations {
                    points.push(SweepPoint { connectivity: c.clone(), theta_j, alpha, range, theta_c, realization });
                }
            }
        }
    }
    Ok(points)
}

pub fn build_spec(cfg: &ExperimentConfig, p: &SweepPoint) -> Result<ReservoirSpec> {
    let kind = match &cfg.reservoir {
        ReservoirChoice::Zz { .. } => ReservoirKind::Zz(IntraCoupling::new(
            p.theta_j.expect("zz point"),
            p.alpha.expect("zz point"),
            p.range.expect("zz point"),
        )?),
        ReservoirChoice::Cue { seed_base } => {
            let base = seed_base.unwrap_or(cfg.seed);
            ReservoirKind::Cue {
                seeds: (0..cfg.layout.n_modules())
                    .map(|m| derive_seed(base, "cue", &[p.realization as u64, m as u64]))
                    .collect(),
            }
        }
    };
    Ok(ReservoirSpec {
        layout: cfg.layout.clone(),
        kind,
        connectivity: p.connectivity.clone(),
        theta_c: p.theta_c,
        theta_g: cfg.theta_g,
    })
}

/// One line of a sweep result CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResultRow {
    pub config_descriptor: String,
    pub dataset: String,
    pub kind: String,
    pub layout: String,
    pub scheme: String,
    pub family: String,
    pub group: String,
    pub r_cross: usize,
    pub n_a: usize,
    pub n_l: usize,
    pub connected: bool,
    pub theta_j: Option<f64>,
    pub alpha: Option<f64>,
    pub range: Option<usize>,
    pub theta_c: f64,
    pub theta_g: f64,
    pub realization: usize,
    pub seed: u64,
    pub eta: f64,
    pub eta_star: bool,
    pub mean_entropy_bits: Option<f64>,
    pub std_entropy_bits: Option<f64>,
    pub max_unitarity_defect: Option<f64>,
    pub wall_time_s: f64,
}

fn point_seed(cfg: &ExperimentConfig, spec: &ReservoirSpec, p: &SweepPoint) -> u64 {
    derive_seed(cfg.seed, &spec.describe(), &[p.realization as u64])
}

fn make_row(cfg: &ExperimentConfig, spec: &ReservoirSpec, p: &SweepPoint, seed: u64, out: &PointOutcome) -> SweepResultRow {
    let c = &p.connectivity;
    SweepResultRow {
        config_descriptor: spec.describe(),
        dataset: cfg.dataset.to_string(),
        kind: match spec.kind {
            ReservoirKind::Zz(_) => "zz".into(),
            ReservoirKind::Cue { .. } => "cue".into(),
        },
        layout: cfg.layout.to_string(),
        scheme: c.to_string(),
        family: c.family().as_str().into(),
        group: group_key(c),
        r_cross: c.r_cross(),
        n_a: c.n_arbitrary(),
        n_l: c.n_parallel(),
        connected: c.is_connected(&cfg.layout),
        theta_j: p.theta_j,
        alpha: p.alpha,
        range: p.range,
        theta_c: p.theta_c,
        theta_g: cfg.theta_g,
        realization: p.realization,
        seed,
        eta: out.run.eta,
        eta_star: false,
        mean_entropy_bits: out.entropy.as_ref().map(|e| e.mean_entropy),
        std_entropy_bits: out.entropy.as_ref().map(|e| e.std_entropy),
        max_unitarity_defect: out.max_unitarity_defect,
        wall_time_s: out.wall_time_s,
    }
}

/// Marks, in every (family, connection count) group, the rows attaining the maximum η.
pub fn flag_eta_star(rows: &mut [SweepResultRow]) {
    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    for r in rows.iter() {
        let e = best.entry(r.group.clone()).or_insert(f64::NEG_INFINITY);
        *e = e.max(r.eta);
    }
    for r in rows.iter_mut() {
        r.eta_star = r.eta == best[&r.group];
    }
}

fn sort_rows(rows: &mut [SweepResultRow]) {
    rows.sort_by(|a, b| a.config_descriptor.cmp(&b.config_descriptor).then(a.realization.cmp(&b.realization)));
}

/// Runs every point of `cfg` on already-loaded data.
///
/// Points run in parallel on the current rayon pool; rows come back sorted
/// by descriptor with η* flags set, independent of completion order.
pub fn run_sweep_on(data: &PreparedData, cfg: &ExperimentConfig, cache: Option<&FeatureCache>) -> Result<Vec<SweepResultRow>> {
    cfg.validate()?;
    let points = enumerate_points(cfg)?;
    let encoded = encode_data(data, cfg.components(), cache)?;
    run_points(&encoded, cfg, &points, cache)
}

fn run_points(encoded: &EncodedData, cfg: &ExperimentConfig, points: &[SweepPoint], cache: Option<&FeatureCache>) -> Result<Vec<SweepResultRow>> {
    let mut rows: Vec<SweepResultRow> = points
        .par_iter()
        .map(|p| {
            let spec = build_spec(cfg, p)?;
            let seed = point_seed(cfg, &spec, p);
            let out = evaluate_point(encoded, &spec, &cfg.train_config(seed), cfg.entropy, cache)?;
            Ok(make_row(cfg, &spec, p, seed, &out))
        })
        .collect::<Result<_>>()?;
    sort_rows(&mut rows);
    flag_eta_star(&mut rows);
    Ok(rows)
}

/// Full outcome of a single configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleOutcome {
    pub spec: ReservoirSpec,
    pub row: SweepResultRow,
    pub run: RunResult,
    pub entropy: Option<EntropyReport>,
}

/// Runs a configuration that names exactly one point.
pub fn run_single_on(data: &PreparedData, cfg: &ExperimentConfig, cache: Option<&FeatureCache>) -> Result<SingleOutcome> {
    cfg.validate()?;
    let points = enumerate_points(cfg)?;
    let [p] = points.as_slice() else {
        return Err(HarnessError::Config(format!("run expects one configuration, got {}; use sweep", points.len())));
    };
    let encoded = encode_data(data, cfg.components(), cache)?;
    let spec = build_spec(cfg, p)?;
    let seed = point_seed(cfg, &spec, p);
    let out = evaluate_point(&encoded, &spec, &cfg.train_config(seed), cfg.entropy, cache)?;
    let mut row = make_row(cfg, &spec, p, seed, &out);
    row.eta_star = true;
    Ok(SingleOutcome { spec, row, run: out.run, entropy: out.entropy })
}

/// Ensemble statistics per `(n_ℓ, θ_c)` over CUE realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub n_l: usize,
    pub theta_c: f64,
    pub realizations: usize,
    pub mean_eta: f64,
    pub std_eta: f64,
    pub mean_entropy_bits: Option<f64>,
    pub std_entropy_bits: Option<f64>,
    pub max_unitarity_defect: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt())
}

pub fn summarize_ensemble(rows: &[SweepResultRow]) -> Vec<EnsembleRow> {
    let mut groups: BTreeMap<(usize, u64), Vec<&SweepResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.n_l, r.theta_c.to_bits())).or_default().push(r);
    }
    let mut out: Vec<EnsembleRow> = groups
        .into_values()
        .map(|g| {
            let etas: Vec<f64> = g.iter().map(|r| r.eta).collect();
            let ents: Option<Vec<f64>> = g.iter().map(|r| r.mean_entropy_bits).collect();
            let (mean_eta, std_eta) = mean_std(&etas);
            let ent = ents.map(|e| mean_std(&e));
            EnsembleRow {
                n_l: g[0].n_l,
                theta_c: g[0].theta_c,
                realizations: g.len(),
                mean_eta,
                std_eta,
                mean_entropy_bits: ent.map(|e| e.0),
                std_entropy_bits: ent.map(|e| e.1),
                max_unitarity_defect: g.iter().filter_map(|r| r.max_unitarity_defect).fold(0.0, f64::max),
            }
        })
        .collect();
    out.sort_by(|a, b| a.n_l.cmp(&b.n_l).then(a.theta_c.total_cmp(&b.theta_c)));
    out
}

/// CUE ensemble: per-realization rows and their `(n_ℓ, θ_c)` summary.
pub fn run_cue_ensemble_on(
    data: &PreparedData,
    cfg: &ExperimentConfig,
    cache: Option<&FeatureCache>,
) -> Result<(Vec<SweepResultRow>, Vec<EnsembleRow>)> {
    if !matches!(cfg.reservoir, ReservoirChoice::Cue { .. }) {
        return Err(HarnessError::Config("CUE ensembles need a cue reservoir".into()));
    }
    let rows = run_sweep_on(data, cfg, cache)?;
    let summary = summarize_ensemble(&rows);
    Ok((rows, summary))
}

/// Entropy sweep output; the descriptor omits `θ_c`, which has its own column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub config_descriptor: String,
    pub theta_c: f64,
    pub mean_entropy_bits: f64,
    pub std_entropy_bits: f64,
    pub n_test: usize,
}

fn strip_theta_c(descriptor: &str) -> String {
    descriptor.split(';').filter(|s| !s.starts_with("theta_c=")).collect::<Vec<_>>().join(";")
}

/// Test-set `S̄` for every point, without training.
pub fn run_entropy_sweep_on(data: &PreparedData, cfg: &ExperimentConfig, cache: Option<&FeatureCache>) -> Result<Vec<EntropyRow>> {
    cfg.validate()?;
    if cfg.layout.n_modules() != 2 {
        return Err(HarnessError::Config(format!("entropy is reported for two-module layouts only, got {}", cfg.layout)));
    }
    let points = enumerate_points(cfg)?;
    let encoded = encode_data(data, cfg.components(), cache)?;
    let mut rows: Vec<EntropyRow> = points
        .par_iter()
        .map(|p| {
            let spec = build_spec(cfg, p)?;
            let map = FeatureMap::new(encoded.pca.clone(), &spec)?;
            let report = test_set_entropy(&encoded, &map, &spec)?.expect("two modules");
            Ok(EntropyRow {
                config_descriptor: strip_theta_c(&spec.describe()),
                theta_c: p.theta_c,
                mean_entropy_bits: report.mean_entropy,
                std_entropy_bits: report.std_entropy,
                n_test: report.n_samples,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.config_descriptor.cmp(&b.config_descriptor).then(a.theta_c.total_cmp(&b.theta_c)));
    Ok(rows)
}

/// One enumerated configuration, for the `enumerate` listing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationRow {
    pub index: usize,
    pub scheme: String,
    pub family: String,
    pub group: String,
    pub r_cross: usize,
    pub n_a: usize,
    pub n_l: usize,
    pub n_edges: usize,
    pub connected: bool,
}

pub fn enumerate_configs(cfg: &ExperimentConfig) -> Result<Vec<EnumerationRow>> {
    cfg.scheme
        .configs(&cfg.layout)?
        .into_iter()
        .enumerate()
        .map(|(index, c)| {
            Ok(EnumerationRow {
                index,
                scheme: c.to_string(),
                family: c.family().as_str().into(),
                group: group_key(&c),
                r_cross: c.r_cross(),
                n_a: c.n_arbitrary(),
                n_l: c.n_parallel(),
                n_edges: c.edges(&cfg.layout, 0.0)?.len(),
                connected: c.is_connected(&cfg.layout),
            })
        })
        .collect()
}

use serde::{Deserialize, Deserializer, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::{HarnessError, Result};
use crate::classifier::TrainConfig;
use crate::datasets::DatasetName;
use crate::reservoir::{enumerate_arbitrary_configs, enumerate_parallel_configs, Connectivity, ModuleLayout};

/// Parses a real number, accepting multiples of `pi` (`pi/4`, `2pi`, `0.5*pi`).
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase().replace(' ', "").replace('π', "pi");
    let bad = || HarnessError::Argument(format!("cannot parse '{s}' as a number"));
    if let Some(pos) = t.find("pi") {
        let (coef, rest) = (&t[..pos], &t[pos + 2..]);
        let coef = match coef.trim_end_matches('*') {
            "" => 1.0,
            "-" => -1.0,
            c => c.parse::<f64>().map_err(|_| bad())?,
        };
        let div = match rest {
            "" => 1.0,
            r => r.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
        };
        Ok(coef * PI / div)
    } else {
        t.parse().map_err(|_| bad())
    }
}

/// A scalar, an explicit list, or `points` evenly spaced values over `[start, stop]`.
///
/// Config files may also give the command-line text form, e.g. `"0:pi:32"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, try_from = "GridRepr")]
pub enum Grid {
    Value(f64),
    List(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        #[serde(default = "default_grid_points")]
        points: usize,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GridRepr {
    Value(f64),
    List(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        #[serde(default = "default_grid_points")]
        points: usize,
    },
    Text(String),
}

impl TryFrom<GridRepr> for Grid {
    type Error = HarnessError;

    fn try_from(r: GridRepr) -> Result<Self> {
        Ok(match r {
            GridRepr::Value(v) => Grid::Value(v),
            GridRepr::List(v) => Grid::List(v),
            GridRepr::Range { start, stop, points } => Grid::Range { start, stop, points },
            GridRepr::Text(t) => t.parse()?,
        })
    }
}

/// Points per axis when a range omits its count.
pub const DEFAULT_GRID_POINTS: usize = 20;

/// Points used when `θ_c` is optimised over `[0, π]` without an explicit grid.
pub const THETA_C_SEARCH_POINTS: usize = 32;

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Value(v) => vec![*v],
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, points } => match points {
                0 => Vec::new(),
                1 => vec![*start],
                &p => (0..p).map(|i| start + (stop - start) * i as f64 / (p - 1) as f64).collect(),
            },
        }
    }

    pub fn single(&self) -> Option<f64> {
        match self.values().as_slice() {
            [v] => Some(*v),
            _ => None,
        }
    }

    /// 32 uniform points over `[0, π]`.
    pub fn theta_c_search() -> Self {
        Grid::Range { start: 0.0, stop: PI, points: THETA_C_SEARCH_POINTS }
    }
}

impl FromStr for Grid {
    type Err = HarnessError;

    /// `v`, `a,b,c` or `start:stop[:points]`; each number may use `pi`.
    fn from_str(s: &str) -> Result<Self> {
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let points = match parts.get(2) {
                Some(p) => p.trim().parse().map_err(|_| HarnessError::Argument(format!("bad point count in '{s}'")))?,
                None => DEFAULT_GRID_POINTS,
            };
            if parts.len() > 3 {
                return Err(HarnessError::Argument(format!("bad grid '{s}'")));
            }
            Ok(Grid::Range { start: parse_angle(parts[0])?, stop: parse_angle(parts[1])?, points })
        } else if s.contains(',') {
            Ok(Grid::List(s.split(',').map(parse_angle).collect::<Result<_>>()?))
        } else {
            Ok(Grid::Value(parse_angle(s)?))
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<usize>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(usize),
        Many(Vec<usize>),
    }
    Ok(Option::<OneOrMany>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    }))
}

/// Per-module reservoir family and its parameters (grids allowed for sweeps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReservoirChoice {
    Zz {
        theta_j: Grid,
        alpha: Grid,
        /// Cutoff range `R`; omitted means every pair inside a module.
        #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
        range: Option<Vec<usize>>,
    },
    Cue {
        /// Base for per-realization module seeds; the experiment seed when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed_base: Option<u64>,
    },
}

impl Default for ReservoirChoice {
    fn default() -> Self {
        ReservoirChoice::Zz { theta_j: Grid::Value(2.0 * PI), alpha: Grid::Value(1.5), range: None }
    }
}

/// Which connectivity configurations an experiment visits.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeSelection {
    Fixed(Connectivity),
    /// Every parallel mask (`par:all`).
    AllParallel,
    /// The lowest-index `n_ℓ` parallel edges for each listed count (`par:first:0,1,2`).
    ParallelFirst(Vec<usize>),
    /// Every `(R×, n_a)` with `R× + n_a ≤ N` (`arb:upto:N`).
    ArbitraryUpTo(usize),
    /// `R× = 0..=N` (`bx:upto:N`).
    BoundaryUpTo(usize),
}

impl Default for SchemeSelection {
    fn default() -> Self {
        SchemeSelection::Fixed(Connectivity::None)
    }
}

impl fmt::Display for SchemeSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeSelection::Fixed(c) => write!(f, "{c}"),
            SchemeSelection::AllParallel => f.write_str("par:all"),
            SchemeSelection::ParallelFirst(counts) => {
                let c: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
                write!(f, "par:first:{}", c.join(","))
            }
            SchemeSelection::ArbitraryUpTo(n) => write!(f, "arb:upto:{n}"),
            SchemeSelection::BoundaryUpTo(n) => write!(f, "bx:upto:{n}"),
        }
    }
}

impl FromStr for SchemeSelection {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let count = |t: &str| {
            t.parse::<usize>().map_err(|_| HarnessError::Argument(format!("bad count in scheme '{s}'")))
        };
        if s == "par:all" {
            Ok(SchemeSelection::AllParallel)
        } else if let Some(rest) = s.strip_prefix("par:first:") {
            Ok(SchemeSelection::ParallelFirst(rest.split(',').map(count).collect::<Result<_>>()?))
        } else if let Some(rest) = s.strip_prefix("arb:upto:") {
            Ok(SchemeSelection::ArbitraryUpTo(count(rest)?))
        } else if let Some(rest) = s.strip_prefix("bx:upto:") {
            Ok(SchemeSelection::BoundaryUpTo(count(rest)?))
        } else {
            Ok(SchemeSelection::Fixed(s.parse().map_err(|e: crate::reservoir::ReservoirError| HarnessError::Argument(e.to_string()))?))
        }
    }
}

impl Serialize for SchemeSelection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SchemeSelection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl SchemeSelection {
    /// Expands the selection on `layout`, in enumeration order.
    pub fn configs(&self, layout: &ModuleLayout) -> Result<Vec<Connectivity>> {
        Ok(match self {
            SchemeSelection::Fixed(c) => vec![c.clone()],
            SchemeSelection::AllParallel => enumerate_parallel_configs(layout)?,
            SchemeSelection::ParallelFirst(counts) => {
                let n0 = match (layout.n_modules(), layout.uniform_size()) {
                    (2, Some(n0)) => n0,
                    _ => return Err(HarnessError::Config(format!("par:first needs two equal modules, layout is {layout}"))),
                };
                counts
                    .iter()
                    .map(|&k| {
                        if k > n0 {
                            return Err(HarnessError::Config(format!("n_l = {k} exceeds module size {n0}")));
                        }
                        Ok(Connectivity::Parallel(vec![(0..n0).map(|i| i < k).collect()]))
                    })
                    .collect::<Result<_>>()?
            }
            SchemeSelection::ArbitraryUpTo(n) => {
                let mut out = Vec::new();
                for r in 0..=*n {
                    for n_a in 0..=n - r {
                        out.extend(enumerate_arbitrary_configs(layout, r, n_a)?);
                    }
                }
                out
            }
            SchemeSelection::BoundaryUpTo(n) => (0..=*n).map(Connectivity::BoundaryCross).collect(),
        })
    }
}

/// Classifier settings; the learning rate follows the register size unless set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub runs: usize,
    pub smoothing_window: usize,
    pub adagrad_epsilon: f64,
    pub adagrad_init_accumulator: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            learning_rate: None,
            epochs: d.epochs,
            batch_size: d.batch_size,
            runs: d.runs,
            smoothing_window: d.smoothing_window,
            adagrad_epsilon: d.adagrad_epsilon,
            adagrad_init_accumulator: d.adagrad_init_accumulator,
        }
    }
}

impl TrainSettings {
    /// `default_lr` applies when no learning rate was configured.
    pub fn to_train_config(&self, default_lr: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate.unwrap_or(default_lr),
            epochs: self.epochs,
            batch_size: self.batch_size,
            runs: self.runs,
            smoothing_window: self.smoothing_window,
            seed,
            adagrad_epsilon: self.adagrad_epsilon,
            adagrad_init_accumulator: self.adagrad_init_accumulator,
            n_classes: crate::datasets::N_CLASSES,
        }
    }
}

/// Everything an experiment needs; JSON keys mirror the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetName,
    pub layout: ModuleLayout,
    pub reservoir: ReservoirChoice,
    pub scheme: SchemeSelection,
    pub theta_c: Grid,
    pub theta_g: f64,
    /// Must equal `2n` when given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pca_components: Option<usize>,
    pub train: TrainSettings,
    /// CUE draws per configuration.
    pub realizations: usize,
    /// Keep only the first `N` training samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_subset: Option<usize>,
    /// Keep only the first `N` test samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_subset: Option<usize>,
    /// Compute the test-set entropy `S̄` for two-module layouts.
    pub entropy: bool,
    pub output_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_stem: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    pub seed: u64,
    /// Refuse sweeps with more points than this.
    pub max_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetName::Mnist,
            layout: ModuleLayout::new(vec![5, 5]).expect("valid layout"),
            reservoir: ReservoirChoice::default(),
            scheme: SchemeSelection::default(),
            theta_c: Grid::Value(PI / 4.0),
            theta_g: PI / 8.0,
            pca_components: None,
            train: TrainSettings::default(),
            realizations: 1,
            train_subset: None,
            test_subset: None,
            entropy: true,
            output_dir: PathBuf::from("results"),
            output_stem: None,
            jobs: None,
            seed: 0,
            max_points: 4096,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn n_qubits(&self) -> usize {
        self.layout.total_qubits()
    }

    pub fn components(&self) -> usize {
        self.pca_components.unwrap_or(2 * self.n_qubits())
    }

    /// 0.05 up to 10 qubits and 0.002 above, unless overridden.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        self.train.to_train_config(TrainConfig::learning_rate_for_qubits(self.n_qubits()), seed)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let n = self.n_qubits();
        if self.components() != 2 * n {
            return bad(format!("pca_components = {} but a {n}-qubit register needs {}", self.components(), 2 * n));
        }
        if !(self.theta_g.is_finite()) {
            return bad("theta_g must be finite".into());
        }
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if matches!(self.reservoir, ReservoirChoice::Zz { .. }) && self.realizations != 1 {
            return bad("realizations only apply to CUE reservoirs".into());
        }
        if self.train_subset.is_some_and(|n| n < 2) || self.test_subset == Some(0) {
            return bad("subsets must keep at least two training and one test sample".into());
        }
        if let ReservoirChoice::Zz { theta_j, alpha, range } = &self.reservoir {
            if theta_j.values().is_empty() || alpha.values().is_empty() || range.as_ref().is_some_and(Vec::is_empty) {
                return bad("empty coupling grid".into());
            }
        }
        if self.theta_c.values().is_empty() {
            return bad("empty theta_c grid".into());
        }
        self.train.to_train_config(0.05, 0).validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.scheme.configs(&self.layout)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_and_grids() {
        assert_eq!(parse_angle("pi/4").unwrap(), PI / 4.0);
        assert_eq!(parse_angle("2pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_angle("0.5*pi").unwrap(), 0.5 * PI);
        assert_eq!(parse_angle("1.5").unwrap(), 1.5);
        assert!(parse_angle("pie").is_err());
        assert_eq!("0:1:5".parse::<Grid>().unwrap().values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!("0.1,pi".parse::<Grid>().unwrap().values(), vec![0.1, PI]);
        let search = Grid::theta_c_search().values();
        assert_eq!((search.len(), search[0], search[31]), (32, 0.0, PI));
        assert_eq!("0:2".parse::<Grid>().unwrap().values().len(), 20);
    }

    #[test]
    fn scheme_selections_expand() {
        let l = ModuleLayout::new(vec![5, 5]).unwrap();
        let sel = |s: &str| s.parse::<SchemeSelection>().unwrap().configs(&l).unwrap();
        assert_eq!(sel("par:all").len(), 32);
        assert_eq!(sel("par:first:0,1,5").iter().map(|c| c.n_parallel()).collect::<Vec<_>>(), vec![0, 1, 5]);
        assert_eq!(sel("par:first:1")[0].to_string(), "par:10000");
        // (0,0) (0,1) (0,2) (1,0) (1,1) (2,0): 1 + 25 + 300 + 1 + 24 + 1
        assert_eq!(sel("arb:upto:2").len(), 352);
        assert_eq!(sel("bx:upto:3").len(), 4);
        assert_eq!(sel("par:01000").len(), 1);
        for s in ["par:all", "par:first:0,2", "arb:upto:2", "bx:upto:1", "none"] {
            assert_eq!(s.parse::<SchemeSelection>().unwrap().to_string(), s);
        }
        assert!("par:first:6".parse::<SchemeSelection>().unwrap().configs(&l).is_err());
    }

    #[test]
    fn config_json_round_trip_and_validation() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);

        let cfg = ExperimentConfig::from_json(
            r#"{"layout": [10], "reservoir": {"type": "zz", "theta_j": 6.283185307179586, "alpha": {"start": 0.1, "stop": 2.0}, "range": 9},
                "theta_c": [0.0, 0.5], "train": {"epochs": 5, "smoothing_window": 2}}"#,
        )
        .unwrap();
        assert_eq!(cfg.components(), 20);
        assert_eq!(cfg.train_config(1).learning_rate, 0.05);
        let ReservoirChoice::Zz { alpha, range, .. } = &cfg.reservoir else { panic!() };
        assert_eq!((alpha.values().len(), range.clone()), (20, Some(vec![9])));

        let fifteen = ExperimentConfig { layout: ModuleLayout::new(vec![5, 5, 5]).unwrap(), ..ExperimentConfig::default() };
        assert_eq!(fifteen.train_config(0).learning_rate, 0.002);
        assert!(ExperimentConfig { pca_components: Some(18), ..ExperimentConfig::default() }.validate().is_err());
        assert!(ExperimentConfig { realizations: 3, ..ExperimentConfig::default() }.validate().is_err());
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());

        let cfg = ExperimentConfig::from_json(r#"{"theta_c": "0:pi:32"}"#).unwrap();
        assert_eq!(cfg.theta_c, "0:pi:32".parse().unwrap());
        assert!(ExperimentConfig::from_json(r#"{"theta_c": "0:pi:x"}"#).is_err());
    }
}

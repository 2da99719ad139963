use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use std::path::{Path, PathBuf};

use mqerc::datasets::{fetch_with, DatasetName, FetchOptions, Manifest};
use mqerc::harness::{
    plot_data_file, ExperimentConfig, FeatureCache, Grid, Harness, PlotKind, ReservoirChoice, SchemeSelection,
};
use mqerc::reservoir::ModuleLayout;

#[derive(Parser, Debug)]
#[command(name = "mqerc", version = mqerc::harness::version(), about = "Modular quantum extreme reservoir experiments")]
struct Cli {
    /// Root holding one directory per dataset.
    #[arg(long, global = true, default_value = "data")]
    data_dir: PathBuf,
    /// Cache PCA models and reservoir features here.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON experiment config; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Download, verify and unpack datasets.
    Fetch {
        /// mnist, fashion_mnist, cifar10 or all.
        #[arg(default_value = "all")]
        dataset: String,
        #[arg(long)]
        mirror: Option<String>,
        /// Manifest replacing the built-in one.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        attempts: usize,
    },
    /// Classifier on rescaled PCA components, no reservoir.
    BaselinePca {
        #[arg(long, default_value_t = 20)]
        components: usize,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Train and evaluate a single configuration.
    Run(ExperimentArgs),
    /// Evaluate every point of a connectivity/coupling grid.
    Sweep(ExperimentArgs),
    /// CUE reservoirs over several realizations, with ensemble statistics.
    Cue(ExperimentArgs),
    /// Test-set entanglement entropy without training.
    Entropy(ExperimentArgs),
    /// List the configurations a scheme selection expands to.
    Enumerate(ExperimentArgs),
    /// Turn a result CSV into plot-ready series.
    PlotData {
        #[arg(long)]
        input: PathBuf,
        /// acc_vs_alpha, acc_vs_thetaj, acc_vs_thetac, acc_vs_nl, entropy_vs_thetac or acc_vs_entropy.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Overrides for [`ExperimentConfig`] fields.
#[derive(Args, Debug, Default)]
struct ExperimentArgs {
    #[arg(long)]
    dataset: Option<String>,
    /// Module sizes, e.g. `5,5`.
    #[arg(long)]
    layout: Option<String>,
    /// `zz` or `cue`.
    #[arg(long)]
    reservoir: Option<String>,
    /// `none`, `bx:R`, `arb:R+k-l,...`, `par:MASK`, `par:all`, `par:first:N`, `arb:upto:N`, `bx:upto:N`.
    #[arg(long)]
    scheme: Option<String>,
    /// Grid syntax: `v`, `a,b,c` or `start:stop[:points]`; `pi` allowed.
    #[arg(long)]
    theta_c: Option<String>,
    #[arg(long)]
    theta_g: Option<String>,
    #[arg(long)]
    theta_j: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Interaction range(s), e.g. `4` or `1,2,4`.
    #[arg(long)]
    range: Option<String>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    train_subset: Option<usize>,
    #[arg(long)]
    test_subset: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Skip the test-set entropy.
    #[arg(long)]
    no_entropy: bool,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Base name of the output files.
    #[arg(long)]
    stem: Option<String>,
    #[arg(long)]
    max_points: Option<usize>,
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(|p| p.trim().parse::<usize>().with_context(|| format!("'{p}' in '{s}'"))).collect()
}

impl ExperimentArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(d) = &self.dataset {
            cfg.dataset = d.parse()?;
        }
        if let Some(l) = &self.layout {
            cfg.layout = ModuleLayout::new(parse_list(l)?)?;
        }
        match self.reservoir.as_deref() {
            None => {}
            Some("zz") if matches!(cfg.reservoir, ReservoirChoice::Zz { .. }) => {}
            Some("zz") => cfg.reservoir = ReservoirChoice::default(),
            Some("cue") if matches!(cfg.reservoir, ReservoirChoice::Cue { .. }) => {}
            Some("cue") => cfg.reservoir = ReservoirChoice::Cue { seed_base: None },
            Some(other) => bail!("unknown reservoir '{other}', expected zz or cue"),
        }
        if self.theta_j.is_some() || self.alpha.is_some() || self.range.is_some() {
            let ReservoirChoice::Zz { theta_j, alpha, range } = &mut cfg.reservoir else {
                bail!("--theta-j, --alpha and --range apply to zz reservoirs");
            };
            if let Some(v) = &self.theta_j {
                *theta_j = v.parse()?;
            }
            if let Some(v) = &self.alpha {
                *alpha = v.parse()?;
            }
            if let Some(v) = &self.range {
                *range = Some(parse_list(v)?);
            }
        }
        if let Some(s) = &self.scheme {
            cfg.scheme = s.parse::<SchemeSelection>()?;
        }
        if let Some(t) = &self.theta_c {
            cfg.theta_c = t.parse::<Grid>()?;
        }
        if let Some(t) = &self.theta_g {
            cfg.theta_g = mqerc::harness::parse_angle(t)?;
        }
        if let Some(r) = self.realizations {
            cfg.realizations = r;
        }
        cfg.train_subset = self.train_subset.or(cfg.train_subset);
        cfg.test_subset = self.test_subset.or(cfg.test_subset);
        let t = &mut cfg.train;
        t.epochs = self.epochs.unwrap_or(t.epochs);
        t.runs = self.runs.unwrap_or(t.runs);
        t.smoothing_window = self.window.unwrap_or(t.smoothing_window);
        t.batch_size = self.batch_size.unwrap_or(t.batch_size);
        t.learning_rate = self.learning_rate.or(t.learning_rate);
        if self.no_entropy {
            cfg.entropy = false;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        cfg.output_stem = self.stem.clone().or(cfg.output_stem.take());
        cfg.max_points = self.max_points.unwrap_or(cfg.max_points);
        Ok(())
    }
}

fn load_config(cli: &Cli, exp: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    exp.apply(&mut cfg)?;
    cfg.seed = cli.seed.unwrap_or(cfg.seed);
    cfg.jobs = cli.jobs.or(cfg.jobs);
    Ok(cfg)
}

fn report(outputs: &[PathBuf]) {
    for p in outputs {
        println!("wrote {}", p.display());
    }
}

fn fetch(data_dir: &Path, dataset: &str, mirror: Option<String>, manifest: Option<&Path>, attempts: usize) -> Result<()> {
    let manifest = match manifest {
        Some(p) => Manifest::from_path(p)?,
        None => Manifest::default(),
    };
    let names: Vec<DatasetName> = if dataset == "all" { DatasetName::ALL.to_vec() } else { vec![dataset.parse()?] };
    let opts = FetchOptions { mirror, attempts, ..FetchOptions::default() };
    for name in names {
        info!("fetching {name}");
        for p in fetch_with(name, data_dir, &manifest, &opts)? {
            println!("{name}: {}", p.display());
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let default_args = ExperimentArgs::default();
    let exp = match &cli.command {
        Command::Run(a) | Command::Sweep(a) | Command::Cue(a) | Command::Entropy(a) | Command::Enumerate(a) => a,
        Command::BaselinePca { exp, .. } => exp,
        _ => &default_args,
    };
    let cfg = load_config(&cli, exp)?;
    let harness = Harness {
        data_dir: cli.data_dir.clone(),
        cache: cli.cache_dir.clone().map(FeatureCache::new),
        jobs: cfg.jobs,
    };
    match &cli.command {
        Command::Fetch { dataset, mirror, manifest, attempts } => {
            fetch(&cli.data_dir, dataset, mirror.clone(), manifest.as_deref(), *attempts)?
        }
        Command::BaselinePca { components, .. } => {
            let (run, out) = harness.baseline_pca(&cfg, *components)?;
            println!("{} PCA-{components}: eta = {:.4}", cfg.dataset, run.eta);
            report(&out);
        }
        Command::Run(_) => {
            let (o, out) = harness.run(&cfg)?;
            let s = o.entropy.map(|e| format!(", S = {:.4} bits", e.mean_entropy)).unwrap_or_default();
            println!("{}: eta = {:.4}{s}", o.row.config_descriptor, o.run.eta);
            report(&out);
        }
        Command::Sweep(_) => {
            let (rows, out) = harness.sweep(&cfg)?;
            for r in rows.iter().filter(|r| r.eta_star) {
                println!("eta* {} = {:.4} ({})", r.group, r.eta, r.scheme);
            }
            report(&out);
        }
        Command::Cue(_) => {
            let (rows, out) = harness.cue(&cfg)?;
            for r in &rows {
                println!("n_l = {} theta_c = {:.4}: eta = {:.4} ± {:.4} over {}", r.n_l, r.theta_c, r.mean_eta, r.std_eta, r.realizations);
            }
            report(&out);
        }
        Command::Entropy(_) => {
            let (rows, out) = harness.entropy(&cfg)?;
            for r in &rows {
                println!("{} theta_c = {:.4}: S = {:.4} ± {:.4}", r.config_descriptor, r.theta_c, r.mean_entropy_bits, r.std_entropy_bits);
            }
            report(&out);
        }
        Command::Enumerate(_) => {
            let (rows, out) = harness.enumerate(&cfg)?;
            let connected = rows.iter().filter(|r| r.connected).count();
            println!("{} configurations, {connected} connected", rows.len());
            report(&out);
        }
        Command::PlotData { input, kind, output } => {
            let rows = plot_data_file(input, kind.parse::<PlotKind>()?, output)?;
            println!("{} points", rows.len());
            report(std::slice::from_ref(output));
        }
    }
    Ok(())
}

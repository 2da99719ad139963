use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use super::{loss_and_gradient, Adagrad, ClassifierError, Result, SoftmaxModel};
use crate::matrix::SampleMatrix;
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub runs: usize,
    pub smoothing_window: usize,
    pub seed: u64,
    pub adagrad_epsilon: f64,
    pub adagrad_init_accumulator: f64,
    pub n_classes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 100,
            batch_size: 100,
            runs: 3,
            smoothing_window: 20,
            seed: 0,
            adagrad_epsilon: 1e-7,
            adagrad_init_accumulator: 0.1,
            n_classes: 10,
        }
    }
}

impl TrainConfig {
    /// Learning rate used for an `n`-qubit register: 0.05 up to 10 qubits, 0.002 above.
    pub fn learning_rate_for_qubits(n: usize) -> f64 {
        if n <= 10 {
            0.05
        } else {
            0.002
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(ClassifierError::Config(msg.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.epochs == 0 || self.runs == 0 {
            return bad("epochs and runs must be at least 1");
        }
        if self.smoothing_window == 0 || self.smoothing_window > self.epochs {
            return bad("smoothing_window must lie in 1..=epochs");
        }
        if self.n_classes == 0 {
            return bad("n_classes must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.adagrad_epsilon >= 0.0 && self.adagrad_init_accumulator >= 0.0) {
            return bad("adagrad parameters must be non-negative");
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!(
            "lr={};epochs={};batch={};runs={};window={};seed={};eps={};acc0={};classes={}",
            self.learning_rate,
            self.epochs,
            self.batch_size,
            self.runs,
            self.smoothing_window,
            self.seed,
            self.adagrad_epsilon,
            self.adagrad_init_accumulator,
            self.n_classes
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// `a[u][e]`: test accuracy of run `u` after epoch `e`.
    pub per_run_epoch_accuracies: Vec<Vec<f64>>,
    /// Mean training loss over the minibatches of each epoch.
    pub per_run_epoch_losses: Vec<Vec<f64>>,
    pub eta: f64,
    pub final_losses: Vec<f64>,
    pub config_descriptor: String,
}

impl RunResult {
    /// Columns `run,epoch,test_accuracy,train_loss`; runs and epochs are 1-based.
    pub fn write_epoch_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["run", "epoch", "test_accuracy", "train_loss"])?;
        for (u, (acc, loss)) in self
            .per_run_epoch_accuracies
            .iter()
            .zip(&self.per_run_epoch_losses)
            .enumerate()
        {
            for (e, (a, l)) in acc.iter().zip(loss).enumerate() {
                w.write_record(&[(u + 1).to_string(), (e + 1).to_string(), a.to_string(), l.to_string()])?;
            }
        }
        w.flush()
    }
}

/// `η = (1/N_run) Σ_u (1/W) Σ_{last W epochs} a[u][e]`.
pub fn smoothed_accuracy(per_run_epoch_accuracies: &[Vec<f64>], window: usize) -> f64 {
    let runs = per_run_epoch_accuracies.len();
    let total: f64 = per_run_epoch_accuracies
        .iter()
        .map(|acc| acc[acc.len() - window..].iter().sum::<f64>() / window as f64)
        .sum();
    total / runs as f64
}

fn check_labels(labels: &[u8], n_classes: usize) -> Result<()> {
    match labels.iter().position(|&y| y as usize >= n_classes) {
        Some(row) => Err(ClassifierError::Label { row, label: labels[row] as usize, n_classes }),
        None => Ok(()),
    }
}

/// Trains `config.runs` independent models on standardized features.
///
/// Run `u` draws its weight initialisation and its per-epoch shuffles from a
/// stream seeded by `(config.seed, u)`, so results are reproducible and do not
/// depend on how runs are scheduled across threads.
pub fn train(
    train_features: &SampleMatrix,
    train_labels: &[u8],
    test_features: &SampleMatrix,
    test_labels: &[u8],
    config: &TrainConfig,
) -> Result<RunResult> {
    config.validate()?;
    if train_features.rows() == 0 || test_features.rows() == 0 {
        return Err(ClassifierError::SampleCount { needed: 1, got: 0 });
    }
    if train_features.rows() != train_labels.len()
        || test_features.rows() != test_labels.len()
        || train_features.cols() != test_features.cols()
    {
        return Err(ClassifierError::Shape("features and labels disagree".into()));
    }
    check_labels(train_labels, config.n_classes)?;
    check_labels(test_labels, config.n_classes)?;

    let runs: Vec<(Vec<f64>, Vec<f64>)> = (0..config.runs)
        .into_par_iter()
        .map(|u| single_run(u, train_features, train_labels, test_features, test_labels, config))
        .collect::<Result<_>>()?;
    let (accuracies, losses): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let final_losses = losses.iter().map(|l| *l.last().unwrap()).collect();
    Ok(RunResult {
        eta: smoothed_accuracy(&accuracies, config.smoothing_window),
        per_run_epoch_accuracies: accuracies,
        per_run_epoch_losses: losses,
        final_losses,
        config_descriptor: config.describe(),
    })
}

fn single_run(
    u: usize,
    train_features: &SampleMatrix,
    train_labels: &[u8],
    test_features: &SampleMatrix,
    test_labels: &[u8],
    config: &TrainConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = rng_from_seed(derive_seed(config.seed, "train-run", &[u as u64]));
    let f = train_features.cols();
    let mut model = SoftmaxModel::glorot_uniform(f, config.n_classes, &mut rng);
    let mut opt = Adagrad::new(
        &model,
        config.learning_rate,
        config.adagrad_epsilon,
        config.adagrad_init_accumulator,
    );
    let n = train_features.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch = SampleMatrix::zeros(config.batch_size.min(n), f);
    let mut batch_labels = Vec::with_capacity(config.batch_size);
    let mut accuracies = Vec::with_capacity(config.epochs);
    let mut losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            if batch.rows() != chunk.len() {
                batch = SampleMatrix::zeros(chunk.len(), f);
            }
            batch_labels.clear();
            for (slot, &i) in chunk.iter().enumerate() {
                batch.row_mut(slot).copy_from_slice(train_features.row(i));
                batch_labels.push(train_labels[i]);
            }
            let (loss, grads) = loss_and_gradient(&model, &batch, &batch_labels)?;
            opt.step(&mut model, &grads);
            epoch_loss += loss * chunk.len() as f64;
        }
        if model.weights.iter().chain(model.bias.iter()).any(|w| !w.is_finite()) {
            return Err(ClassifierError::Numeric("model parameters"));
        }
        losses.push(epoch_loss / n as f64);
        accuracies.push(model.accuracy(test_features, test_labels));
    }
    Ok((accuracies, losses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> TrainConfig {
        TrainConfig { epochs: 30, smoothing_window: 5, batch_size: 16, runs: 2, n_classes: 3, seed: 7, ..TrainConfig::default() }
    }

    fn blobs(seed: u64, n: usize) -> (SampleMatrix, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = [[-2.0, 0.0], [2.0, 0.0], [0.0, 2.5]];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 3;
            rows.push(vec![
                centers[c][0] + rng.random_range(-1.0..1.0),
                centers[c][1] + rng.random_range(-1.0..1.0),
            ]);
            labels.push(c as u8);
        }
        (SampleMatrix::from_rows(&rows), labels)
    }

    #[test]
    fn smoothing_identity() {
        let acc = vec![vec![0.9; 100]; 3];
        assert_eq!(smoothed_accuracy(&acc, 20), 0.9);
        let acc = vec![vec![0.0, 0.0, 1.0, 0.5], vec![1.0, 1.0, 0.0, 0.5]];
        assert_eq!(smoothed_accuracy(&acc, 2), 0.5);
    }

    #[test]
    fn eta_is_the_smoothing_formula_bitwise() {
        let (x, y) = blobs(1, 90);
        let (tx, ty) = blobs(2, 30);
        let cfg = small_config();
        let r = train(&x, &y, &tx, &ty, &cfg).unwrap();
        assert_eq!(r.per_run_epoch_accuracies.len(), 2);
        assert_eq!(r.per_run_epoch_accuracies[0].len(), 30);
        assert_eq!(r.eta.to_bits(), smoothed_accuracy(&r.per_run_epoch_accuracies, 5).to_bits());
        assert_ne!(r.per_run_epoch_losses[0], r.per_run_epoch_losses[1]);
        assert!(r.eta > 0.9, "{:?}", r.per_run_epoch_accuracies);
    }

    #[test]
    fn deterministic_across_calls_and_pool_sizes() {
        let (x, y) = blobs(3, 60);
        let (tx, ty) = blobs(4, 30);
        let cfg = small_config();
        let a = train(&x, &y, &tx, &ty, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| train(&x, &y, &tx, &ty, &cfg)).unwrap();
        assert_eq!(a, b);
        let c = train(&x, &y, &tx, &ty, &TrainConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.per_run_epoch_losses, c.per_run_epoch_losses);
    }

    #[test]
    fn constant_labels_learned_quickly() {
        let (x, _) = blobs(5, 1000);
        let y = vec![2u8; 1000];
        let (tx, _) = blobs(6, 200);
        let ty = vec![2u8; 200];
        let st = crate::classifier::fit_standardizer(&x).unwrap();
        let (x, tx) = (st.transform(&x).unwrap(), st.transform(&tx).unwrap());
        let cfg = TrainConfig { epochs: 5, smoothing_window: 1, batch_size: 100, ..small_config() };
        let r = train(&x, &y, &tx, &ty, &cfg).unwrap();
        for run in &r.per_run_epoch_accuracies {
            assert_eq!(*run.last().unwrap(), 1.0, "{run:?}");
        }
    }

    #[test]
    fn separable_two_class_set_is_solved() {
        // Points on either side of the line x0 + x1 = 0 with margin 1.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut sample = |n: usize| {
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            while rows.len() < n {
                let p = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
                let d = (p[0] + p[1]) / std::f64::consts::SQRT_2;
                if d.abs() >= 0.5 {
                    labels.push((d > 0.0) as u8);
                    rows.push(p);
                }
            }
            (SampleMatrix::from_rows(&rows), labels)
        };
        let (x, y) = sample(200);
        let (tx, ty) = sample(200);
        let cfg = TrainConfig { n_classes: 2, runs: 1, ..TrainConfig::default() };
        let r = train(&x, &y, &tx, &ty, &cfg).unwrap();
        assert_eq!(*r.per_run_epoch_accuracies[0].last().unwrap(), 1.0);
    }

    #[test]
    fn full_batch_loss_is_monotone_at_small_rate() {
        let (x, y) = blobs(10, 60);
        let cfg = TrainConfig {
            learning_rate: 0.001,
            batch_size: 60,
            runs: 1,
            epochs: 200,
            smoothing_window: 1,
            ..small_config()
        };
        let r = train(&x, &y, &x, &y, &cfg).unwrap();
        for w in r.per_run_epoch_losses[0].windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let (x, mut y) = blobs(11, 12);
        y[4] = 3;
        assert!(matches!(
            train(&x, &y, &x, &y, &small_config()),
            Err(ClassifierError::Label { row: 4, label: 3, n_classes: 3 })
        ));
        let y = vec![0u8; 12];
        let cfg = TrainConfig { smoothing_window: 31, ..small_config() };
        assert!(matches!(train(&x, &y, &x, &y, &cfg), Err(ClassifierError::Config(_))));
        let cfg = TrainConfig { batch_size: 0, ..small_config() };
        assert!(matches!(train(&x, &y, &x, &y, &cfg), Err(ClassifierError::Config(_))));
    }

    #[test]
    fn epoch_csv_layout() {
        let r = RunResult {
            per_run_epoch_accuracies: vec![vec![0.5, 0.75]],
            per_run_epoch_losses: vec![vec![1.0, 0.5]],
            eta: 0.75,
            final_losses: vec![0.5],
            config_descriptor: String::new(),
        };
        let mut buf = Vec::new();
        r.write_epoch_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "run,epoch,test_accuracy,train_loss\n1,1,0.5,1\n1,2,0.75,0.5\n"
        );
    }
}

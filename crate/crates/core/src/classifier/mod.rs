//! Linear softmax readout trained with minibatch Adagrad.
//!
//! Features are z-scored with training statistics ([`Standardizer`]), fed to a
//! single dense layer with softmax output ([`SoftmaxModel`]) and optimised on
//! the mean cross-entropy. Test accuracy is recorded after every epoch and
//! summarised as the smoothed accuracy `η`: the mean over the last `W` epochs,
//! averaged over `N_run` independent training runs ([`smoothed_accuracy`]).

mod standardize;
mod train;

pub use standardize::{fit_standardizer, Standardizer};
pub use train::{smoothed_accuracy, train, RunResult, TrainConfig};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::matrix::SampleMatrix;

/// Floor applied to predicted probabilities before taking the log.
pub const PROB_FLOOR: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("need at least {needed} samples, got {got}")]
    SampleCount { needed: usize, got: usize },
    #[error("label {label} at row {row} is outside 0..{n_classes}")]
    Label { row: usize, label: usize, n_classes: usize },
    #[error("non-finite value in {0}")]
    Numeric(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, ClassifierError>;

/// Logits `u = Wᵀ φ + b`, probabilities `softmax(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    /// `F × C`
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// Gradients of the batch-mean loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl SoftmaxModel {
    pub fn zeros(n_features: usize, n_classes: usize) -> Self {
        Self {
            weights: DMatrix::zeros(n_features, n_classes),
            bias: DVector::zeros(n_classes),
        }
    }

    /// Weights uniform in `±√(6 / (F + C))`, bias zero.
    pub fn glorot_uniform(n_features: usize, n_classes: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (n_features + n_classes) as f64).sqrt();
        // Drawn row-major (feature by feature) to keep the stream order explicit.
        let mut draws = Vec::with_capacity(n_features * n_classes);
        for _ in 0..n_features * n_classes {
            draws.push(rng.random_range(-limit..limit));
        }
        Self {
            weights: DMatrix::from_row_slice(n_features, n_classes, &draws),
            bias: DVector::zeros(n_classes),
        }
    }

    pub fn n_features(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.weights.ncols()
    }

    /// Class probabilities for one feature vector.
    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.n_features() {
            return Err(ClassifierError::Shape(format!(
                "{} features for a model expecting {}",
                features.len(),
                self.n_features()
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(ClassifierError::Numeric("features"));
        }
        let x = DVector::from_column_slice(features);
        let mut logits = self.weights.tr_mul(&x) + &self.bias;
        softmax_in_place(logits.as_mut_slice());
        Ok(logits.as_slice().to_vec())
    }

    /// Logits for a batch given column-major `F × B` features; returns `C × B`.
    fn logits(&self, batch: nalgebra::DMatrixView<'_, f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_classes(), batch.ncols());
        out.gemm_tr(1.0, &self.weights, &batch, 0.0);
        for mut col in out.column_iter_mut() {
            col += &self.bias;
        }
        out
    }

    /// Index of the largest logit per row; ties go to the lowest class index.
    pub fn predict(&self, features: &SampleMatrix) -> Vec<usize> {
        const CHUNK: usize = 1024;
        let mut out = Vec::with_capacity(features.rows());
        let mut start = 0;
        while start < features.rows() {
            let rows = CHUNK.min(features.rows() - start);
            let slice = &features.as_slice()[start * features.cols()..(start + rows) * features.cols()];
            let view = nalgebra::DMatrixView::from_slice(slice, features.cols(), rows);
            let logits = self.logits(view);
            out.extend(logits.column_iter().map(|col| argmax(col.as_slice())));
            start += rows;
        }
        out
    }

    /// Fraction of rows whose predicted class equals the label.
    pub fn accuracy(&self, features: &SampleMatrix, labels: &[u8]) -> f64 {
        let correct = self
            .predict(features)
            .iter()
            .zip(labels)
            .filter(|(p, &y)| **p == y as usize)
            .count();
        correct as f64 / labels.len().max(1) as f64
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax (max subtraction).
pub fn softmax_in_place(u: &mut [f64]) {
    let max = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in u.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in u.iter_mut() {
        *x /= total;
    }
}

/// Batch-mean cross-entropy and its gradients.
///
/// `batch_features` holds one sample per row; labels are class indices, which
/// is equivalent to one-hot targets.
pub fn loss_and_gradient(
    model: &SoftmaxModel,
    batch_features: &SampleMatrix,
    labels: &[u8],
) -> Result<(f64, Gradients)> {
    let b = batch_features.rows();
    if b == 0 {
        return Err(ClassifierError::SampleCount { needed: 1, got: 0 });
    }
    if labels.len() != b || batch_features.cols() != model.n_features() {
        return Err(ClassifierError::Shape(format!(
            "batch {}×{} with {} labels for a model with {} features",
            b,
            batch_features.cols(),
            labels.len(),
            model.n_features()
        )));
    }
    let n_classes = model.n_classes();
    let x = batch_features.as_columns();
    let mut delta = model.logits(x);
    let mut loss = 0.0;
    for (row, (mut col, &y)) in delta.column_iter_mut().zip(labels).enumerate() {
        let y = y as usize;
        if y >= n_classes {
            return Err(ClassifierError::Label { row, label: y, n_classes });
        }
        softmax_in_place(col.as_mut_slice());
        loss -= col[y].max(PROB_FLOOR).ln();
        col[y] -= 1.0;
    }
    let scale = 1.0 / b as f64;
    let mut grad_w = DMatrix::zeros(model.n_features(), n_classes);
    grad_w.gemm(scale, &x, &delta.transpose(), 0.0);
    let grad_b = delta.column_sum() * scale;
    if !loss.is_finite() {
        return Err(ClassifierError::Numeric("loss"));
    }
    Ok((loss * scale, Gradients { weights: grad_w, bias: grad_b }))
}

/// Adagrad: `G += g²`, `θ -= lr · g / (√G + ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Adagrad {
    pub learning_rate: f64,
    pub epsilon: f64,
    acc_weights: DMatrix<f64>,
    acc_bias: DVector<f64>,
}

impl Adagrad {
    pub fn new(model: &SoftmaxModel, learning_rate: f64, epsilon: f64, initial_accumulator: f64) -> Self {
        Self {
            learning_rate,
            epsilon,
            acc_weights: DMatrix::from_element(model.n_features(), model.n_classes(), initial_accumulator),
            acc_bias: DVector::from_element(model.n_classes(), initial_accumulator),
        }
    }

    pub fn step(&mut self, model: &mut SoftmaxModel, grads: &Gradients) {
        let (lr, eps) = (self.learning_rate, self.epsilon);
        let update = |param: &mut f64, acc: &mut f64, g: f64| {
            *acc += g * g;
            *param -= lr * g / (acc.sqrt() + eps);
        };
        for ((w, a), &g) in model
            .weights
            .iter_mut()
            .zip(self.acc_weights.iter_mut())
            .zip(grads.weights.iter())
        {
            update(w, a, g);
        }
        for ((w, a), &g) in model.bias.iter_mut().zip(self.acc_bias.iter_mut()).zip(grads.bias.iter()) {
            update(w, a, g);
        }
    }
}

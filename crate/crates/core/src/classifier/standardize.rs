use serde::{Deserialize, Serialize};

use super::{ClassifierError, Result};
use crate::matrix::SampleMatrix;

/// Column-wise z-scoring with statistics fitted on the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mu: Vec<f64>,
    /// Population standard deviations; zero spread is stored as 1.
    pub sigma: Vec<f64>,
    /// Columns whose spread was zero.
    pub degenerate: Vec<usize>,
}

impl Standardizer {
    pub fn fit(train: &SampleMatrix) -> Result<Self> {
        let n = train.rows();
        if n < 2 {
            return Err(ClassifierError::SampleCount { needed: 2, got: n });
        }
        let f = train.cols();
        let mut mu = vec![0.0; f];
        for row in train.iter_rows() {
            for (m, x) in mu.iter_mut().zip(row) {
                *m += x;
            }
        }
        mu.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; f];
        for row in train.iter_rows() {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mu) {
                *v += (x - m) * (x - m);
            }
        }
        if mu.iter().chain(&var).any(|x| !x.is_finite()) {
            return Err(ClassifierError::Numeric("training features"));
        }
        let mut degenerate = Vec::new();
        let sigma = var
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let s = (v / n as f64).sqrt();
                if s > 0.0 {
                    s
                } else {
                    degenerate.push(j);
                    1.0
                }
            })
            .collect();
        Ok(Self { mu, sigma, degenerate })
    }

    pub fn n_features(&self) -> usize {
        self.mu.len()
    }

    pub fn transform_in_place(&self, features: &mut SampleMatrix) -> Result<()> {
        if features.cols() != self.n_features() {
            return Err(ClassifierError::Shape(format!(
                "{} columns for a standardizer fitted on {}",
                features.cols(),
                self.n_features()
            )));
        }
        let f = self.n_features().max(1);
        for row in features.as_mut_slice().chunks_exact_mut(f) {
            for ((x, m), s) in row.iter_mut().zip(&self.mu).zip(&self.sigma) {
                *x = (*x - m) / s;
            }
        }
        Ok(())
    }

    pub fn transform(&self, features: &SampleMatrix) -> Result<SampleMatrix> {
        let mut out = features.clone();
        self.transform_in_place(&mut out)?;
        Ok(out)
    }
}

/// Shorthand for [`Standardizer::fit`].
pub fn fit_standardizer(train: &SampleMatrix) -> Result<Standardizer> {
    Standardizer::fit(train)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_statistics() {
        let s = fit_standardizer(&SampleMatrix::from_rows(&[[0.0, 2.0], [2.0, 2.0]])).unwrap();
        assert_eq!(s.mu, vec![1.0, 2.0]);
        assert_eq!(s.sigma, vec![1.0, 1.0]);
        assert_eq!(s.degenerate, vec![1]);
        assert!(matches!(
            fit_standardizer(&SampleMatrix::from_rows(&[[1.0]])),
            Err(ClassifierError::SampleCount { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn test_rows_use_training_statistics() {
        let s = fit_standardizer(&SampleMatrix::from_rows(&[[0.0], [4.0]])).unwrap();
        let t = s.transform(&SampleMatrix::from_rows(&[[10.0], [10.0]])).unwrap();
        assert_eq!(t.as_slice(), &[4.0, 4.0]);
    }

    proptest! {
        #[test]
        fn transformed_training_columns_are_standard(
            rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 3..40)
        ) {
            let m = SampleMatrix::from_rows(&rows);
            let s = fit_standardizer(&m).unwrap();
            let t = s.transform(&m).unwrap();
            let n = t.rows() as f64;
            for j in 0..3 {
                if s.degenerate.contains(&j) {
                    continue;
                }
                let mean = t.iter_rows().map(|r| r[j]).sum::<f64>() / n;
                let var = t.iter_rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
                // Near-constant columns lose relative precision; skip them.
                prop_assume!(s.sigma[j] > 1e-6);
                prop_assert!(mean.abs() < 1e-10);
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-10);
            }
        }
    }
}

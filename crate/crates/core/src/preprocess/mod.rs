//! Classical front end: PCA on the training set, min-max rescaling with
//! clipping, and angle encoding of `2n` components into `n` qubits.

mod pca;

pub use pca::{fit_pca, PcaModel, PCA_FORMAT_VERSION, PCA_MAGIC};

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::reservoir::{Reservoir, ReservoirError, ReservoirSpec};
use crate::statevector::{StateError, StateVector};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("cannot keep {k} components from {samples} samples of dimension {dim}")]
    Rank { k: usize, samples: usize, dim: usize },
    #[error("principal component {component} has zero spread on the training set")]
    Degenerate { component: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("malformed PCA cache: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Reservoir(#[from] ReservoirError),
}

pub type Result<T> = std::result::Result<T, PreprocessError>;

/// Per-qubit rotation angles: `θ_q = π I_q` and `φ_q = π I_{n+q}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingAngles {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl EncodingAngles {
    /// Splits `2n` rescaled components into `n` polar and `n` azimuthal angles.
    pub fn from_rescaled(components: &[f64]) -> Result<Self> {
        if components.len() % 2 != 0 || components.is_empty() {
            return Err(PreprocessError::Dimension {
                expected: components.len() + components.len() % 2,
                got: components.len(),
            });
        }
        let n = components.len() / 2;
        Ok(Self {
            theta: components[..n].iter().map(|i| PI * i).collect(),
            phi: components[n..].iter().map(|i| PI * i).collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.theta.len()
    }
}

/// `⊗_q Rz(φ_q) Ry(θ_q) |0⟩`, keeping the `e^{∓iφ/2}` phases of `Rz`.
pub fn encode(angles: &EncodingAngles) -> Result<StateVector> {
    if angles.theta.len() != angles.phi.len() {
        return Err(PreprocessError::Dimension {
            expected: angles.theta.len(),
            got: angles.phi.len(),
        });
    }
    let factors: Vec<[Complex64; 2]> = angles
        .theta
        .iter()
        .zip(&angles.phi)
        .map(|(&theta, &phi)| {
            let (s, c) = (theta / 2.0).sin_cos();
            [
                Complex64::from_polar(c, -phi / 2.0),
                Complex64::from_polar(s, phi / 2.0),
            ]
        })
        .collect();
    Ok(StateVector::product_state(&factors)?)
}

/// Sample → probability vector, with the reservoir gates built once.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    pca: PcaModel,
    reservoir: Reservoir,
}

impl FeatureMap {
    pub fn new(pca: PcaModel, spec: &ReservoirSpec) -> Result<Self> {
        let n = spec.n_qubits();
        if pca.n_components() != 2 * n {
            return Err(PreprocessError::Dimension {
                expected: 2 * n,
                got: pca.n_components(),
            });
        }
        Ok(Self {
            pca,
            reservoir: spec.build()?,
        })
    }

    pub fn n_features(&self) -> usize {
        1 << self.reservoir.n_qubits()
    }

    pub fn pca(&self) -> &PcaModel {
        &self.pca
    }

    pub fn reservoir(&self) -> &Reservoir {
        &self.reservoir
    }

    /// Final state `ψ_f` for an input sample.
    pub fn final_state(&self, x: &[f64]) -> Result<StateVector> {
        let rescaled = self.pca.project_rescale(x)?;
        self.final_state_from_rescaled(&rescaled)
    }

    /// Final state from already-rescaled PCA components.
    pub fn final_state_from_rescaled(&self, rescaled: &[f64]) -> Result<StateVector> {
        let mut state = encode(&EncodingAngles::from_rescaled(rescaled)?)?;
        self.reservoir.apply(&mut state)?;
        Ok(state)
    }

    pub fn map(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.final_state(x)?.probabilities())
    }

    pub fn map_rescaled_into(&self, rescaled: &[f64], out: &mut [f64]) -> Result<()> {
        self.final_state_from_rescaled(rescaled)?.probabilities_into(out);
        Ok(())
    }
}

/// `probabilities(apply_reservoir(encode(project_rescale(x)), spec))`.
pub fn feature_map(model: &PcaModel, spec: &ReservoirSpec, x: &[f64]) -> Result<Vec<f64>> {
    FeatureMap::new(model.clone(), spec)?.map(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SampleMatrix;
    use crate::reservoir::{IntraCoupling, ModuleLayout, ReservoirKind};
    use crate::statevector::tests::max_diff;
    use crate::statevector::SingleQubitGate;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn gate(g: SingleQubitGate) -> DMatrix<Complex64> {
        DMatrix::from_fn(2, 2, |i, j| g.matrix()[i][j])
    }

    #[test]
    fn encode_examples() {
        let s = encode(&EncodingAngles { theta: vec![0.0; 3], phi: vec![0.7, 1.1, 2.9] }).unwrap();
        assert!((s.probabilities()[0] - 1.0).abs() < 1e-15);

        let s = encode(&EncodingAngles { theta: vec![PI, 0.0, 0.0], phi: vec![0.0; 3] }).unwrap();
        assert!((s.probabilities()[0b100] - 1.0).abs() < 1e-15);

        let s = encode(&EncodingAngles { theta: vec![PI / 2.0], phi: vec![PI / 2.0] }).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expect = [Complex64::from_polar(r, -PI / 4.0), Complex64::from_polar(r, PI / 4.0)];
        assert!(max_diff(s.amplitudes(), &expect) < 1e-14);
        let oracle = gate(SingleQubitGate::rz(PI / 2.0)) * gate(SingleQubitGate::ry(PI / 2.0))
            * DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(max_diff(s.amplitudes(), oracle.as_slice()) < 1e-14);
    }

    #[test]
    fn angles_from_rescaled_components() {
        let a = EncodingAngles::from_rescaled(&[0.0, 0.5, 1.0, 0.25]).unwrap();
        assert_eq!(a.theta, vec![0.0, PI / 2.0]);
        assert_eq!(a.phi, vec![PI, PI / 4.0]);
        assert!(EncodingAngles::from_rescaled(&[0.1, 0.2, 0.3]).is_err());
    }

    fn hand_model_spec(theta_g: f64) -> (PcaModel, ReservoirSpec) {
        // Four anisotropic features, fitted to four components for a 2-qubit register.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..4).map(|j| rng.random::<f64>() * (j + 1) as f64).collect())
            .collect();
        let model = fit_pca(&SampleMatrix::from_rows(&rows), 4).unwrap();
        let spec = ReservoirSpec {
            layout: ModuleLayout::new(vec![1, 1]).unwrap(),
            kind: ReservoirKind::Zz(IntraCoupling::new(2.0, 1.0, 1).unwrap()),
            connectivity: "bx:1".parse().unwrap(),
            theta_c: PI / 4.0,
            theta_g,
        };
        (model, spec)
    }

    #[test]
    fn feature_map_matches_dense_pipeline() {
        let (model, spec) = hand_model_spec(PI / 8.0);
        let x = [0.3, 1.2, 0.4, 2.5];
        let features = feature_map(&model, &spec, &x).unwrap();

        let i = model.project_rescale(&x).unwrap();
        let single = |q: usize| {
            gate(SingleQubitGate::rz(PI * i[2 + q])) * gate(SingleQubitGate::ry(PI * i[q]))
        };
        let enc = single(0).kronecker(&single(1));
        let e = |s: f64| Complex64::from_polar(1.0, -s * PI / 4.0);
        let uc = DMatrix::from_diagonal(&DVector::from_vec(vec![e(1.0), e(-1.0), e(-1.0), e(1.0)]));
        let rx = gate(SingleQubitGate::rx(PI / 8.0));
        let psi = rx.kronecker(&rx) * uc * enc * DVector::from_vec(vec![c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        for (f, a) in features.iter().zip(psi.iter()) {
            assert!((f - a.norm_sqr()).abs() < 1e-13);
        }
        assert!((features.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_free_features_ignore_couplings() {
        let (model, spec) = hand_model_spec(0.0);
        let x = [0.9, 0.2, 2.4, 0.1];
        let base = feature_map(&model, &spec, &x).unwrap();
        let other = ReservoirSpec {
            kind: ReservoirKind::Zz(IntraCoupling::new(0.3, 2.0, 5).unwrap()),
            theta_c: 1.1,
            ..spec
        };
        for (a, b) in base.iter().zip(feature_map(&model, &other, &x).unwrap()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn component_count_must_match_register() {
        let (model, spec) = hand_model_spec(0.1);
        let three = ReservoirSpec {
            layout: ModuleLayout::new(vec![1, 2]).unwrap(),
            connectivity: "none".parse().unwrap(),
            ..spec
        };
        assert!(matches!(
            FeatureMap::new(model, &three),
            Err(PreprocessError::Dimension { expected: 6, got: 4 })
        ));
    }
}

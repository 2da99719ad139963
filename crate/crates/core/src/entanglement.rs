//! Von Neumann entropy (in bits) across the cut between the first `n_a`
//! qubits and the rest.
//!
//! [`schmidt_entropy`] is the production route (singular values of the
//! reshaped amplitudes). [`reduced_density_entropy`] builds `ρ_A` explicitly
//! and diagonalises it with an in-crate Jacobi solver, so the two routes share
//! no numerical code beyond the reshape convention.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::statevector::StateVector;

/// Eigenvalues (squared Schmidt coefficients) below this contribute nothing.
pub const EIGEN_FLOOR: f64 = 1e-15;

/// Largest subsystem handled by the density-matrix route.
pub const MAX_ORACLE_QUBITS: usize = 8;

#[derive(Debug, Error)]
pub enum EntanglementError {
    #[error("subsystem of {n_a} qubits is not a proper part of a {n_qubits}-qubit state")]
    Index { n_a: usize, n_qubits: usize },
    #[error("need at least one state")]
    Count,
    #[error("subsystem of {0} qubits is too large for the density-matrix route")]
    TooLarge(usize),
    #[error("failed to prepare state {index}: {message}")]
    Pipeline { index: usize, message: String },
}

pub type Result<T> = std::result::Result<T, EntanglementError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub mean_entropy: f64,
    /// Population standard deviation over samples.
    pub std_entropy: f64,
    pub per_sample: Option<Vec<f64>>,
    pub n_a_qubits: usize,
    pub n_samples: usize,
}

fn check_cut(state: &StateVector, n_a: usize) -> Result<()> {
    if n_a == 0 || n_a >= state.n_qubits() {
        return Err(EntanglementError::Index { n_a, n_qubits: state.n_qubits() });
    }
    Ok(())
}

/// `2^{n_a} × 2^{n-n_a}` matrix whose row index is the first `n_a` bits.
fn reshape(state: &StateVector, n_a: usize) -> DMatrix<Complex64> {
    let rows = 1 << n_a;
    let cols = state.dim() >> n_a;
    DMatrix::from_row_slice(rows, cols, state.amplitudes())
}

/// `-Σ p log₂ p` over the given probabilities, ignoring `p < EIGEN_FLOOR`.
pub fn shannon_bits(probabilities: impl IntoIterator<Item = f64>) -> f64 {
    probabilities
        .into_iter()
        .filter(|&p| p >= EIGEN_FLOOR)
        .map(|p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

pub fn schmidt_entropy(state: &StateVector, n_a: usize) -> Result<f64> {
    check_cut(state, n_a)?;
    let m = reshape(state, n_a);
    // The smaller side decides the rank; SVD of the wide orientation is cheaper.
    let sv = if m.nrows() <= m.ncols() {
        m.singular_values()
    } else {
        m.adjoint().singular_values()
    };
    Ok(shannon_bits(sv.iter().map(|s| s * s)))
}

/// Entropy from the explicit partial trace `ρ_A = M M†`.
pub fn reduced_density_entropy(state: &StateVector, n_a: usize) -> Result<f64> {
    check_cut(state, n_a)?;
    if n_a > MAX_ORACLE_QUBITS {
        return Err(EntanglementError::TooLarge(n_a));
    }
    let rho = partial_trace(state, n_a);
    Ok(shannon_bits(hermitian_eigenvalues(&rho)))
}

/// `ρ_A[i][j] = Σ_b ψ(i,b) ψ(j,b)*` by explicit summation.
pub fn partial_trace(state: &StateVector, n_a: usize) -> Vec<Vec<Complex64>> {
    let d_a = 1 << n_a;
    let d_b = state.dim() >> n_a;
    let amps = state.amplitudes();
    let mut rho = vec![vec![Complex64::new(0.0, 0.0); d_a]; d_a];
    for i in 0..d_a {
        for j in 0..d_a {
            let mut s = Complex64::new(0.0, 0.0);
            for b in 0..d_b {
                s += amps[i * d_b + b] * amps[j * d_b + b].conj();
            }
            rho[i][j] = s;
        }
    }
    rho
}

/// Eigenvalues of a Hermitian `H = A + iB` via the real symmetric embedding
/// `[[A, -B], [B, A]]`, whose spectrum is that of `H` with every value doubled.
fn hermitian_eigenvalues(h: &[Vec<Complex64>]) -> Vec<f64> {
    let d = h.len();
    let mut s = vec![vec![0.0; 2 * d]; 2 * d];
    for i in 0..d {
        for j in 0..d {
            let (a, b) = (h[i][j].re, h[i][j].im);
            s[i][j] = a;
            s[i + d][j + d] = a;
            s[i][j + d] = -b;
            s[i + d][j] = b;
        }
    }
    let mut eig = jacobi_eigenvalues(s);
    eig.sort_by(|a, b| a.total_cmp(b));
    eig.into_iter().step_by(2).collect()
}

/// Cyclic Jacobi rotations until the off-diagonal mass vanishes.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let tau = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Mean and spread of `S` over `n_samples` states produced by `prepare`.
///
/// States are prepared and measured in parallel; the reduction runs in index
/// order so the result does not depend on scheduling.
pub fn average_entropy_with<F, E>(
    n_samples: usize,
    n_a: usize,
    keep_per_sample: bool,
    prepare: F,
) -> Result<EntropyReport>
where
    F: Fn(usize) -> std::result::Result<StateVector, E> + Sync,
    E: std::fmt::Display,
{
    if n_samples == 0 {
        return Err(EntanglementError::Count);
    }
    let per_sample: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|index| {
            let state = prepare(index)
                .map_err(|e| EntanglementError::Pipeline { index, message: e.to_string() })?;
            schmidt_entropy(&state, n_a)
        })
        .collect::<Result<_>>()?;
    Ok(summarize(per_sample, n_a, keep_per_sample))
}

pub fn average_entropy(states: &[StateVector], n_a: usize) -> Result<EntropyReport> {
    average_entropy_with(states.len(), n_a, true, |i| {
        Ok::<_, std::convert::Infallible>(states[i].clone())
    })
}

fn summarize(per_sample: Vec<f64>, n_a: usize, keep: bool) -> EntropyReport {
    let n = per_sample.len() as f64;
    let mean = per_sample.iter().sum::<f64>() / n;
    let var = per_sample.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    EntropyReport {
        mean_entropy: mean,
        std_entropy: var.sqrt(),
        n_samples: per_sample.len(),
        per_sample: keep.then_some(per_sample),
        n_a_qubits: n_a,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{encode, EncodingAngles};
    use crate::reservoir::{IntraCoupling, ModuleLayout, ReservoirKind, ReservoirSpec};
    use crate::statevector::tests::{c, random_state, random_unitary};
    use crate::statevector::{BlockUnitary, DiagonalPhase, SingleQubitGate};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn both(state: &StateVector, n_a: usize) -> (f64, f64) {
        (schmidt_entropy(state, n_a).unwrap(), reduced_density_entropy(state, n_a).unwrap())
    }

    #[test]
    fn textbook_states() {
        let bell = StateVector::from_amplitudes(vec![
            c(FRAC_1_SQRT_2, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(FRAC_1_SQRT_2, 0.0),
        ])
        .unwrap();
        let (s, r) = both(&bell, 1);
        assert!((s - 1.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);

        let zero = StateVector::zero_state(4).unwrap();
        assert_eq!(both(&zero, 2), (0.0, 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let factors: Vec<[Complex64; 2]> = (0..5)
            .map(|_| {
                let t: f64 = rng.random_range(0.0..PI);
                [Complex64::from_polar((t / 2.0).cos(), rng.random()), Complex64::from_polar((t / 2.0).sin(), rng.random())]
            })
            .collect();
        let product = StateVector::product_state(&factors).unwrap();
        for n_a in 1..5 {
            let (s, r) = both(&product, n_a);
            assert!(s.abs() < 1e-10 && r.abs() < 1e-10);
        }
    }

    #[test]
    fn maximal_two_by_two_cut() {
        // Σ_a |a⟩|a⟩ / 2 over two-qubit labels a: four equal Schmidt terms.
        let mut amps = vec![c(0.0, 0.0); 16];
        for (a, b) in [(0usize, 0usize), (1, 1), (2, 2), (3, 3)] {
            amps[(a << 2) | b] = c(0.5, 0.0);
        }
        let s = StateVector::from_amplitudes(amps).unwrap();
        let (x, y) = both(&s, 2);
        assert!((x - 2.0).abs() < 1e-12 && (y - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_cuts() {
        let s = StateVector::zero_state(3).unwrap();
        assert!(matches!(schmidt_entropy(&s, 0), Err(EntanglementError::Index { .. })));
        assert!(matches!(reduced_density_entropy(&s, 3), Err(EntanglementError::Index { .. })));
        assert!(matches!(average_entropy(&[], 1), Err(EntanglementError::Count)));
        let big = StateVector::zero_state(10).unwrap();
        assert!(matches!(reduced_density_entropy(&big, 9), Err(EntanglementError::TooLarge(9))));
    }

    #[test]
    fn routes_agree_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for case in 0..200 {
            let n = rng.random_range(2..=6);
            let n_a = rng.random_range(1..n);
            let state = random_state(&mut rng, n);
            let (s, r) = both(&state, n_a);
            assert!((s - r).abs() < 1e-10, "case {case}: {s} vs {r}");
            assert!(s <= n_a.min(n - n_a) as f64 + 1e-9);
        }
    }

    fn two_qubit_spec(theta_c: f64, theta_g: f64) -> ReservoirSpec {
        ReservoirSpec {
            layout: ModuleLayout::new(vec![1, 1]).unwrap(),
            kind: ReservoirKind::Zz(IntraCoupling::new(2.0 * PI, 1.5, 1).unwrap()),
            connectivity: "bx:1".parse().unwrap(),
            theta_c,
            theta_g,
        }
    }

    fn reservoir_state(spec: &ReservoirSpec, angles: &EncodingAngles) -> StateVector {
        let mut s = encode(angles).unwrap();
        spec.build().unwrap().apply(&mut s).unwrap();
        s
    }

    #[test]
    fn quarter_turn_edge_maximally_entangles_equator_inputs() {
        let angles = EncodingAngles { theta: vec![PI / 2.0; 2], phi: vec![0.0; 2] };
        let s = reservoir_state(&two_qubit_spec(PI / 4.0, PI / 8.0), &angles);
        assert!((schmidt_entropy(&s, 1).unwrap() - 1.0).abs() < 1e-10);
    }

    fn ten_qubit_spec(conn: &str, theta_c: f64, kind: ReservoirKind) -> ReservoirSpec {
        ReservoirSpec {
            layout: ModuleLayout::new(vec![5, 5]).unwrap(),
            kind,
            connectivity: conn.parse().unwrap(),
            theta_c,
            theta_g: PI / 8.0,
        }
    }

    fn random_angles(rng: &mut impl Rng, n: usize) -> EncodingAngles {
        EncodingAngles {
            theta: (0..n).map(|_| rng.random_range(0.0..PI)).collect(),
            phi: (0..n).map(|_| rng.random_range(0.0..PI)).collect(),
        }
    }

    #[test]
    fn no_entanglement_at_zero_or_half_turn() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inputs: Vec<EncodingAngles> = (0..20).map(|_| random_angles(&mut rng, 10)).collect();
        let zz = ReservoirKind::Zz(IntraCoupling::new(2.0 * PI, 1.5, 4).unwrap());
        let cue = ReservoirKind::Cue { seeds: vec![11, 12] };
        for kind in [zz, cue] {
            for (conn, theta_c) in [("par:11111", 0.0), ("arb:2+1-7", 0.0), ("par:10100", PI / 2.0), ("bx:3", PI / 2.0)] {
                let spec = ten_qubit_spec(conn, theta_c, kind.clone());
                let states: Vec<StateVector> = inputs.iter().map(|a| reservoir_state(&spec, a)).collect();
                let report = average_entropy(&states, 5).unwrap();
                assert!(report.mean_entropy < 1e-9, "{conn} {theta_c}: {}", report.mean_entropy);
            }
        }
    }

    #[test]
    fn local_operations_leave_entropy_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let n = 6;
            let mut s = random_state(&mut rng, n);
            let before = schmidt_entropy(&s, 3).unwrap();
            s.apply_to_all(&SingleQubitGate::rx(rng.random_range(0.0..PI)));
            s.apply_block_unitary(1, &BlockUnitary::new(random_unitary(&mut rng, 8)).unwrap()).unwrap();
            s.apply_block_unitary(4, &BlockUnitary::new(random_unitary(&mut rng, 8)).unwrap()).unwrap();
            // Diagonal depending only on the first three qubits.
            let phases: Vec<Complex64> = {
                let block: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
                (0..64).map(|i| Complex64::from_polar(1.0, block[i >> 3])).collect()
            };
            s.apply_diagonal_phase(&DiagonalPhase::new(phases).unwrap()).unwrap();
            assert!((schmidt_entropy(&s, 3).unwrap() - before).abs() < 1e-10);
        }
    }

    #[test]
    fn single_edge_entropy_peaks_at_quarter_turn() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let zz = ReservoirKind::Zz(IntraCoupling::new(2.0 * PI, 1.5, 4).unwrap());
        let grid: Vec<f64> = (0..=16).map(|i| i as f64 * PI / 32.0).collect();
        for _ in 0..5 {
            let angles = random_angles(&mut rng, 10);
            let s_at = |t: f64| schmidt_entropy(&reservoir_state(&ten_qubit_spec("par:00100", t, zz.clone()), &angles), 5).unwrap();
            let values: Vec<f64> = grid.iter().map(|&t| s_at(t)).collect();
            for (i, &t) in grid.iter().enumerate() {
                assert!((values[i] - s_at(PI / 2.0 - t)).abs() < 1e-10);
                assert!(values[i] <= values[8] + 1e-12);
            }
        }
    }

    #[test]
    fn report_statistics() {
        let bell = StateVector::from_amplitudes(vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(FRAC_1_SQRT_2, 0.0)]).unwrap();
        let zero = StateVector::zero_state(2).unwrap();
        let r = average_entropy(&[bell, zero], 1).unwrap();
        assert!((r.mean_entropy - 0.5).abs() < 1e-12);
        assert!((r.std_entropy - 0.5).abs() < 1e-12);
        assert_eq!(r.n_samples, 2);
        assert_eq!(r.per_sample.as_ref().map(Vec::len), Some(2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn entropy_bounded_for_five_plus_five(seed in any::<u64>(), mask in 1u32..32, theta_c in 0.0f64..PI) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let conn = format!("par:{:05b}", mask);
            let kind = ReservoirKind::Zz(IntraCoupling::new(2.0 * PI, 1.5, 4).unwrap());
            let s = reservoir_state(&ten_qubit_spec(&conn, theta_c, kind), &random_angles(&mut rng, 10));
            let e = schmidt_entropy(&s, 5).unwrap();
            prop_assert!((0.0..=5.0 + 1e-9).contains(&e));
        }
    }
}

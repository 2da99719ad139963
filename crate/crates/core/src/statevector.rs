//! Exact pure-state simulation of a small qubit register.
//!
//! # Qubit convention
//!
//! Qubits are labelled `1..=n`. A computational basis string `z = (z_1, ..., z_n)`
//! lives at amplitude index `Σ_q z_q · 2^(n-q)`, so qubit 1 is the most
//! significant bit. The Pauli-Z eigenvalue of qubit `q` in basis state `z` is
//! `s_q = 1 - 2 z_q`. Every other module in this crate shares this convention;
//! in particular a block of consecutive qubits maps to a contiguous bit field of
//! the amplitude index, which keeps module bipartitions reshape-free.
//!
//! Gates are validated once, when they are constructed ([`SingleQubitGate`],
//! [`DiagonalPhase`], [`BlockUnitary`]), and can then be applied to any number
//! of states without rechecking.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Largest register this module will allocate.
pub const MAX_QUBITS: usize = 26;
/// Tolerance on `Σ|a|² = 1` for caller-supplied states and factors.
pub const NORM_TOL: f64 = 1e-12;
/// Tolerance on `max |U†U - I|` for caller-supplied gates.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance on `|phase| = 1` for diagonal entries.
pub const PHASE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("qubit count {0} outside 1..={MAX_QUBITS}")]
    Size(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("factor {index} has squared norm {norm_sq} (expected 1)")]
    NotNormalized { index: usize, norm_sq: f64 },
    #[error("matrix deviates from unitarity by {0:e}")]
    NotUnitary(f64),
    #[error("qubit {qubit} out of range 1..={n_qubits}")]
    Index { qubit: usize, n_qubits: usize },
    #[error("block of {width} qubits starting at qubit {first} does not fit in {n_qubits} qubits")]
    Block {
        first: usize,
        width: usize,
        n_qubits: usize,
    },
    #[error("phase entry {index} has modulus {modulus} (expected 1)")]
    NotUnimodular { index: usize, modulus: f64 },
}

pub type Result<T> = std::result::Result<T, StateError>;

fn check_qubit_count(n: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n) {
        Ok(())
    } else {
        Err(StateError::Size(n))
    }
}

/// `max_ij |(U†U - I)_ij|`.
pub fn unitarity_defect(u: &DMatrix<Complex64>) -> f64 {
    let gram = u.adjoint() * u;
    let mut worst = 0.0f64;
    for (idx, g) in gram.iter().enumerate() {
        let (i, j) = (idx % gram.nrows(), idx / gram.nrows());
        let target = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((g - Complex64::new(target, 0.0)).norm());
    }
    worst
}

/// A validated 2×2 unitary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleQubitGate([[Complex64; 2]; 2]);

impl SingleQubitGate {
    /// Wraps a row-major 2×2 matrix after checking unitarity.
    pub fn new(m: [[Complex64; 2]; 2]) -> Result<Self> {
        let defect = unitarity_defect(&DMatrix::from_fn(2, 2, |i, j| m[i][j]));
        if defect > UNITARY_TOL {
            return Err(StateError::NotUnitary(defect));
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        let (o, l) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
        Self([[l, o], [o, l]])
    }

    /// `exp(-i θ X / 2)`
    pub fn rx(theta: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        let d = Complex64::new(c, 0.0);
        let off = Complex64::new(0.0, -s);
        Self([[d, off], [off, d]])
    }

    /// `exp(-i θ Y / 2)`
    pub fn ry(theta: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Self([
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ])
    }

    /// `exp(-i φ Z / 2)`
    pub fn rz(phi: f64) -> Self {
        let o = Complex64::new(0.0, 0.0);
        Self([
            [Complex64::from_polar(1.0, -phi / 2.0), o],
            [o, Complex64::from_polar(1.0, phi / 2.0)],
        ])
    }

    pub fn matrix(&self) -> &[[Complex64; 2]; 2] {
        &self.0
    }

    /// Matrix product `self · rhs`.
    pub fn then_after(&self, rhs: &SingleQubitGate) -> SingleQubitGate {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        SingleQubitGate(out)
    }

    /// `self · v` for a single-qubit state vector.
    pub fn apply_to(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }
}

/// A validated diagonal unitary over the full register, indexed by basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPhase {
    n_qubits: usize,
    phases: Vec<Complex64>,
}

impl DiagonalPhase {
    pub fn new(phases: Vec<Complex64>) -> Result<Self> {
        let dim = phases.len();
        if !dim.is_power_of_two() {
            return Err(StateError::Dimension {
                expected: dim.next_power_of_two(),
                got: dim,
            });
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_qubit_count(n_qubits)?;
        for (index, p) in phases.iter().enumerate() {
            let modulus = p.norm();
            if !((modulus - 1.0).abs() <= PHASE_TOL) {
                return Err(StateError::NotUnimodular { index, modulus });
            }
        }
        Ok(Self { n_qubits, phases })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn phases(&self) -> &[Complex64] {
        &self.phases
    }
}

/// A validated dense unitary acting on `width` consecutive qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockUnitary {
    width: usize,
    matrix: DMatrix<Complex64>,
}

impl BlockUnitary {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = matrix.nrows();
        if matrix.ncols() != dim || !dim.is_power_of_two() || dim < 2 {
            return Err(StateError::Dimension {
                expected: dim.max(2).next_power_of_two(),
                got: matrix.ncols(),
            });
        }
        let width = dim.trailing_zeros() as usize;
        check_qubit_count(width)?;
        let defect = unitarity_defect(&matrix);
        if defect > UNITARY_TOL {
            return Err(StateError::NotUnitary(defect));
        }
        Ok(Self { width, matrix })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }
}

/// `2^n` complex amplitudes of an `n`-qubit pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩`
    pub fn zero_state(n: usize) -> Result<Self> {
        check_qubit_count(n)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits: n,
            amplitudes,
        })
    }

    /// Tensor product of single-qubit states, factor 0 being qubit 1.
    pub fn product_state(factors: &[[Complex64; 2]]) -> Result<Self> {
        let n = factors.len();
        check_qubit_count(n)?;
        for (index, f) in factors.iter().enumerate() {
            let norm_sq = f[0].norm_sqr() + f[1].norm_sqr();
            if !((norm_sq - 1.0).abs() <= NORM_TOL) {
                return Err(StateError::NotNormalized { index, norm_sq });
            }
        }
        let mut amplitudes = Vec::with_capacity(1 << n);
        amplitudes.push(Complex64::new(1.0, 0.0));
        // Appending each factor as the new least significant qubit.
        for f in factors {
            let prev = std::mem::take(&mut amplitudes);
            amplitudes.reserve(prev.len() * 2);
            for a in prev {
                amplitudes.push(a * f[0]);
                amplitudes.push(a * f[1]);
            }
        }
        Ok(Self {
            n_qubits: n,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes; the vector must have power-of-two length and unit norm.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if !dim.is_power_of_two() {
            return Err(StateError::Dimension {
                expected: dim.next_power_of_two(),
                got: dim,
            });
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_qubit_count(n_qubits)?;
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !((norm_sq - 1.0).abs() <= NORM_TOL) {
            return Err(StateError::NotNormalized { index: 0, norm_sq });
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit == 0 || qubit > self.n_qubits {
            Err(StateError::Index {
                qubit,
                n_qubits: self.n_qubits,
            })
        } else {
            Ok(())
        }
    }

    /// Applies `gate` to qubit `qubit` (1-based), identity elsewhere.
    pub fn apply_single_qubit(&mut self, qubit: usize, gate: &SingleQubitGate) -> Result<()> {
        self.check_qubit(qubit)?;
        let stride = 1usize << (self.n_qubits - qubit);
        let m = gate.matrix();
        for chunk in self.amplitudes.chunks_exact_mut(2 * stride) {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x0, x1) = (*a0, *a1);
                *a0 = m[0][0] * x0 + m[0][1] * x1;
                *a1 = m[1][0] * x0 + m[1][1] * x1;
            }
        }
        Ok(())
    }

    /// Applies the same gate to every qubit.
    pub fn apply_to_all(&mut self, gate: &SingleQubitGate) {
        for q in 1..=self.n_qubits {
            self.apply_single_qubit(q, gate)
                .expect("qubit index within register");
        }
    }

    /// `a_z ← phases[z] · a_z`.
    pub fn apply_diagonal_phase(&mut self, phases: &DiagonalPhase) -> Result<()> {
        if phases.phases.len() != self.amplitudes.len() {
            return Err(StateError::Dimension {
                expected: self.amplitudes.len(),
                got: phases.phases.len(),
            });
        }
        for (a, p) in self.amplitudes.iter_mut().zip(&phases.phases) {
            *a *= p;
        }
        Ok(())
    }

    /// Applies `u` to qubits `first ..= first + width - 1` (1-based).
    pub fn apply_block_unitary(&mut self, first: usize, u: &BlockUnitary) -> Result<()> {
        let width = u.width;
        if first == 0 || first + width - 1 > self.n_qubits {
            return Err(StateError::Block {
                first,
                width,
                n_qubits: self.n_qubits,
            });
        }
        // Block bits occupy [low, low + width) counted from the least significant bit.
        let low = self.n_qubits + 1 - first - width;
        let inner = 1usize << low;
        let block_dim = 1usize << width;
        let outer_step = inner * block_dim;
        let m = &u.matrix;
        let mut gathered = vec![Complex64::new(0.0, 0.0); block_dim];
        for outer in (0..self.amplitudes.len()).step_by(outer_step) {
            for offset in 0..inner {
                let base = outer + offset;
                for (b, g) in gathered.iter_mut().enumerate() {
                    *g = self.amplitudes[base + b * inner];
                }
                for r in 0..block_dim {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (c, g) in gathered.iter().enumerate() {
                        acc += m[(r, c)] * g;
                    }
                    self.amplitudes[base + r * inner] = acc;
                }
            }
        }
        Ok(())
    }

    /// Born-rule probabilities `p_z = |a_z|²`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Writes `|a_z|²` into `out`, which must have length `2^n`.
    pub fn probabilities_into(&self, out: &mut [f64]) {
        assert_eq!(out.len(), self.amplitudes.len());
        for (p, a) in out.iter_mut().zip(&self.amplitudes) {
            *p = a.norm_sqr();
        }
    }
}

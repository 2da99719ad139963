//! The fixed reservoir map `U = Rx(θ_g) · U_c · U_M` applied after encoding.
//!
//! `U_M` is a tensor product of per-module unitaries, either distance-decaying
//! ZZ evolutions ([`IntraCoupling`]) or Haar-random matrices ([`sample_cue`]).
//! `U_c` couples modules through uniform ZZ edges chosen by a
//! [`Connectivity`] scheme, and the final `Rx(θ_g)` layer on every qubit turns
//! the diagonal phases into measurable amplitude differences.

mod coupling;
mod cue;
mod scheme;

pub use coupling::{
    build_edge_phase, build_zz_phase, validate_edges, InterEdge, IntraCoupling, ModuleLayout,
};
pub use cue::{sample_cue, MAX_CUE_DIM};
pub use scheme::{
    boundary_cross_edges, enumerate_arbitrary_configs, enumerate_parallel_configs, Connectivity,
    SchemeFamily,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::statevector::{BlockUnitary, DiagonalPhase, SingleQubitGate, StateError, StateVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReservoirError {
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("coupling between qubit {0} and itself")]
    SameQubit(usize),
    #[error("invalid edge ({k}, {l}): {reason}")]
    Edge { k: usize, l: usize, reason: String },
    #[error("requested {requested} edges but only {available} are available")]
    Count { requested: usize, available: usize },
    #[error("invalid size: {0}")]
    Size(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("cannot parse connectivity: {0}")]
    Parse(String),
    #[error(transparent)]
    State(#[from] StateError),
}

pub type Result<T> = std::result::Result<T, ReservoirError>;

/// How the per-module unitaries `U⁽ᵘ⁾` are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReservoirKind {
    Zz(IntraCoupling),
    /// One seed per module; each module draws an independent CUE unitary.
    Cue { seeds: Vec<u64> },
}

/// Declarative description of a reservoir. Building it is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirSpec {
    pub layout: ModuleLayout,
    pub kind: ReservoirKind,
    pub connectivity: Connectivity,
    pub theta_c: f64,
    pub theta_g: f64,
}

impl ReservoirSpec {
    pub fn n_qubits(&self) -> usize {
        self.layout.total_qubits()
    }

    pub fn edges(&self) -> Result<Vec<InterEdge>> {
        self.connectivity.edges(&self.layout, self.theta_c)
    }

    /// Canonical one-line description; floats are printed in shortest round-trip form.
    pub fn describe(&self) -> String {
        let kind = match &self.kind {
            ReservoirKind::Zz(c) => {
                format!("zz(theta_j={},alpha={},range={})", c.theta_j, c.alpha, c.range)
            }
            ReservoirKind::Cue { seeds } => {
                let s: Vec<String> = seeds.iter().map(|x| x.to_string()).collect();
                format!("cue(seeds={})", s.join("/"))
            }
        };
        format!(
            "layout={};kind={kind};scheme={};theta_c={};theta_g={}",
            self.layout, self.connectivity, self.theta_c, self.theta_g
        )
    }

    /// Materialises the gates. CUE draws happen here.
    pub fn build(&self) -> Result<Reservoir> {
        let edges = self.edges()?;
        let (blocks, phase) = match &self.kind {
            ReservoirKind::Zz(coupling) => {
                (Vec::new(), Some(build_zz_phase(&self.layout, coupling, &edges)?))
            }
            ReservoirKind::Cue { seeds } => {
                if seeds.len() != self.layout.n_modules() {
                    return Err(ReservoirError::Parameter(format!(
                        "{} CUE seeds for {} modules",
                        seeds.len(),
                        self.layout.n_modules()
                    )));
                }
                let blocks = seeds
                    .iter()
                    .enumerate()
                    .map(|(m, &seed)| {
                        let u = sample_cue(1 << self.layout.sizes()[m], seed)?;
                        Ok((self.layout.offset(m) + 1, BlockUnitary::new(u)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let phase = if edges.iter().all(|e| e.theta_c == 0.0) {
                    None
                } else {
                    Some(build_edge_phase(&self.layout, &edges)?)
                };
                (blocks, phase)
            }
        };
        Ok(Reservoir {
            n_qubits: self.n_qubits(),
            blocks,
            phase,
            rx: SingleQubitGate::rx(self.theta_g),
            apply_rx: self.theta_g != 0.0,
        })
    }
}

/// Built gates of a [`ReservoirSpec`], shareable read-only across threads.
#[derive(Debug, Clone)]
pub struct Reservoir {
    n_qubits: usize,
    blocks: Vec<(usize, BlockUnitary)>,
    phase: Option<DiagonalPhase>,
    rx: SingleQubitGate,
    apply_rx: bool,
}

impl Reservoir {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Dense module unitaries with their first qubit (CUE reservoirs only).
    pub fn module_unitaries(&self) -> &[(usize, BlockUnitary)] {
        &self.blocks
    }

    /// Applies `U_M`, then `U_c`, then `Rx(θ_g)` on every qubit.
    ///
    /// For ZZ reservoirs `U_M` and `U_c` are one fused diagonal.
    pub fn apply(&self, state: &mut StateVector) -> Result<()> {
        self.apply_entangling(state)?;
        if self.apply_rx {
            state.apply_to_all(&self.rx);
        }
        Ok(())
    }

    /// `U_c · U_M` without the final rotation layer.
    pub fn apply_entangling(&self, state: &mut StateVector) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(ReservoirError::Size(format!(
                "state has {} qubits, reservoir expects {}",
                state.n_qubits(),
                self.n_qubits
            )));
        }
        for (first, u) in &self.blocks {
            state.apply_block_unitary(*first, u)?;
        }
        if let Some(phase) = &self.phase {
            state.apply_diagonal_phase(phase)?;
        }
        Ok(())
    }
}

/// Builds `spec` and applies it to `state` in place.
pub fn apply_reservoir(state: &mut StateVector, spec: &ReservoirSpec) -> Result<()> {
    spec.build()?.apply(state)
}

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::RangeInclusive;

use super::{ReservoirError, Result};
use crate::statevector::{DiagonalPhase, MAX_QUBITS};

/// Qubit counts per module, `[n⁽¹⁾, …, n⁽ᵐ⁾]`. Module μ owns a contiguous run of
/// global qubit labels starting right after module μ-1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ModuleLayout {
    sizes: Vec<usize>,
}

impl ModuleLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(ReservoirError::Layout("layout has no modules".into()));
        }
        if sizes.contains(&0) {
            return Err(ReservoirError::Layout(format!(
                "module sizes must be positive: {sizes:?}"
            )));
        }
        let total: usize = sizes.iter().sum();
        if total > MAX_QUBITS {
            return Err(ReservoirError::Layout(format!(
                "{total} qubits exceeds the {MAX_QUBITS}-qubit limit"
            )));
        }
        Ok(Self { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_modules(&self) -> usize {
        self.sizes.len()
    }

    pub fn total_qubits(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Number of qubits preceding module `module` (0-based module index).
    pub fn offset(&self, module: usize) -> usize {
        self.sizes[..module].iter().sum()
    }

    /// Global 1-based qubit labels owned by `module` (0-based module index).
    pub fn qubits(&self, module: usize) -> RangeInclusive<usize> {
        let start = self.offset(module) + 1;
        start..=start + self.sizes[module] - 1
    }

    /// 0-based module index owning global qubit `qubit`, if any.
    pub fn module_of(&self, qubit: usize) -> Option<usize> {
        (0..self.sizes.len()).find(|&m| self.qubits(m).contains(&qubit))
    }

    /// Common module size when all modules are equal.
    pub fn uniform_size(&self) -> Option<usize> {
        let first = self.sizes[0];
        self.sizes.iter().all(|&s| s == first).then_some(first)
    }
}

impl TryFrom<Vec<usize>> for ModuleLayout {
    type Error = ReservoirError;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        Self::new(sizes)
    }
}

impl From<ModuleLayout> for Vec<usize> {
    fn from(layout: ModuleLayout) -> Self {
        layout.sizes
    }
}

impl std::fmt::Display for ModuleLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// Distance-decaying ZZ couplings inside each module, cut off at `range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntraCoupling {
    pub theta_j: f64,
    pub alpha: f64,
    pub range: usize,
}

impl IntraCoupling {
    pub fn new(theta_j: f64, alpha: f64, range: usize) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() || !theta_j.is_finite() {
            return Err(ReservoirError::Parameter(format!(
                "need finite θ_J and α ≥ 0, got θ_J={theta_j}, α={alpha}"
            )));
        }
        Ok(Self {
            theta_j,
            alpha,
            range,
        })
    }

    /// `θ_J / |i-j|^α` for `0 < |i-j| ≤ R`, else 0. Indices are positions within one module.
    pub fn intra_angle(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(ReservoirError::SameQubit(i));
        }
        let d = i.abs_diff(j);
        Ok(if d <= self.range {
            self.theta_j / (d as f64).powf(self.alpha)
        } else {
            0.0
        })
    }
}

/// An inter-module ZZ coupling between global qubits `k < l` in different modules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterEdge {
    pub k: usize,
    pub l: usize,
    pub theta_c: f64,
}

impl InterEdge {
    pub fn validate(&self, layout: &ModuleLayout) -> Result<()> {
        let reject = |reason: &str| {
            Err(ReservoirError::Edge {
                k: self.k,
                l: self.l,
                reason: reason.to_string(),
            })
        };
        if self.k >= self.l {
            return reject("edges must satisfy k < l");
        }
        match (layout.module_of(self.k), layout.module_of(self.l)) {
            (Some(a), Some(b)) if a != b => Ok(()),
            (Some(_), Some(_)) => reject("both qubits are in the same module"),
            _ => reject("qubit outside the layout"),
        }
    }
}

/// Checks every edge against `layout` and rejects repeated `(k, l)` pairs.
pub fn validate_edges(layout: &ModuleLayout, edges: &[InterEdge]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for e in edges {
        e.validate(layout)?;
        if !seen.insert((e.k, e.l)) {
            return Err(ReservoirError::Edge {
                k: e.k,
                l: e.l,
                reason: "duplicate edge".into(),
            });
        }
    }
    Ok(())
}

/// All ZZ terms `(bit_p, bit_q, θ)` of the fused diagonal, as amplitude-index bit shifts.
fn zz_terms(
    layout: &ModuleLayout,
    coupling: Option<&IntraCoupling>,
    edges: &[InterEdge],
) -> Result<Vec<(u32, u32, f64)>> {
    let n = layout.total_qubits();
    let shift = |qubit: usize| (n - qubit) as u32;
    let mut terms = Vec::new();
    if let Some(coupling) = coupling {
        for module in 0..layout.n_modules() {
            let offset = layout.offset(module);
            let size = layout.sizes()[module];
            for i in 1..=size {
                for j in i + 1..=size {
                    let theta = coupling.intra_angle(i, j)?;
                    if theta != 0.0 {
                        terms.push((shift(offset + i), shift(offset + j), theta));
                    }
                }
            }
        }
    }
    validate_edges(layout, edges)?;
    for e in edges {
        if e.theta_c != 0.0 {
            terms.push((shift(e.k), shift(e.l), e.theta_c));
        }
    }
    Ok(terms)
}

/// Diagonal of `exp(-i Σ θ_pq Z_p Z_q)` over intra-module pairs and the given edges.
///
/// All terms are Z-diagonal and commute, so the module unitaries and the
/// inter-module unitary fuse into a single phase per basis state.
pub fn build_zz_phase(
    layout: &ModuleLayout,
    coupling: &IntraCoupling,
    edges: &[InterEdge],
) -> Result<DiagonalPhase> {
    phase_from_terms(layout, &zz_terms(layout, Some(coupling), edges)?)
}

/// Diagonal of `exp(-i Σ θ_c Z_k Z_l)` over the given edges only.
pub fn build_edge_phase(layout: &ModuleLayout, edges: &[InterEdge]) -> Result<DiagonalPhase> {
    phase_from_terms(layout, &zz_terms(layout, None, edges)?)
}

fn phase_from_terms(layout: &ModuleLayout, terms: &[(u32, u32, f64)]) -> Result<DiagonalPhase> {
    let dim = 1usize << layout.total_qubits();
    let phases = (0..dim)
        .map(|z| {
            let energy: f64 = terms
                .iter()
                .map(|&(p, q, theta)| {
                    // s_p s_q = +1 when the two bits agree, -1 otherwise.
                    if ((z >> p) ^ (z >> q)) & 1 == 0 {
                        theta
                    } else {
                        -theta
                    }
                })
                .sum();
            Complex64::from_polar(1.0, -energy)
        })
        .collect();
    Ok(DiagonalPhase::new(phases)?)
}

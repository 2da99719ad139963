use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use std::io::{Read, Write};

use super::{PreprocessError, Result};
use crate::matrix::SampleMatrix;

pub const PCA_MAGIC: &[u8; 4] = b"MQPC";
pub const PCA_FORMAT_VERSION: u32 = 1;

/// Rows per block when accumulating the covariance, bounding temporary memory.
const COVARIANCE_BLOCK: usize = 2048;

/// PCA fitted on training data only: mean, top-`k` directions and the
/// per-component training range used for rescaling to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `k × D`, row-major, rows orthonormal, sorted by decreasing variance.
    components: Vec<f64>,
    variances: Vec<f64>,
    train_min: Vec<f64>,
    train_max: Vec<f64>,
}

/// Fits PCA through an eigendecomposition of the `D × D` sample covariance (`1/(N-1)`).
///
/// Each component's sign is fixed so that its largest-magnitude entry is
/// positive (first such entry on ties), which makes the fit reproducible.
pub fn fit_pca(train: &SampleMatrix, k: usize) -> Result<PcaModel> {
    let (n, d) = (train.rows(), train.cols());
    if k == 0 || k > n.min(d) || n <= k {
        return Err(PreprocessError::Rank { k, samples: n, dim: d });
    }

    let mut mean = vec![0.0; d];
    for row in train.iter_rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut start = 0;
    while start < n {
        let rows = COVARIANCE_BLOCK.min(n - start);
        let mut centered = DMatrix::<f64>::zeros(d, rows);
        for (j, mut col) in centered.column_iter_mut().enumerate() {
            for ((c, x), m) in col.iter_mut().zip(train.row(start + j)).zip(&mean) {
                *c = x - m;
            }
        }
        cov.gemm(1.0, &centered, &centered.transpose(), 1.0);
        start += rows;
    }
    cov /= (n - 1) as f64;

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    // Stable sort: equal eigenvalues keep the solver's index order.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let top = eig.eigenvalues[order[0]].max(0.0);
    let mut components = Vec::with_capacity(k * d);
    let mut variances = Vec::with_capacity(k);
    for (rank, &idx) in order.iter().take(k).enumerate() {
        let variance = eig.eigenvalues[idx];
        if !(variance > 1e-12 * top.max(f64::MIN_POSITIVE)) {
            return Err(PreprocessError::Degenerate { component: rank });
        }
        if let Some(&next) = order.get(rank + 1) {
            if (variance - eig.eigenvalues[next]).abs() <= 1e-10 * variance {
                warn!("PCA eigenvalues {rank} and {} are tied; order follows the eigen-solver", rank + 1);
            }
        }
        let v = eig.eigenvectors.column(idx);
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, x)| if x.abs() > best.1.abs() { (i, *x) } else { best });
        let sign = if pivot.1 < 0.0 { -1.0 } else { 1.0 };
        components.extend(v.iter().map(|x| sign * x));
        variances.push(variance);
    }

    let mut model = PcaModel {
        mean,
        components,
        variances,
        train_min: vec![f64::INFINITY; k],
        train_max: vec![f64::NEG_INFINITY; k],
    };
    let mut coeffs = vec![0.0; k];
    for row in train.iter_rows() {
        model.project_into(row, &mut coeffs);
        for j in 0..k {
            model.train_min[j] = model.train_min[j].min(coeffs[j]);
            model.train_max[j] = model.train_max[j].max(coeffs[j]);
        }
    }
    for j in 0..k {
        if !(model.train_min[j] < model.train_max[j]) {
            return Err(PreprocessError::Degenerate { component: j });
        }
    }
    Ok(model)
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.variances.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Row `j` of the component matrix.
    pub fn component(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.components[j * d..(j + 1) * d]
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn train_min(&self) -> &[f64] {
        &self.train_min
    }

    pub fn train_max(&self) -> &[f64] {
        &self.train_max
    }

    /// Raw coefficients `c_j = v_j · (x - μ)`.
    pub fn project_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (j, c) in out.iter_mut().enumerate() {
            let v = &self.components[j * d..(j + 1) * d];
            *c = v.iter().zip(x).zip(&self.mean).map(|((v, x), m)| v * (x - m)).sum();
        }
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut out = vec![0.0; self.n_components()];
        self.project_into(x, &mut out);
        Ok(out)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(PreprocessError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `I_j = clip((c_j - c_min) / (c_max - c_min), 0, 1)`.
    pub fn project_rescale(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut out = vec![0.0; self.n_components()];
        self.project_rescale_into(x, &mut out);
        Ok(out)
    }

    pub fn project_rescale_into(&self, x: &[f64], out: &mut [f64]) {
        self.project_into(x, out);
        for (j, c) in out.iter_mut().enumerate() {
            let span = self.train_max[j] - self.train_min[j];
            *c = ((*c - self.train_min[j]) / span).clamp(0.0, 1.0);
        }
    }

    /// Rescaled coefficients for every row of `samples`.
    pub fn transform(&self, samples: &SampleMatrix) -> Result<SampleMatrix> {
        if samples.cols() != self.dim() {
            return Err(PreprocessError::Dimension {
                expected: self.dim(),
                got: samples.cols(),
            });
        }
        let k = self.n_components();
        let mut out = SampleMatrix::zeros(samples.rows(), k);
        for i in 0..samples.rows() {
            self.project_rescale_into(samples.row(i), out.row_mut(i));
        }
        Ok(out)
    }

    /// Keeps only the first `k` components.
    pub fn truncated(&self, k: usize) -> Result<PcaModel> {
        if k == 0 || k > self.n_components() {
            return Err(PreprocessError::Rank {
                k,
                samples: 0,
                dim: self.n_components(),
            });
        }
        Ok(PcaModel {
            mean: self.mean.clone(),
            components: self.components[..k * self.dim()].to_vec(),
            variances: self.variances[..k].to_vec(),
            train_min: self.train_min[..k].to_vec(),
            train_max: self.train_max[..k].to_vec(),
        })
    }

    /// Binary cache layout: `"MQPC"`, version, `D`, `k` (u32 LE), then mean,
    /// components (row-major), variances, train_min, train_max as f64 LE.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(PCA_MAGIC)?;
        w.write_all(&PCA_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        w.write_all(&(self.n_components() as u32).to_le_bytes())?;
        for block in [
            &self.mean,
            &self.components,
            &self.variances,
            &self.train_min,
            &self.train_max,
        ] {
            for x in block.iter() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<PcaModel> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != PCA_MAGIC {
            return Err(PreprocessError::Format(format!("bad magic {magic:?}")));
        }
        let mut word = [0u8; 4];
        let mut read_u32 = |r: &mut dyn Read| -> Result<u32> {
            r.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word))
        };
        let version = read_u32(&mut r)?;
        if version != PCA_FORMAT_VERSION {
            return Err(PreprocessError::Format(format!("unsupported version {version}")));
        }
        let d = read_u32(&mut r)? as usize;
        let k = read_u32(&mut r)? as usize;
        let mut read_vec = |len: usize| -> Result<Vec<f64>> {
            let mut bytes = vec![0u8; len * 8];
            r.read_exact(&mut bytes)?;
            Ok(bytes
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                .collect())
        };
        let model = PcaModel {
            mean: read_vec(d)?,
            components: read_vec(k * d)?,
            variances: read_vec(k)?,
            train_min: read_vec(k)?,
            train_max: read_vec(k)?,
        };
        if model.train_min.iter().zip(&model.train_max).any(|(a, b)| !(a < b)) {
            return Err(PreprocessError::Format("empty component range".into()));
        }
        Ok(model)
    }
}

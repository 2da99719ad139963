//! MNIST, Fashion-MNIST and CIFAR-10 from their canonical binary files.
//!
//! Files live under `<data_dir>/<dataset>/` with their original archive names
//! (`train-images-idx3-ubyte.gz`, `cifar-10-batches-bin/data_batch_1.bin`, ...).
//! Gzip is detected by magic bytes, so compressed and uncompressed copies load
//! the same way. [`fetch`] populates that layout from a mirror, checking every
//! archive against the shipped [`Manifest`].

mod cifar;
mod fetch;
mod idx;
mod manifest;

pub use cifar::{load_cifar10, parse_cifar_records, write_cifar_records, CIFAR_PIXELS, CIFAR_RECORD};
pub use fetch::{fetch, fetch_with, FetchOptions};
pub use idx::{
    load_idx, parse_idx_images, parse_idx_labels, write_idx_images, write_idx_labels,
    IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use manifest::{ArchiveEntry, DatasetEntry, Manifest, DEFAULT_MANIFEST};

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

use crate::matrix::SampleMatrix;

pub const N_CLASSES: usize = 10;

/// Label counts of the standard MNIST test split, class 0 to 9.
pub const MNIST_TEST_COUNTS: [usize; 10] = [980, 1135, 1032, 1010, 982, 892, 958, 1028, 974, 1009];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed file: {0}")]
    Format(String),
    #[error("truncated file: {0}")]
    Length(String),
    #[error("label {label} at position {index} is not a class 0-9")]
    Label { index: usize, label: u8 },
    #[error("inconsistent files: {0}")]
    Mismatch(String),
    #[error("unexpected shape: {0}")]
    Shape(String),
    #[error("unknown dataset '{0}' (expected mnist, fashion_mnist or cifar10)")]
    Argument(String),
    #[error("missing file {path}; run `mqerc fetch {dataset}` or place it there by hand")]
    Missing { dataset: String, path: PathBuf },
    #[error("integrity check failed for {file}: {reason}")]
    Integrity { file: String, reason: String },
    #[error("download of {url} failed after {attempts} attempt(s): {message}")]
    Transport { url: String, attempts: usize, message: String },
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl DatasetError {
    fn in_file(self, path: &Path) -> Self {
        match self {
            Self::Format(m) => Self::Format(format!("{}: {m}", path.display())),
            Self::Length(m) => Self::Length(format!("{}: {m}", path.display())),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, DatasetError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// Reads a file, inflating it when it starts with the gzip magic.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(io_err(path))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out).map_err(io_err(path))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

pub(crate) fn check_labels(labels: &[u8]) -> Result<()> {
    match labels.iter().position(|&y| y as usize >= N_CLASSES) {
        Some(index) => Err(DatasetError::Label { index, label: labels[index] }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetName {
    Mnist,
    FashionMnist,
    Cifar10,
}

impl DatasetName {
    pub const ALL: [DatasetName; 3] = [Self::Mnist, Self::FashionMnist, Self::Cifar10];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mnist => "mnist",
            Self::FashionMnist => "fashion_mnist",
            Self::Cifar10 => "cifar10",
        }
    }

    /// `(N_train, N_test, D)` of the canonical split.
    pub fn shape(self) -> (usize, usize, usize) {
        match self {
            Self::Mnist | Self::FashionMnist => (60_000, 10_000, 784),
            Self::Cifar10 => (50_000, 10_000, 3072),
        }
    }

    /// Label counts of the standard test split.
    pub fn test_label_counts(self) -> [usize; 10] {
        match self {
            Self::Mnist => MNIST_TEST_COUNTS,
            Self::FashionMnist | Self::Cifar10 => [1000; 10],
        }
    }

    pub fn dir(self, data_dir: &Path) -> PathBuf {
        data_dir.join(self.as_str())
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mnist" => Ok(Self::Mnist),
            "fashion_mnist" | "fashion" => Ok(Self::FashionMnist),
            "cifar10" | "cifar_10" => Ok(Self::Cifar10),
            _ => Err(DatasetError::Argument(s.to_string())),
        }
    }
}

/// Flattened images in `[0, 1]` with their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: DatasetName,
    pub train_x: SampleMatrix,
    pub train_y: Vec<u8>,
    pub test_x: SampleMatrix,
    pub test_y: Vec<u8>,
}

const IDX_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

pub(crate) const CIFAR_DIR: &str = "cifar-10-batches-bin";

/// Prefers an uncompressed copy, falling back to the `.gz` archive.
fn locate(dataset: DatasetName, dir: &Path, stem: &str) -> Result<PathBuf> {
    let plain = dir.join(stem);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{stem}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(DatasetError::Missing { dataset: dataset.to_string(), path: gz })
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.train_x.cols()
    }

    /// Loads the canonical split and checks its shape.
    pub fn load(name: DatasetName, data_dir: &Path) -> Result<Self> {
        let dir = name.dir(data_dir);
        let ds = match name {
            DatasetName::Mnist | DatasetName::FashionMnist => {
                let path = |i: usize| locate(name, &dir, IDX_FILES[i]);
                let (train_x, train_y) = load_idx(&path(0)?, &path(1)?)?;
                let (test_x, test_y) = load_idx(&path(2)?, &path(3)?)?;
                Self { name, train_x, train_y, test_x, test_y }
            }
            DatasetName::Cifar10 => {
                let batches = dir.join(CIFAR_DIR);
                let path = |stem: String| -> Result<PathBuf> {
                    let p = batches.join(&stem);
                    if p.is_file() {
                        Ok(p)
                    } else {
                        Err(DatasetError::Missing { dataset: name.to_string(), path: p })
                    }
                };
                let train: Vec<PathBuf> = (1..=5).map(|i| path(format!("data_batch_{i}.bin"))).collect::<Result<_>>()?;
                let (train_x, train_y) = load_cifar10(&train)?;
                let (test_x, test_y) = load_cifar10(&[path("test_batch.bin".into())?])?;
                Self { name, train_x, train_y, test_x, test_y }
            }
        };
        ds.check_shape()?;
        Ok(ds)
    }

    pub fn check_shape(&self) -> Result<()> {
        let expected = self.name.shape();
        let got = (self.train_x.rows(), self.test_x.rows(), self.dim());
        if got != expected || self.test_x.cols() != self.dim() {
            return Err(DatasetError::Shape(format!(
                "{}: (train, test, dim) = {got:?}, expected {expected:?}",
                self.name
            )));
        }
        Ok(())
    }

    pub fn test_label_histogram(&self) -> [usize; 10] {
        histogram(&self.test_y)
    }

    /// The first `n_train` training rows (all of them if `None`); the test split is kept whole.
    pub fn with_train_subset(&self, n_train: Option<usize>) -> Self {
        match n_train {
            Some(n) if n < self.train_x.rows() => Self {
                name: self.name,
                train_x: self.train_x.head(n),
                train_y: self.train_y[..n].to_vec(),
                test_x: self.test_x.clone(),
                test_y: self.test_y.clone(),
            },
            _ => self.clone(),
        }
    }
}

impl Dataset {
    /// Ten noisy class prototypes in `[0, 1]^dim`, labelled `i mod 10`.
    ///
    /// Not a real benchmark: it stands in for the image sets in examples and
    /// tests that must run without downloads. `name` is kept as MNIST.
    pub fn synthetic(n_train: usize, n_test: usize, dim: usize, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = crate::seed::rng_from_seed(crate::seed::derive_seed(seed, "synthetic-dataset", &[dim as u64]));
        let prototypes: Vec<Vec<f64>> = (0..N_CLASSES).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
        let mut split = |n: usize| {
            let labels: Vec<u8> = (0..n).map(|i| (i % N_CLASSES) as u8).collect();
            let data = labels
                .iter()
                .flat_map(|&y| prototypes[y as usize].clone())
                .map(|p| (p + 0.35 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0))
                .collect();
            (SampleMatrix::from_vec(n, dim, data), labels)
        };
        let (train_x, train_y) = split(n_train);
        let (test_x, test_y) = split(n_test);
        Self { name: DatasetName::Mnist, train_x, train_y, test_x, test_y }
    }
}

pub fn histogram(labels: &[u8]) -> [usize; 10] {
    let mut h = [0; 10];
    for &y in labels {
        h[y as usize] += 1;
    }
    h
}

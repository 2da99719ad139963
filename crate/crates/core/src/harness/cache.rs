use log::warn;
use sha2::{Digest, Sha256};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{HarnessError, Result};
use crate::matrix::SampleMatrix;
use crate::preprocess::PcaModel;

pub const FEATURE_MAGIC: &[u8; 4] = b"MQFT";
pub const FEATURE_FORMAT_VERSION: u32 = 1;

/// Reservoir features (`N × 2^n` probabilities) with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub n_qubits: usize,
    pub features: SampleMatrix,
    pub labels: Vec<u8>,
}

impl FeatureSet {
    /// `MQFT`, version, `n` (u32), `N` (u64), row-major f64 features, then `N` label bytes; all little-endian.
    pub fn write_to(&self, w: impl Write) -> std::io::Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(FEATURE_MAGIC)?;
        w.write_all(&FEATURE_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_qubits as u32).to_le_bytes())?;
        w.write_all(&(self.labels.len() as u64).to_le_bytes())?;
        for x in self.features.as_slice() {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&self.labels)?;
        w.flush()
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let fmt = |m: &str| HarnessError::Cache(m.to_string());
        let mut head = [0u8; 20];
        r.read_exact(&mut head).map_err(|_| fmt("truncated header"))?;
        if &head[..4] != FEATURE_MAGIC {
            return Err(fmt("bad magic"));
        }
        let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
        if version != FEATURE_FORMAT_VERSION {
            return Err(fmt(&format!("unsupported version {version}")));
        }
        let n = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        let rows = u64::from_le_bytes(head[12..20].try_into().unwrap()) as usize;
        if n > crate::statevector::MAX_QUBITS {
            return Err(fmt("qubit count out of range"));
        }
        let cols = 1usize << n;
        let mut bytes = vec![0u8; rows * cols * 8];
        r.read_exact(&mut bytes).map_err(|_| fmt("truncated features"))?;
        let data = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        let mut labels = vec![0u8; rows];
        r.read_exact(&mut labels).map_err(|_| fmt("truncated labels"))?;
        if r.read(&mut [0u8; 1]).map_err(|e| fmt(&e.to_string()))? != 0 {
            return Err(fmt("trailing bytes"));
        }
        Ok(Self { n_qubits: n, features: SampleMatrix::from_vec(rows, cols, data), labels })
    }
}

/// Lower-case hex SHA-256 of the given parts, each length-prefixed.
pub fn content_key(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn write_atomic(path: &Path, write: impl FnOnce(&mut std::fs::File) -> std::io::Result<()>) -> Result<()> {
    let io = |source| HarnessError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        write(&mut f)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io)
}

/// On-disk cache of PCA models and feature matrices, keyed by content hashes.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    root: PathBuf,
}

impl FeatureCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, kind: &str, key: &str, ext: &str) -> PathBuf {
        self.root.join(kind).join(format!("{key}.{ext}"))
    }

    pub fn load_features(&self, key: &str) -> Option<FeatureSet> {
        let path = self.path("features", key, "mqft");
        let file = std::fs::File::open(&path).ok()?;
        match FeatureSet::read_from(file) {
            Ok(set) => Some(set),
            Err(e) => {
                warn!("discarding corrupt feature cache {}: {e}", path.display());
                let _ = std::fs::remove_file(&path);
                None
            }
        }
    }

    pub fn store_features(&self, key: &str, set: &FeatureSet) -> Result<()> {
        write_atomic(&self.path("features", key, "mqft"), |f| set.write_to(f))
    }

    pub fn load_pca(&self, key: &str) -> Option<PcaModel> {
        let path = self.path("pca", key, "mqpc");
        let file = std::fs::File::open(&path).ok()?;
        match PcaModel::read_from(BufReader::new(file)) {
            Ok(m) => Some(m),
            Err(e) => {
                warn!("discarding corrupt PCA cache {}: {e}", path.display());
                let _ = std::fs::remove_file(&path);
                None
            }
        }
    }

    pub fn store_pca(&self, key: &str, model: &PcaModel) -> Result<()> {
        write_atomic(&self.path("pca", key, "mqpc"), |f| model.write_to(BufWriter::new(f)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureSet {
        FeatureSet {
            n_qubits: 2,
            features: SampleMatrix::from_rows(&[[0.1, 0.2, 0.3, 0.4], [1.0, 0.0, -0.0, f64::MIN_POSITIVE]]),
            labels: vec![4, 9],
        }
    }

    #[test]
    fn mqft_layout_and_round_trip() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"MQFT");
        assert_eq!(buf[4..8], 1u32.to_le_bytes());
        assert_eq!(buf[8..12], 2u32.to_le_bytes());
        assert_eq!(buf[12..20], 2u64.to_le_bytes());
        assert_eq!(buf[20..28], 0.1f64.to_le_bytes());
        assert_eq!(&buf[buf.len() - 2..], &[4, 9]);
        assert_eq!(buf.len(), 20 + 8 * 8 + 2);
        let back = FeatureSet::read_from(&buf[..]).unwrap();
        assert_eq!(back, sample());
        assert_eq!(back.features.row(1)[2].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn corrupt_entries_are_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FeatureCache::new(dir.path());
        cache.store_features("k", &sample()).unwrap();
        assert_eq!(cache.load_features("k"), Some(sample()));
        let path = dir.path().join("features/k.mqft");
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 1);
        std::fs::write(&path, &bytes).unwrap();
        assert_eq!(cache.load_features("k"), None);
        assert!(!path.exists());
        let mut bad = Vec::new();
        sample().write_to(&mut bad).unwrap();
        bad[0] = b'X';
        assert!(FeatureSet::read_from(&bad[..]).is_err());
        bad[0] = b'M';
        bad.push(0);
        assert!(FeatureSet::read_from(&bad[..]).is_err());
    }

    #[test]
    fn keys_separate_parts() {
        assert_ne!(content_key(&[b"ab", b"c"]), content_key(&[b"a", b"bc"]));
        assert_eq!(content_key(&[b"x"]).len(), 64);
    }
}

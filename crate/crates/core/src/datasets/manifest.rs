use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use super::{DatasetError, DatasetName, Result};

/// The manifest shipped with the crate (`data/datasets.json`).
pub const DEFAULT_MANIFEST: &str = include_str!("../../data/datasets.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub name: String,
    pub size: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub md5: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub mirror: String,
    pub archives: Vec<ArchiveEntry>,
}

/// Mirror URL plus size and checksum of every archive, keyed by dataset name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Manifest {
    pub datasets: BTreeMap<String, DatasetEntry>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| DatasetError::Manifest(e.to_string()))?;
        for (name, entry) in &m.datasets {
            for a in &entry.archives {
                if a.md5.is_none() && a.sha256.is_none() {
                    return Err(DatasetError::Manifest(format!("{name}/{} has no checksum", a.name)));
                }
            }
        }
        Ok(m)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn entry(&self, name: DatasetName) -> Result<&DatasetEntry> {
        self.datasets
            .get(name.as_str())
            .ok_or_else(|| DatasetError::Manifest(format!("no entry for {name}")))
    }
}

impl Default for Manifest {
    fn default() -> Self {
        Self::parse(DEFAULT_MANIFEST).expect("shipped manifest is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_manifest_covers_every_dataset() {
        let m = Manifest::default();
        for name in DatasetName::ALL {
            let e = m.entry(name).unwrap();
            assert!(!e.archives.is_empty());
            assert!(e.archives.iter().all(|a| a.size > 0 && a.md5.as_ref().is_some_and(|h| h.len() == 32)));
        }
        assert_eq!(m.entry(DatasetName::Cifar10).unwrap().archives[0].name, "cifar-10-binary.tar.gz");
    }

    #[test]
    fn entries_need_a_checksum() {
        let bad = r#"{"mnist": {"mirror": "x", "archives": [{"name": "a", "size": 1}]}}"#;
        assert!(matches!(Manifest::parse(bad), Err(DatasetError::Manifest(_))));
    }
}

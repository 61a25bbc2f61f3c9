//! Corpus manifests: one small JSON document describing where a corpus's
//! feature CSV lives and what shape to expect.

use super::{load_feature_csv, Corpus, CorpusError};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

/// `{id, language, feature_dim, csv_path}`; `csv_path` is resolved relative
/// to the manifest file's own directory unless absolute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub id: String,
    pub language: String,
    pub feature_dim: usize,
    pub csv_path: String,
}

impl CorpusManifest {
    pub fn read(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CorpusError::MalformedManifest(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CorpusError::MalformedManifest(e.to_string()))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Where the CSV lives, given the manifest's own location.
    pub fn resolve_csv_path(&self, manifest_path: &Path) -> PathBuf {
        let csv = Path::new(&self.csv_path);
        if csv.is_absolute() {
            csv.to_path_buf()
        } else {
            manifest_path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join(csv)
        }
    }
}

/// Read a manifest and the corpus it points at, checking the declared
/// feature dimension.
pub fn load_from_manifest<T: Real>(manifest_path: &Path) -> Result<Corpus<T>, CorpusError> {
    let manifest = CorpusManifest::read(manifest_path)?;
    let csv_path = manifest.resolve_csv_path(manifest_path);
    let corpus = load_feature_csv::<T>(&csv_path, &manifest.id, &manifest.language)?;
    if corpus.feature_dim() != manifest.feature_dim {
        return Err(CorpusError::MalformedManifest(format!(
            "manifest declares feature_dim {}, CSV has {}",
            manifest.feature_dim,
            corpus.feature_dim()
        )));
    }
    Ok(corpus)
}

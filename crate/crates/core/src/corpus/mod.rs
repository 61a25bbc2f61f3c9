//! Corpora: labeled utterance collections, the category→valence mapping,
//! CSV/manifest ingestion, deterministic splitting, and a synthetic corpus
//! generator with controllable cross-corpus shift.

mod csv_io;
mod manifest;
mod split;
mod synth;
mod valence;

pub use csv_io::{load_feature_csv, write_feature_csv};
pub use manifest::{load_from_manifest, CorpusManifest};
pub use split::{kfold, split};
pub use synth::{generate_synthetic, random_rotation, SyntheticCorpusSpec};
pub use valence::{map_to_valence, valence_table, CorpusMeta, ValenceLabel, CORPUS_METADATA};

use crate::scalar::Real;
use ndarray::{Array1, Array2};
use thiserror::Error;

/// Errors from corpus construction, ingestion, and splitting.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown corpus {0:?} (expected one of the five supported corpora)")]
    UnknownCorpus(String),
    #[error("unknown label {label:?} for corpus {corpus}")]
    UnknownLabel { corpus: String, label: String },
    #[error("corpus id must be non-empty")]
    EmptyId,
    #[error("utterance {id:?} has {got} features, corpus declares {expected}")]
    InconsistentDim { id: String, expected: usize, got: usize },
    #[error("row {row}: expected {expected} columns, got {got}")]
    RaggedRow { row: usize, expected: usize, got: usize },
    #[error("row {row}, column {column}: {message}")]
    BadCell { row: usize, column: String, message: String },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("need at least {needed} utterances, got {got}")]
    TooFewUtterances { needed: usize, got: usize },
    #[error("fold count must be >= 2, got {0}")]
    BadFoldCount(usize),
    #[error("fold count {k} exceeds corpus size {n}")]
    TooManyFolds { k: usize, n: usize },
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One labeled utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance<T: Real> {
    pub id: String,
    pub features: Array1<T>,
    pub label: ValenceLabel,
    /// Original categorical emotion, when the source recorded one.
    pub raw_label: Option<String>,
}

/// An immutable collection of utterances with a common feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus<T: Real> {
    id: String,
    language: String,
    feature_dim: usize,
    utterances: Vec<Utterance<T>>,
}

impl<T: Real> Corpus<T> {
    /// Build a corpus, checking that every utterance has `feature_dim`
    /// features.
    pub fn new(
        id: impl Into<String>,
        language: impl Into<String>,
        feature_dim: usize,
        utterances: Vec<Utterance<T>>,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        if id.is_empty() {
            return Err(CorpusError::EmptyId);
        }
        for u in &utterances {
            if u.features.len() != feature_dim {
                return Err(CorpusError::InconsistentDim {
                    id: u.id.clone(),
                    expected: feature_dim,
                    got: u.features.len(),
                });
            }
        }
        Ok(Corpus {
            id,
            language: language.into(),
            feature_dim,
            utterances,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn utterances(&self) -> &[Utterance<T>] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Feature rows stacked into an n × feature_dim matrix, in corpus order.
    pub fn features_matrix(&self) -> Array2<T> {
        let mut m = Array2::zeros((self.len(), self.feature_dim));
        for (r, u) in self.utterances.iter().enumerate() {
            m.row_mut(r).assign(&u.features);
        }
        m
    }

    /// Labels in corpus order.
    pub fn labels(&self) -> Vec<ValenceLabel> {
        self.utterances.iter().map(|u| u.label).collect()
    }

    /// Same utterances under a different corpus id (used when pooling).
    pub fn with_id(mut self, id: impl Into<String>) -> Result<Self, CorpusError> {
        let id = id.into();
        if id.is_empty() {
            return Err(CorpusError::EmptyId);
        }
        self.id = id;
        Ok(self)
    }

    /// Pool several corpora of equal feature dimension into one, preserving
    /// order (all of the first corpus, then all of the second, ...).
    pub fn concat(
        id: impl Into<String>,
        parts: &[&Corpus<T>],
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        if id.is_empty() {
            return Err(CorpusError::EmptyId);
        }
        let dim = parts.first().map(|c| c.feature_dim).unwrap_or(0);
        let mut utterances = Vec::new();
        for part in parts {
            if part.feature_dim != dim {
                return Err(CorpusError::InconsistentDim {
                    id: part.id.clone(),
                    expected: dim,
                    got: part.feature_dim,
                });
            }
            utterances.extend(part.utterances.iter().cloned());
        }
        let language = if parts.iter().all(|c| c.language == parts[0].language) {
            parts[0].language.clone()
        } else {
            "mixed".to_string()
        };
        Corpus::new(id, language, dim, utterances)
    }

    /// Subset by utterance index, in the given order.
    pub(crate) fn subset(&self, indices: &[usize], id: String) -> Self {
        Corpus {
            id,
            language: self.language.clone(),
            feature_dim: self.feature_dim,
            utterances: indices.iter().map(|&i| self.utterances[i].clone()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn utt(id: &str, features: Array1<f64>, label: ValenceLabel) -> Utterance<f64> {
        Utterance { id: id.to_string(), features, label, raw_label: None }
    }

    #[test]
    fn corpus_reports_its_shape() {
        let c = Corpus::new(
            "toy",
            "none",
            2,
            vec![
                utt("a", array![0.1, 0.2], ValenceLabel::Negative),
                utt("b", array![0.3, 0.4], ValenceLabel::Positive),
            ],
        )
        .unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.feature_dim(), 2);
        assert_eq!(c.features_matrix(), array![[0.1, 0.2], [0.3, 0.4]]);
        assert_eq!(c.labels(), vec![ValenceLabel::Negative, ValenceLabel::Positive]);
    }

    #[test]
    fn mismatched_feature_dims_are_rejected() {
        let err = Corpus::new(
            "toy",
            "none",
            2,
            vec![utt("a", array![0.1, 0.2, 0.3], ValenceLabel::Negative)],
        );
        assert!(matches!(err, Err(CorpusError::InconsistentDim { expected: 2, got: 3, .. })));
        assert!(matches!(
            Corpus::<f64>::new("", "none", 2, vec![]),
            Err(CorpusError::EmptyId)
        ));
    }

    #[test]
    fn concat_preserves_order_and_checks_dims() {
        let a = Corpus::new("a", "l1", 1, vec![utt("a0", array![1.0], ValenceLabel::Negative)]).unwrap();
        let b = Corpus::new("b", "l2", 1, vec![utt("b0", array![2.0], ValenceLabel::Positive)]).unwrap();
        let ab = Corpus::concat("ab", &[&a, &b]).unwrap();
        assert_eq!(ab.len(), 2);
        assert_eq!(ab.utterances()[0].id, "a0");
        assert_eq!(ab.utterances()[1].id, "b0");
        assert_eq!(ab.language(), "mixed");

        let c = Corpus::new("c", "l1", 2, vec![utt("c0", array![1.0, 2.0], ValenceLabel::Negative)]).unwrap();
        assert!(matches!(
            Corpus::concat("ac", &[&a, &c]),
            Err(CorpusError::InconsistentDim { .. })
        ));
    }
}

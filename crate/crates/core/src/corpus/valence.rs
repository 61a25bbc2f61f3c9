//! Mapping from corpus-specific emotion categories to binary valence.
//!
//! Five emotional speech corpora are supported.  Each annotates utterances
//! with its own categorical scheme; the table below collapses every category
//! onto Negative or Positive valence.  The assignment (including the
//! conventions that Neutral counts as Positive and that FAU-AIBO's "Rest"
//! class is Positive) is frozen; lookups are case-insensitive in both the
//! corpus id and the category name.

use super::CorpusError;

/// Binary valence class.  Index 0 = Negative, index 1 = Positive everywhere
/// a class index appears (model outputs, confusion matrices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValenceLabel {
    Negative,
    Positive,
}

impl ValenceLabel {
    /// Frozen class index: Negative = 0, Positive = 1.
    pub fn index(self) -> usize {
        match self {
            ValenceLabel::Negative => 0,
            ValenceLabel::Positive => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(ValenceLabel::Negative),
            1 => Some(ValenceLabel::Positive),
            _ => None,
        }
    }

    /// Short form used in CSV files: `neg` / `pos`.
    pub fn as_str(self) -> &'static str {
        match self {
            ValenceLabel::Negative => "neg",
            ValenceLabel::Positive => "pos",
        }
    }

    /// Parse the short or long form, case-insensitively.
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "neg" | "negative" => Some(ValenceLabel::Negative),
            "pos" | "positive" => Some(ValenceLabel::Positive),
            _ => None,
        }
    }
}

/// Static facts about one of the five supported corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusMeta {
    pub id: &'static str,
    pub language: &'static str,
    /// Utterance count of the original corpus (metadata only; nothing is
    /// downloaded or bundled).
    pub utterance_count: usize,
}

/// The five corpora, in canonical order.
pub const CORPUS_METADATA: [CorpusMeta; 5] = [
    CorpusMeta { id: "FAU-AIBO", language: "German", utterance_count: 18216 },
    CorpusMeta { id: "IEMOCAP", language: "English", utterance_count: 5531 },
    CorpusMeta { id: "EMO-DB", language: "German", utterance_count: 494 },
    CorpusMeta { id: "SAVEE", language: "English", utterance_count: 480 },
    CorpusMeta { id: "EMOVO", language: "Italian", utterance_count: 588 },
];

use ValenceLabel::{Negative, Positive};

/// Category → valence rows, one slice per corpus.  34 entries in total.
const VALENCE_TABLE: [(&str, &[(&str, ValenceLabel)]); 5] = [
    (
        "FAU-AIBO",
        &[
            ("Angry", Negative),
            ("Touchy", Negative),
            ("Emphatic", Negative),
            ("Reprimanding", Negative),
            ("Motherese", Positive),
            ("Joyful", Positive),
            ("Neutral", Positive),
            ("Rest", Positive),
        ],
    ),
    (
        "IEMOCAP",
        &[
            ("Angry", Negative),
            ("Sadness", Negative),
            ("Neutral", Positive),
            ("Happy", Positive),
            ("Excited", Positive),
        ],
    ),
    (
        "EMO-DB",
        &[
            ("Anger", Negative),
            ("Sadness", Negative),
            ("Fear", Negative),
            ("Disgust", Negative),
            ("Boredom", Negative),
            ("Neutral", Positive),
            ("Happiness", Positive),
        ],
    ),
    (
        "SAVEE",
        &[
            ("Anger", Negative),
            ("Sadness", Negative),
            ("Fear", Negative),
            ("Disgust", Negative),
            ("Neutral", Positive),
            ("Happiness", Positive),
            ("Surprise", Positive),
        ],
    ),
    (
        "EMOVO",
        &[
            ("Anger", Negative),
            ("Sadness", Negative),
            ("Fear", Negative),
            ("Disgust", Negative),
            ("Neutral", Positive),
            ("Joy", Positive),
            ("Surprise", Positive),
        ],
    ),
];

/// Look up the valence of a corpus-specific category name.
///
/// Both arguments are matched case-insensitively; the category must belong to
/// that corpus's own scheme (e.g. EMO-DB has no "Surprise").
pub fn map_to_valence(corpus_id: &str, raw_label: &str) -> Result<ValenceLabel, CorpusError> {
    let (_, rows) = VALENCE_TABLE
        .iter()
        .find(|(id, _)| id.eq_ignore_ascii_case(corpus_id))
        .ok_or_else(|| CorpusError::UnknownCorpus(corpus_id.to_string()))?;
    rows.iter()
        .find(|(name, _)| name.eq_ignore_ascii_case(raw_label))
        .map(|&(_, v)| v)
        .ok_or_else(|| CorpusError::UnknownLabel {
            corpus: corpus_id.to_string(),
            label: raw_label.to_string(),
        })
}

/// Every (corpus id, category, valence) row of the mapping, in table order.
pub fn valence_table() -> impl Iterator<Item = (&'static str, &'static str, ValenceLabel)> {
    VALENCE_TABLE
        .iter()
        .flat_map(|&(id, rows)| rows.iter().map(move |&(name, v)| (id, name, v)))
}

//! Feature CSV reading and writing.
//!
//! Format: header `utt_id,label,f_0,...,f_{dim-1}`, one row per utterance,
//! UTF-8, `.` decimal separator.  The label column accepts either the literal
//! valence forms `neg`/`pos` (any case) or a corpus-specific category name,
//! which is mapped through the valence table for the corpus being loaded.
//! Writing always emits `neg`/`pos`; floats are printed in shortest
//! round-trip form, so write→read→write reproduces a file byte for byte.

use super::{map_to_valence, Corpus, CorpusError, Utterance, ValenceLabel};
use crate::scalar::Real;
use ndarray::Array1;
use std::path::Path;

/// Load a corpus from a feature CSV.
///
/// `corpus_id` doubles as the row key for category→valence mapping when the
/// label column holds raw category names; files that only use `neg`/`pos`
/// load under any id.
pub fn load_feature_csv<T: Real>(
    path: &Path,
    corpus_id: &str,
    language: &str,
) -> Result<Corpus<T>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;

    let header = reader.headers()?.clone();
    if header.len() < 3 {
        return Err(CorpusError::RaggedRow { row: 0, expected: 3, got: header.len() });
    }
    if &header[0] != "utt_id" || &header[1] != "label" {
        return Err(CorpusError::BadCell {
            row: 0,
            column: header.get(0).unwrap_or("").to_string(),
            message: "header must start with utt_id,label".to_string(),
        });
    }
    let dim = header.len() - 2;

    let mut utterances = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        if record.len() != dim + 2 {
            return Err(CorpusError::RaggedRow { row, expected: dim + 2, got: record.len() });
        }
        let id = record[0].to_string();
        let label_text = &record[1];
        let (label, raw_label) = match ValenceLabel::parse(label_text) {
            Some(v) => (v, None),
            None => (
                map_to_valence(corpus_id, label_text)?,
                Some(label_text.to_string()),
            ),
        };
        let mut features = Array1::zeros(dim);
        for (col, cell) in record.iter().skip(2).enumerate() {
            let value: f64 = cell.parse().map_err(|_| CorpusError::BadCell {
                row,
                column: format!("f_{col}"),
                message: format!("not a number: {cell:?}"),
            })?;
            features[col] = T::cast(value);
        }
        utterances.push(Utterance { id, features, label, raw_label });
    }
    Corpus::new(corpus_id, language, dim, utterances)
}

/// Write a corpus in the feature CSV format (labels as `neg`/`pos`).
pub fn write_feature_csv<T: Real>(path: &Path, corpus: &Corpus<T>) -> Result<(), CorpusError> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["utt_id".to_string(), "label".to_string()];
    header.extend((0..corpus.feature_dim()).map(|i| format!("f_{i}")));
    writer.write_record(&header)?;
    for u in corpus.utterances() {
        let mut row = vec![u.id.clone(), u.label.as_str().to_string()];
        row.extend(u.features.iter().map(|x| format!("{x}")));
        writer.write_record(&row)?;
    }
    writer.flush().map_err(CorpusError::Io)?;
    Ok(())
}

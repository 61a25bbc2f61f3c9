//! Experimental protocols: metric computation, within-corpus and
//! cross-corpus evaluation, target-fraction sweeps, leave-one-corpus-out,
//! and batch suite execution with CSV/SVG output.

mod protocols;
mod report;
mod suite;

pub use protocols::{
    cross_corpus, default_fractions, default_seeds, leave_one_corpus_out, target_fraction_sweep,
    train_model, within_corpus, Aggregate, ModelSpec, ProtocolConfig, SummaryStats, SweepPoint,
    TrainedModel, WITHIN_TRAIN_FRACTION,
};
pub use report::write_sweep_svg;
pub use suite::{
    load_manifest, read_results_csv, run_suite, write_results_csv, ExperimentConfig, ModelKind,
    SuiteResult, SuiteRow,
};

use crate::corpus::{CorpusError, ValenceLabel};
use crate::errors::ModelError;
use crate::features::FeatureError;
use thiserror::Error;

/// Errors from experiment execution.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("prediction/truth length mismatch: {preds} predictions vs {truth} truths")]
    LengthMismatch { preds: usize, truth: usize },
    #[error("empty truth sequence")]
    EmptyTruth,
    #[error("target fraction {fraction} leaves an empty test set (corpus size {n})")]
    EmptyTestSet { fraction: f64, n: usize },
    #[error("target fraction must lie in [0, 1), got {0}")]
    BadTargetFraction(f64),
    #[error("need at least {needed} corpora, got {got}")]
    TooFewCorpora { needed: usize, got: usize },
    #[error("corpus id {0:?} not found among the loaded corpora")]
    MissingCorpus(String),
    #[error("corpus id {0:?} appears more than once")]
    DuplicateCorpus(String),
    #[error("at least one seed is required")]
    NoSeeds,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("malformed results row: {0}")]
    MalformedRow(String),
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Metrics of one model on one test set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    /// Counts; rows index the true class, columns the predicted class
    /// (0 = Negative, 1 = Positive).
    pub confusion: [[usize; 2]; 2],
    /// Fraction of correct predictions.
    pub accuracy: f64,
    /// Unweighted average recall: mean of the two per-class recalls.  A
    /// class absent from the truth contributes recall 1 by convention, so a
    /// perfect predictor still scores 1 on single-class test sets.
    pub uar: f64,
    pub n_test: usize,
    /// Seed of the run that produced the predictions (0 when not applicable).
    pub seed: u64,
}

/// Tally predictions against truth.
pub fn evaluate(
    truth: &[ValenceLabel],
    predictions: &[ValenceLabel],
) -> Result<EvaluationResult, ExperimentError> {
    if truth.is_empty() {
        return Err(ExperimentError::EmptyTruth);
    }
    if predictions.len() != truth.len() {
        return Err(ExperimentError::LengthMismatch {
            preds: predictions.len(),
            truth: truth.len(),
        });
    }
    let mut confusion = [[0usize; 2]; 2];
    for (t, p) in truth.iter().zip(predictions) {
        confusion[t.index()][p.index()] += 1;
    }
    let n = truth.len();
    let correct = confusion[0][0] + confusion[1][1];
    let recall = |class: usize| {
        let total = confusion[class][0] + confusion[class][1];
        if total == 0 {
            1.0
        } else {
            confusion[class][class] as f64 / total as f64
        }
    };
    Ok(EvaluationResult {
        confusion,
        accuracy: correct as f64 / n as f64,
        uar: 0.5 * (recall(0) + recall(1)),
        n_test: n,
        seed: 0,
    })
}

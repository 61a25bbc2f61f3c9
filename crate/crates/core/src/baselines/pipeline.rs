//! Autoencoder feature transfer and the AE+SVM baseline classifier.

use super::sparse_ae::{train_ae, AeConfig};
use super::svm::{train_svm, SvmConfig};
use crate::corpus::{Corpus, Utterance};
use crate::errors::ModelError;
use crate::experiments::{evaluate, EvaluationResult, ExperimentError};
use crate::scalar::Real;

/// Adapt a source corpus toward a target domain: train an autoencoder on the
/// target sample, then replace every source feature vector by its
/// reconstruction.  Utterance ids, labels, and corpus metadata are kept.
pub fn ae_transfer<T: Real>(
    target_sample: &Corpus<T>,
    source: &Corpus<T>,
    cfg: &AeConfig,
) -> Result<Corpus<T>, ModelError> {
    if target_sample.feature_dim() != source.feature_dim() {
        return Err(ModelError::ShapeMismatch {
            context: "transfer corpora",
            expected: source.feature_dim(),
            got: target_sample.feature_dim(),
        });
    }
    let ae = train_ae(target_sample.features_matrix().view(), cfg)?;
    let reconstructed = ae.reconstruct_batch(source.features_matrix().view())?;
    let utterances = source
        .utterances()
        .iter()
        .zip(reconstructed.rows())
        .map(|(u, row)| Utterance {
            id: u.id.clone(),
            features: row.to_owned(),
            label: u.label,
            raw_label: u.raw_label.clone(),
        })
        .collect();
    Ok(Corpus::new(source.id(), source.language(), source.feature_dim(), utterances)
        .expect("source corpus dimensions already validated"))
}

/// The AE+SVM baseline: when a non-empty target sample is given, run the
/// training corpus through [`ae_transfer`] first; then fit a linear SVM and
/// evaluate it on the test corpus.
pub fn baseline_pipeline<T: Real>(
    train: &Corpus<T>,
    test: &Corpus<T>,
    target_sample: Option<&Corpus<T>>,
    ae_cfg: &AeConfig,
    svm_cfg: &SvmConfig,
) -> Result<EvaluationResult, ExperimentError> {
    if test.feature_dim() != train.feature_dim() {
        return Err(ModelError::ShapeMismatch {
            context: "train/test corpora",
            expected: train.feature_dim(),
            got: test.feature_dim(),
        }
        .into());
    }
    let transformed;
    let effective_train = match target_sample {
        Some(sample) if !sample.is_empty() => {
            transformed = ae_transfer(sample, train, ae_cfg)?;
            &transformed
        }
        _ => train,
    };
    let svm = train_svm(
        effective_train.features_matrix().view(),
        &effective_train.labels(),
        svm_cfg,
    )?;
    let predictions = svm.predict_batch(test.features_matrix().view())?;
    evaluate(&test.labels(), &predictions)
}

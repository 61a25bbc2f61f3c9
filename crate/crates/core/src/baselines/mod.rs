//! Transfer-learning baselines: a sparse autoencoder for cross-domain
//! feature transfer and a linear SVM classifier, plus the combined AE+SVM
//! pipeline.

mod pipeline;
mod sparse_ae;
mod svm;

pub use pipeline::{ae_transfer, baseline_pipeline};
pub use sparse_ae::{train_ae, AeConfig, AeRecord, SparseAutoencoder};
pub use svm::{svm_objective, train_svm, train_svm_traced, LinearSvm, SvmConfig, SvmRecord};

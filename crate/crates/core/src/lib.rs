//! Cross-corpus valence recognition toolkit.
//!
//! Binary (negative vs. non-negative) emotional valence classification from
//! speech, built around a deep belief network that is pretrained layer by
//! layer with restricted Boltzmann machines and then fine-tuned with
//! backpropagation.  The crate also carries the comparison baselines (sparse
//! autoencoder transfer and a linear SVM), a frame-level acoustic feature
//! extractor with utterance-level statistics, synthetic corpus generation
//! with controlled domain shift, and the evaluation protocols
//! (within-corpus, cross-corpus, target-fraction sweeps, and
//! leave-one-corpus-out).
//!
//! All numeric code is generic over the scalar type through [`scalar::Real`];
//! the aliases at the crate root fix `f64` as the default precision.  Every
//! random decision flows from explicit `u64` seeds, so identical inputs give
//! byte-identical outputs.

pub mod baselines;
pub mod corpus;
pub mod dbn;
pub mod errors;
pub mod experiments;
pub mod features;
pub mod rbm;
pub mod scalar;
pub mod seeding;

mod util;

pub use errors::{ModelError, EXACT_ENUM_LIMIT};
pub use scalar::Real;

/// Version stamp written into every serialized model file.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Toolkit version reported by the command-line interface.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default-precision RBM.
pub type Rbm = rbm::Rbm<f64>;
/// Single-precision RBM.
pub type Rbm32 = rbm::Rbm<f32>;
/// Default-precision DBN classifier.
pub type DbnClassifier = dbn::DbnClassifier<f64>;
/// Single-precision DBN classifier.
pub type DbnClassifier32 = dbn::DbnClassifier<f32>;
/// Default-precision sparse autoencoder.
pub type SparseAutoencoder = baselines::SparseAutoencoder<f64>;
/// Default-precision linear SVM.
pub type LinearSvm = baselines::LinearSvm<f64>;
/// Default-precision labeled corpus.
pub type Corpus = corpus::Corpus<f64>;
/// Default-precision utterance.
pub type Utterance = corpus::Utterance<f64>;
/// Default-precision decoded audio signal.
pub type AudioSignal = features::AudioSignal<f64>;
/// Default-precision utterance-level feature vector.
pub type FeatureVector = features::FeatureVector<f64>;
/// Default-precision feature standardizer.
pub type Standardizer = features::Standardizer<f64>;
/// Default-precision trained protocol model.
pub type TrainedModel = experiments::TrainedModel<f64>;

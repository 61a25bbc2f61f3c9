//! Acoustic feature extraction: WAV decoding, frame-level descriptors, and
//! fixed-length per-utterance feature vectors, plus the standardizer that
//! maps features into (0, 1) for the sigmoid input layers downstream.
//!
//! The per-utterance vector has [`FEAT_DIM`] = 30 entries with a frozen
//! layout: mean and coefficient of variation for each of the twelve
//! descriptor tracks of [`LldSeries`] (f0 and the harmonicity proxy are
//! aggregated over voiced frames only), followed by six temporal features.
//! [`FEATURE_NAMES`] documents every index.

mod lld;
mod wav;

pub use lld::{
    compute_llds, compute_llds_with, frame_count, LldSeries, DEFAULT_FRAME_LEN_MS,
    DEFAULT_HOP_MS, F0_MAX_HZ, F0_MIN_HZ, HNR_RANGE_DB, MEL_LOG_FLOOR, NUM_LLDS, NUM_MEL_FILTERS,
    NUM_MFCC, VOICING_THRESHOLD,
};
pub use wav::{decode_wav, load_wav, write_wav_pcm16};

use crate::corpus::{Corpus, Utterance};
use crate::scalar::{squash, Real};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

/// Length of every per-utterance feature vector.
pub const FEAT_DIM: usize = 30;

/// Name of each feature-vector entry, by index.
pub const FEATURE_NAMES: [&str; FEAT_DIM] = [
    "f0_mean",
    "f0_cv",
    "rms_energy_mean",
    "rms_energy_cv",
    "zero_crossing_rate_mean",
    "zero_crossing_rate_cv",
    "spectral_centroid_mean",
    "spectral_centroid_cv",
    "spectral_flux_mean",
    "spectral_flux_cv",
    "spectral_slope_mean",
    "spectral_slope_cv",
    "spectral_rolloff85_mean",
    "spectral_rolloff85_cv",
    "hnr_proxy_mean",
    "hnr_proxy_cv",
    "mfcc1_mean",
    "mfcc1_cv",
    "mfcc2_mean",
    "mfcc2_cv",
    "mfcc3_mean",
    "mfcc3_cv",
    "mfcc4_mean",
    "mfcc4_cv",
    "voiced_ratio",
    "voiced_run_mean",
    "voiced_run_std",
    "unvoiced_run_mean",
    "unvoiced_run_std",
    "duration_s",
];

/// Errors from audio decoding, framing, and standardization.
#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("malformed WAV container: {0}")]
    MalformedWav(String),
    #[error("unsupported WAV encoding: format tag {format_tag}, {bits_per_sample} bits per sample (16-bit PCM required)")]
    UnsupportedEncoding { format_tag: u16, bits_per_sample: u16 },
    #[error("expected mono audio, file has {0} channels")]
    NotMono(u16),
    #[error("sample rate {0} Hz is below the 8000 Hz minimum")]
    SampleRateTooLow(u32),
    #[error("audio signal must be non-empty")]
    EmptySignal,
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("signal has {samples} samples, shorter than one {frame_len}-sample frame")]
    SignalTooShort { samples: usize, frame_len: usize },
    #[error("invalid framing: {0}")]
    InvalidFraming(String),
    #[error("standardizer needs a non-empty training set")]
    EmptyFeatureSet,
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("malformed standardizer file: {0}")]
    MalformedFile(String),
    #[error("unsupported format version: expected {expected}, got {got}")]
    VersionMismatch { expected: u32, got: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A mono audio clip: samples in [-1, 1] at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal<T: Real> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Real> AudioSignal<T> {
    /// Wrap raw samples, requiring a non-empty, finite signal at 8 kHz or
    /// above.
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self, FeatureError> {
        if samples.is_empty() {
            return Err(FeatureError::EmptySignal);
        }
        if sample_rate < 8000 {
            return Err(FeatureError::SampleRateTooLow(sample_rate));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(FeatureError::NonFiniteSample(i));
        }
        Ok(AudioSignal { samples, sample_rate })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Fixed-length utterance descriptor; see [`FEATURE_NAMES`] for the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T: Real> {
    values: Array1<T>,
}

impl<T: Real> FeatureVector<T> {
    /// Wrap a value vector, requiring exactly [`FEAT_DIM`] finite entries.
    pub fn new(values: Array1<T>) -> Result<Self, FeatureError> {
        if values.len() != FEAT_DIM {
            return Err(FeatureError::DimMismatch { expected: FEAT_DIM, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFiniteSample(i));
        }
        Ok(FeatureVector { values })
    }

    pub fn values(&self) -> &Array1<T> {
        &self.values
    }

    pub fn into_values(self) -> Array1<T> {
        self.values
    }
}

/// Mean and population standard deviation of a track; both 0 when empty.
fn mean_std<T: Real>(xs: impl Iterator<Item = T> + Clone) -> (T, T) {
    let n = xs.clone().count();
    if n == 0 {
        return (T::zero(), T::zero());
    }
    let count = T::cast(n as f64);
    let mean = xs.clone().sum::<T>() / count;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<T>() / count;
    (mean, var.sqrt())
}

/// Coefficient of variation stddev/|mean|, 0 when the mean is (near) zero.
fn coefficient_of_variation<T: Real>(mean: T, std: T) -> T {
    if mean.abs() < T::cast(1e-12) {
        T::zero()
    } else {
        std / mean.abs()
    }
}

/// Mean and population stddev of the lengths of maximal `value`-runs in
/// `mask`; (0, 0) when no such run exists.
fn run_length_stats<T: Real>(mask: &[bool], value: bool) -> (T, T) {
    let mut runs: Vec<T> = Vec::new();
    let mut current = 0usize;
    for &m in mask {
        if m == value {
            current += 1;
        } else if current > 0 {
            runs.push(T::cast(current as f64));
            current = 0;
        }
    }
    if current > 0 {
        runs.push(T::cast(current as f64));
    }
    mean_std(runs.into_iter())
}

/// Extract the 30-dimensional utterance descriptor with default framing.
pub fn extract_features<T: Real>(
    signal: &AudioSignal<T>,
) -> Result<FeatureVector<T>, FeatureError> {
    let series = compute_llds(signal)?;
    let mut values = Array1::zeros(FEAT_DIM);

    // Tracks aggregated over voiced frames only.
    let voiced_only = |name: &str| name == "f0" || name == "hnr_proxy";
    for (i, (name, track)) in series.tracks().iter().enumerate() {
        let (mean, std) = if voiced_only(name) {
            mean_std(
                track
                    .iter()
                    .zip(&series.voiced)
                    .filter(|(_, &v)| v)
                    .map(|(&x, _)| x),
            )
        } else {
            mean_std(track.iter().cloned())
        };
        values[2 * i] = mean;
        values[2 * i + 1] = coefficient_of_variation(mean, std);
    }

    let frames = series.num_frames();
    let voiced_frames = series.voiced.iter().filter(|&&v| v).count();
    values[24] = T::cast(voiced_frames as f64 / frames as f64);
    let (v_mean, v_std) = run_length_stats(&series.voiced, true);
    values[25] = v_mean;
    values[26] = v_std;
    let (u_mean, u_std) = run_length_stats(&series.voiced, false);
    values[27] = u_mean;
    values[28] = u_std;
    values[29] = T::cast(signal.duration_seconds());

    FeatureVector::new(values)
}

/// Per-dimension z-scoring fitted on a training set, composed with a
/// logistic squash so standardized features lie strictly in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<T: Real> {
    mean: Array1<T>,
    std: Array1<T>,
}

impl<T: Real> Standardizer<T> {
    /// Fit on a non-empty sample matrix (rows = observations).  Dimensions
    /// with zero variance get a standard deviation of 1 so apply stays
    /// well-defined.
    pub fn fit(data: ArrayView2<T>) -> Result<Self, FeatureError> {
        if data.nrows() == 0 {
            return Err(FeatureError::EmptyFeatureSet);
        }
        let n = T::cast(data.nrows() as f64);
        let mean = data.sum_axis(Axis(0)) / n;
        let mut std = Array1::zeros(data.ncols());
        for (j, s) in std.iter_mut().enumerate() {
            let var = data
                .column(j)
                .iter()
                .map(|&x| (x - mean[j]) * (x - mean[j]))
                .sum::<T>()
                / n;
            let sd = var.sqrt();
            *s = if sd < T::cast(1e-12) { T::one() } else { sd };
        }
        Ok(Standardizer { mean, std })
    }

    /// Fit on a set of extracted feature vectors.
    pub fn fit_features(train: &[FeatureVector<T>]) -> Result<Self, FeatureError> {
        if train.is_empty() {
            return Err(FeatureError::EmptyFeatureSet);
        }
        let mut data = Array2::zeros((train.len(), FEAT_DIM));
        for (mut row, fv) in data.rows_mut().into_iter().zip(train) {
            row.assign(fv.values());
        }
        Self::fit(data.view())
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Array1<T> {
        &self.mean
    }

    pub fn stddev(&self) -> &Array1<T> {
        &self.std
    }

    /// z-score then squash one vector into (0, 1).
    pub fn apply(&self, v: ArrayView1<T>) -> Result<Array1<T>, FeatureError> {
        if v.len() != self.dim() {
            return Err(FeatureError::DimMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(Array1::from_shape_fn(v.len(), |j| {
            squash((v[j] - self.mean[j]) / self.std[j])
        }))
    }

    /// Row-wise [`apply`](Self::apply).
    pub fn apply_matrix(&self, data: ArrayView2<T>) -> Result<Array2<T>, FeatureError> {
        if data.ncols() != self.dim() {
            return Err(FeatureError::DimMismatch { expected: self.dim(), got: data.ncols() });
        }
        Ok(Array2::from_shape_fn(data.dim(), |(i, j)| {
            squash((data[(i, j)] - self.mean[j]) / self.std[j])
        }))
    }

    /// Standardize every utterance of a corpus, keeping ids and labels.
    pub fn apply_corpus(&self, corpus: &Corpus<T>) -> Result<Corpus<T>, FeatureError> {
        let utterances = corpus
            .utterances()
            .iter()
            .map(|u| {
                Ok(Utterance {
                    id: u.id.clone(),
                    features: self.apply(u.features.view())?,
                    label: u.label,
                    raw_label: u.raw_label.clone(),
                })
            })
            .collect::<Result<Vec<_>, FeatureError>>()?;
        Ok(
            Corpus::new(corpus.id(), corpus.language(), corpus.feature_dim(), utterances)
                .expect("standardization preserves dimensions"),
        )
    }

    /// Serialize to a versioned `.std.json` file.
    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        let record = StandardizerRecord {
            version: crate::MODEL_FORMAT_VERSION,
            mean: self.mean.to_vec(),
            std: self.std.to_vec(),
        };
        let text = serde_json::to_string_pretty(&record)
            .map_err(|e| FeatureError::MalformedFile(e.to_string()))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let text = fs::read_to_string(path)?;
        let record: StandardizerRecord<T> = serde_json::from_str(&text)
            .map_err(|e| FeatureError::MalformedFile(e.to_string()))?;
        if record.version != crate::MODEL_FORMAT_VERSION {
            return Err(FeatureError::VersionMismatch {
                expected: crate::MODEL_FORMAT_VERSION,
                got: record.version,
            });
        }
        if record.mean.len() != record.std.len() || record.mean.is_empty() {
            return Err(FeatureError::MalformedFile(
                "mean and stddev must be non-empty and equally long".into(),
            ));
        }
        Ok(Standardizer {
            mean: Array1::from_vec(record.mean),
            std: Array1::from_vec(record.std),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct StandardizerRecord<T> {
    version: u32,
    mean: Vec<T>,
    std: Vec<T>,
}

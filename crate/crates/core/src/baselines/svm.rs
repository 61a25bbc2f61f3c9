//! Linear support vector machine trained with the Pegasos solver.
//!
//! Primal objective with an unregularized bias:
//!
//! ```text
//! J(w, b) = (lambda/2) ||w||^2 + (1/n) sum_i max(0, 1 - y_i (w.x_i + b))
//! ```
//!
//! with `lambda = 1 / (C n)` and labels `y in {-1, +1}` (negative valence is
//! -1, positive +1).  Each epoch visits all n examples in a fresh shuffled
//! order; at step t the learning rate is `1/(lambda t)`, the weights decay by
//! `(1 - eta lambda)`, margin violators add `eta y x`, and the weight vector
//! is projected onto the ball of radius `1/sqrt(lambda)`.  The model returned
//! is the average of the per-step iterates, which converges more smoothly
//! than the final iterate.

use crate::corpus::ValenceLabel;
use crate::errors::ModelError;
use crate::scalar::Real;
use crate::seeding::rng_from_seed;
use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// Pegasos training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    /// Soft-margin cost; the regularizer is `lambda = 1 / (c * n)`.
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { c: 1.0, epochs: 100, seed: 0 }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(ModelError::InvalidConfig(format!(
                "c must be finite and > 0, got {}",
                self.c
            )));
        }
        if self.epochs == 0 {
            return Err(ModelError::InvalidConfig("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Trained linear decision function `sign(w.x + bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm<T: Real> {
    pub w: Array1<T>,
    pub bias: T,
    pub c: f64,
}

impl<T: Real> LinearSvm<T> {
    pub fn input_dim(&self) -> usize {
        self.w.len()
    }

    /// Signed distance-like score `w.x + bias`.
    pub fn score(&self, x: ArrayView1<T>) -> Result<T, ModelError> {
        if x.len() != self.w.len() {
            return Err(ModelError::ShapeMismatch {
                context: "svm input",
                expected: self.w.len(),
                got: x.len(),
            });
        }
        Ok(self.w.dot(&x) + self.bias)
    }

    /// Positive score maps to positive valence; zero breaks toward negative.
    pub fn predict(&self, x: ArrayView1<T>) -> Result<ValenceLabel, ModelError> {
        Ok(if self.score(x)? > T::zero() {
            ValenceLabel::Positive
        } else {
            ValenceLabel::Negative
        })
    }

    pub fn predict_batch(&self, x: ArrayView2<T>) -> Result<Vec<ValenceLabel>, ModelError> {
        x.rows().into_iter().map(|row| self.predict(row)).collect()
    }

    /// Serialize to a versioned `.svm.json` file.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let text = serde_json::to_string_pretty(&self.to_record())
            .map_err(|e| ModelError::MalformedFile(e.to_string()))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path)?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ModelError::MalformedFile(e.to_string()))?;
        let version = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ModelError::MalformedFile("missing version field".into()))?;
        if version != u64::from(crate::MODEL_FORMAT_VERSION) {
            return Err(ModelError::VersionMismatch {
                expected: crate::MODEL_FORMAT_VERSION,
                got: version as u32,
            });
        }
        let rec: SvmRecord<T> = serde_json::from_value(value)
            .map_err(|e| ModelError::MalformedFile(e.to_string()))?;
        Self::from_record(rec)
    }

    pub fn to_record(&self) -> SvmRecord<T> {
        SvmRecord {
            version: crate::MODEL_FORMAT_VERSION,
            w: self.w.to_vec(),
            bias: self.bias,
            c: self.c,
        }
    }

    pub fn from_record(rec: SvmRecord<T>) -> Result<Self, ModelError> {
        if rec.version != crate::MODEL_FORMAT_VERSION {
            return Err(ModelError::VersionMismatch {
                expected: crate::MODEL_FORMAT_VERSION,
                got: rec.version,
            });
        }
        if rec.w.is_empty() {
            return Err(ModelError::MalformedFile("empty weight vector".into()));
        }
        Ok(LinearSvm { w: Array1::from_vec(rec.w), bias: rec.bias, c: rec.c })
    }
}

/// On-disk form of the linear SVM.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmRecord<T> {
    pub version: u32,
    pub w: Vec<T>,
    pub bias: T,
    pub c: f64,
}

fn signed_label(label: ValenceLabel) -> f64 {
    match label {
        ValenceLabel::Negative => -1.0,
        ValenceLabel::Positive => 1.0,
    }
}

/// Primal objective of `model` on `(data, labels)`.
pub fn svm_objective<T: Real>(
    model: &LinearSvm<T>,
    data: ArrayView2<T>,
    labels: &[ValenceLabel],
) -> Result<f64, ModelError> {
    if data.nrows() == 0 {
        return Err(ModelError::EmptyBatch);
    }
    if data.nrows() != labels.len() {
        return Err(ModelError::ShapeMismatch {
            context: "svm labels",
            expected: data.nrows(),
            got: labels.len(),
        });
    }
    let n = data.nrows() as f64;
    let lambda = 1.0 / (model.c * n);
    let norm_sq: f64 = model.w.iter().map(|w| w.as_f64().powi(2)).sum();
    let mut hinge = 0.0;
    for (row, &label) in data.rows().into_iter().zip(labels) {
        let margin = signed_label(label) * model.score(row)?.as_f64();
        hinge += (1.0 - margin).max(0.0);
    }
    Ok(0.5 * lambda * norm_sq + hinge / n)
}

/// Train a linear SVM and also report the primal objective of the averaged
/// iterate after every epoch (`objectives.len() == epochs`).
pub fn train_svm_traced<T: Real>(
    data: ArrayView2<T>,
    labels: &[ValenceLabel],
    cfg: &SvmConfig,
) -> Result<(LinearSvm<T>, Vec<f64>), ModelError> {
    cfg.validate()?;
    let n = data.nrows();
    if n == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    if n != labels.len() {
        return Err(ModelError::ShapeMismatch {
            context: "svm labels",
            expected: n,
            got: labels.len(),
        });
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(ModelError::SingleClassData);
    }

    let dim = data.ncols();
    let lambda = 1.0 / (cfg.c * n as f64);
    let radius = 1.0 / lambda.sqrt();
    let mut rng = rng_from_seed(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();

    let mut w = Array1::<f64>::zeros(dim);
    let mut bias = 0.0f64;
    let mut w_sum = Array1::<f64>::zeros(dim);
    let mut bias_sum = 0.0f64;
    let mut t = 0u64;
    let mut objectives = Vec::with_capacity(cfg.epochs);

    let averaged = |w_sum: &Array1<f64>, bias_sum: f64, t: u64| LinearSvm::<T> {
        w: w_sum.mapv(|x| T::cast(x / t as f64)),
        bias: T::cast(bias_sum / t as f64),
        c: cfg.c,
    };

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = data.row(i);
            let y = signed_label(labels[i]);
            let margin = y * (w.iter().zip(x.iter()).map(|(wj, xj)| wj * xj.as_f64()).sum::<f64>() + bias);

            w *= 1.0 - eta * lambda;
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(x.iter()) {
                    *wj += eta * y * xj.as_f64();
                }
                bias += eta * y;
            }
            let norm = w.dot(&w).sqrt();
            if norm > radius {
                w *= radius / norm;
            }

            w_sum += &w;
            bias_sum += bias;
        }
        let snapshot = averaged(&w_sum, bias_sum, t);
        objectives.push(svm_objective(&snapshot, data, labels)?);
    }

    Ok((averaged(&w_sum, bias_sum, t), objectives))
}

/// Train a linear SVM with the Pegasos solver (averaged iterate).
pub fn train_svm<T: Real>(
    data: ArrayView2<T>,
    labels: &[ValenceLabel],
    cfg: &SvmConfig,
) -> Result<LinearSvm<T>, ModelError> {
    Ok(train_svm_traced(data, labels, cfg)?.0)
}

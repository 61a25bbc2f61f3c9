//! Single-layer sparse autoencoder for feature transfer.
//!
//! Sigmoid encoder and decoder trained by full-batch gradient descent on
//!
//! ```text
//! L = (1/2n) sum_i ||x_hat_i - x_i||^2
//!   + beta * sum_j KL(rho || rho_hat_j)
//!   + (lambda/2) * (||W_enc||_F^2 + ||W_dec||_F^2)
//! ```
//!
//! where `rho_hat_j` is hidden unit j's mean activation over the batch and
//! `KL(p||q) = p ln(p/q) + (1-p) ln((1-p)/(1-q))`.  Weight decay covers both
//! weight matrices, never the biases.

use crate::errors::ModelError;
use crate::scalar::{sigmoid, Real};
use crate::seeding::rng_from_seed;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// Sparse autoencoder hyperparameters and training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeConfig {
    pub hidden_size: usize,
    /// Target mean activation rho for every hidden unit.
    pub sparsity_target: f64,
    /// Weight beta of the KL sparsity penalty.
    pub sparsity_weight: f64,
    /// L2 penalty lambda on both weight matrices.
    pub weight_decay: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for AeConfig {
    fn default() -> Self {
        AeConfig {
            hidden_size: 128,
            sparsity_target: 0.05,
            sparsity_weight: 3.0,
            weight_decay: 1e-4,
            learning_rate: 0.5,
            epochs: 200,
            seed: 0,
        }
    }
}

impl AeConfig {
    /// `epochs == 0` and `learning_rate == 0` are permitted no-ops.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden_size == 0 {
            return Err(ModelError::InvalidConfig("hidden_size must be >= 1".into()));
        }
        if !(self.sparsity_target > 0.0 && self.sparsity_target < 1.0) {
            return Err(ModelError::InvalidConfig(format!(
                "sparsity_target must lie in (0, 1), got {}",
                self.sparsity_target
            )));
        }
        if !(self.sparsity_weight >= 0.0) || !self.sparsity_weight.is_finite() {
            return Err(ModelError::InvalidConfig(format!(
                "sparsity_weight must be finite and >= 0, got {}",
                self.sparsity_weight
            )));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(ModelError::InvalidConfig(format!(
                "weight_decay must be finite and >= 0, got {}",
                self.weight_decay
            )));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(ModelError::InvalidConfig(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Trained encoder/decoder parameters plus the settings that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAutoencoder<T: Real> {
    /// H x D.
    pub w_enc: Array2<T>,
    pub b_enc: Array1<T>,
    /// D x H.
    pub w_dec: Array2<T>,
    pub b_dec: Array1<T>,
    pub config: AeConfig,
}

impl<T: Real> SparseAutoencoder<T> {
    pub fn input_dim(&self) -> usize {
        self.w_enc.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_enc.nrows()
    }

    /// Zero parameters: every reconstruction is the constant 0.5 vector.
    pub fn zeros(input_dim: usize, config: AeConfig) -> Self {
        let h = config.hidden_size;
        SparseAutoencoder {
            w_enc: Array2::zeros((h, input_dim)),
            b_enc: Array1::zeros(h),
            w_dec: Array2::zeros((input_dim, h)),
            b_dec: Array1::zeros(input_dim),
            config,
        }
    }

    /// Small random weights (N(0, 0.01^2), encoder then decoder, row by
    /// row), zero biases.  This is the state training starts from.
    pub fn init_random(input_dim: usize, config: AeConfig) -> Self {
        let mut ae = Self::zeros(input_dim, config);
        let mut rng = rng_from_seed(ae.config.seed);
        let scale = T::cast(0.01);
        for w in ae.w_enc.iter_mut() {
            *w = T::standard_normal(&mut rng) * scale;
        }
        for w in ae.w_dec.iter_mut() {
            *w = T::standard_normal(&mut rng) * scale;
        }
        ae
    }

    fn check_dim(&self, len: usize) -> Result<(), ModelError> {
        if len != self.input_dim() {
            return Err(ModelError::ShapeMismatch {
                context: "autoencoder input",
                expected: self.input_dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Hidden activations for a batch (B x D -> B x H).
    pub fn encode_batch(&self, x: ArrayView2<T>) -> Result<Array2<T>, ModelError> {
        self.check_dim(x.ncols())?;
        let mut a = x.dot(&self.w_enc.t()) + &self.b_enc;
        a.mapv_inplace(sigmoid);
        Ok(a)
    }

    /// Decode hidden activations (B x H -> B x D), entries in (0, 1).
    pub fn decode_batch(&self, a: ArrayView2<T>) -> Result<Array2<T>, ModelError> {
        if a.ncols() != self.hidden_dim() {
            return Err(ModelError::ShapeMismatch {
                context: "autoencoder hidden",
                expected: self.hidden_dim(),
                got: a.ncols(),
            });
        }
        let mut x = a.dot(&self.w_dec.t()) + &self.b_dec;
        x.mapv_inplace(sigmoid);
        Ok(x)
    }

    /// decode(encode(v)).
    pub fn reconstruct(&self, v: ArrayView1<T>) -> Result<Array1<T>, ModelError> {
        let batch = v.insert_axis(Axis(0));
        Ok(self.reconstruct_batch(batch)?.row(0).to_owned())
    }

    /// Row-wise reconstruction of a batch.
    pub fn reconstruct_batch(&self, x: ArrayView2<T>) -> Result<Array2<T>, ModelError> {
        let a = self.encode_batch(x)?;
        self.decode_batch(a.view())
    }

    /// Mean squared error per element: sum of squared residuals over n * D.
    pub fn mean_reconstruction_error(&self, x: ArrayView2<T>) -> Result<f64, ModelError> {
        if x.nrows() == 0 {
            return Err(ModelError::EmptyBatch);
        }
        let xh = self.reconstruct_batch(x)?;
        let mut total = 0.0;
        for (got, want) in xh.iter().zip(x.iter()) {
            let r = (*got - *want).as_f64();
            total += r * r;
        }
        Ok(total / (x.nrows() * x.ncols()) as f64)
    }

    /// Full training objective at the current parameters.
    pub fn objective(&self, x: ArrayView2<T>) -> Result<f64, ModelError> {
        if x.nrows() == 0 {
            return Err(ModelError::EmptyBatch);
        }
        let a = self.encode_batch(x)?;
        let xh = self.decode_batch(a.view())?;
        let n = x.nrows() as f64;

        let mut recon = 0.0;
        for (got, want) in xh.iter().zip(x.iter()) {
            let r = (*got - *want).as_f64();
            recon += r * r;
        }
        recon /= 2.0 * n;

        let rho = self.config.sparsity_target;
        let mut kl = 0.0;
        for j in 0..self.hidden_dim() {
            let rho_hat = clamp_unit(a.column(j).sum().as_f64() / n);
            kl += rho * (rho / rho_hat).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - rho_hat)).ln();
        }

        let sq = |m: &Array2<T>| m.iter().map(|w| w.as_f64().powi(2)).sum::<f64>();
        let decay = 0.5 * self.config.weight_decay * (sq(&self.w_enc) + sq(&self.w_dec));

        Ok(recon + self.config.sparsity_weight * kl + decay)
    }

    /// Serialize to a versioned `.ae.json` file.
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
        let rec: AeRecord<T> = serde_json::from_value(value)
            .map_err(|e| ModelError::MalformedFile(e.to_string()))?;
        Self::from_record(rec)
    }

    pub fn to_record(&self) -> AeRecord<T> {
        AeRecord {
            version: crate::MODEL_FORMAT_VERSION,
            input_dim: self.input_dim(),
            hidden_dim: self.hidden_dim(),
            w_enc: self.w_enc.iter().cloned().collect(),
            b_enc: self.b_enc.to_vec(),
            w_dec: self.w_dec.iter().cloned().collect(),
            b_dec: self.b_dec.to_vec(),
            config: self.config.clone(),
        }
    }

    pub fn from_record(rec: AeRecord<T>) -> Result<Self, ModelError> {
        if rec.version != crate::MODEL_FORMAT_VERSION {
            return Err(ModelError::VersionMismatch {
                expected: crate::MODEL_FORMAT_VERSION,
                got: rec.version,
            });
        }
        let (d, h) = (rec.input_dim, rec.hidden_dim);
        if rec.w_enc.len() != h * d || rec.w_dec.len() != d * h {
            return Err(ModelError::ShapeMismatch {
                context: "AeRecord weights",
                expected: h * d,
                got: rec.w_enc.len().min(rec.w_dec.len()),
            });
        }
        if rec.b_enc.len() != h || rec.b_dec.len() != d {
            return Err(ModelError::ShapeMismatch {
                context: "AeRecord biases",
                expected: h,
                got: rec.b_enc.len(),
            });
        }
        Ok(SparseAutoencoder {
            w_enc: Array2::from_shape_vec((h, d), rec.w_enc).expect("length checked"),
            b_enc: Array1::from_vec(rec.b_enc),
            w_dec: Array2::from_shape_vec((d, h), rec.w_dec).expect("length checked"),
            b_dec: Array1::from_vec(rec.b_dec),
            config: rec.config,
        })
    }
}

/// On-disk form of the autoencoder (weights row-major).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AeRecord<T> {
    pub version: u32,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_enc: Vec<T>,
    pub b_enc: Vec<T>,
    pub w_dec: Vec<T>,
    pub b_dec: Vec<T>,
    pub config: AeConfig,
}

fn clamp_unit(p: f64) -> f64 {
    p.clamp(1e-12, 1.0 - 1e-12)
}

/// One full-batch gradient descent step on the objective.
fn step<T: Real>(ae: &mut SparseAutoencoder<T>, x: ArrayView2<T>, lr: T) -> Result<(), ModelError> {
    let n = T::cast(x.nrows() as f64);
    let a = ae.encode_batch(x)?;
    let xh = ae.decode_batch(a.view())?;

    // Reconstruction term: d/dz_dec = ((xh - x)/n) * xh (1 - xh).
    let mut d_dec = &xh - &x;
    d_dec.zip_mut_with(&xh, |d, &o| *d = *d / n * o * (T::one() - o));

    let lambda = T::cast(ae.config.weight_decay);
    let g_w_dec = d_dec.t().dot(&a) + &ae.w_dec.mapv(|w| w * lambda);
    let g_b_dec = d_dec.sum_axis(Axis(0));

    // Back through the decoder weights plus the sparsity penalty.
    let mut d_hidden = d_dec.dot(&ae.w_dec);
    let rho = ae.config.sparsity_target;
    let beta = ae.config.sparsity_weight;
    let rho_hat = a.sum_axis(Axis(0)).mapv(|s| clamp_unit(s.as_f64() / n.as_f64()));
    let sparsity_grad: Vec<T> = rho_hat
        .iter()
        .map(|&rh| T::cast(beta * (-rho / rh + (1.0 - rho) / (1.0 - rh)) / n.as_f64()))
        .collect();
    for mut row in d_hidden.rows_mut() {
        for (j, g) in row.iter_mut().enumerate() {
            *g += sparsity_grad[j];
        }
    }
    let mut d_enc = d_hidden;
    d_enc.zip_mut_with(&a, |d, &h| *d = *d * h * (T::one() - h));

    let g_w_enc = d_enc.t().dot(&x) + &ae.w_enc.mapv(|w| w * lambda);
    let g_b_enc = d_enc.sum_axis(Axis(0));

    ae.w_enc.scaled_add(-lr, &g_w_enc);
    ae.b_enc.scaled_add(-lr, &g_b_enc);
    ae.w_dec.scaled_add(-lr, &g_w_dec);
    ae.b_dec.scaled_add(-lr, &g_b_dec);
    Ok(())
}

/// Train a sparse autoencoder by full-batch gradient descent.
///
/// Data entries must be finite and lie in [0, 1] (the decoder is sigmoid, so
/// targets outside the unit interval are unreachable).  `epochs == 0` skips
/// training entirely and returns the zero-parameter autoencoder, whose
/// reconstructions are the constant 0.5 vector; actual training starts from
/// small random weights so hidden units differentiate.
pub fn train_ae<T: Real>(
    data: ArrayView2<T>,
    cfg: &AeConfig,
) -> Result<SparseAutoencoder<T>, ModelError> {
    cfg.validate()?;
    if data.nrows() == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    if data.iter().any(|&x| x < T::zero() || x > T::one() || !x.is_finite()) {
        return Err(ModelError::DataOutOfRange);
    }
    if cfg.epochs == 0 {
        return Ok(SparseAutoencoder::zeros(data.ncols(), cfg.clone()));
    }
    let mut ae = SparseAutoencoder::init_random(data.ncols(), cfg.clone());
    let lr = T::cast(cfg.learning_rate);
    for _ in 0..cfg.epochs {
        step(&mut ae, data, lr)?;
    }
    Ok(ae)
}

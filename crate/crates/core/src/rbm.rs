//! Restricted Boltzmann machine with binary units.
//!
//! The joint energy of a visible vector `v` (length D) and hidden vector `h`
//! (length K) is
//!
//! ```text
//! E(v, h) = -sum_ij W[i][j] v[i] h[j] - sum_i b_v[i] v[i] - sum_j b_h[j] h[j]
//! ```
//!
//! and the model assigns `P(v, h) = exp(-E(v, h)) / Z`.  Both conditionals
//! factorize over units:
//!
//! ```text
//! P(h[j] = 1 | v) = g(b_h[j] + sum_i v[i] W[i][j])
//! P(v[i] = 1 | h) = g(b_v[i] + sum_j h[j] W[i][j])
//! ```
//!
//! with `g` the logistic function.  For small models the partition function is
//! computed exactly by enumerating visible states, which gives an oracle for
//! log-likelihood and its gradient; training uses contrastive divergence.

use crate::errors::{ModelError, EXACT_ENUM_LIMIT};
use crate::scalar::{sigmoid, softplus, Real};
use crate::seeding::rng_from_seed;
use crate::util::{gather_rows, logsumexp};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Binary-binary RBM parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Rbm<T: Real> {
    /// Weights, one row per visible unit, one column per hidden unit (D x K).
    pub w: Array2<T>,
    /// Visible biases (length D).
    pub b_v: Array1<T>,
    /// Hidden biases (length K).
    pub b_h: Array1<T>,
}

/// Contrastive-divergence training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CdConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Number of Gibbs steps per gradient estimate.
    pub cd_k: usize,
    pub momentum: f64,
    /// L2 penalty applied to the weight matrix only, not to biases.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for CdConfig {
    fn default() -> Self {
        CdConfig {
            learning_rate: 1e-3,
            epochs: 500,
            batch_size: 64,
            cd_k: 1,
            momentum: 0.5,
            weight_decay: 2e-4,
            seed: 0,
        }
    }
}

impl CdConfig {
    /// Check the settings for values that can never make sense.
    ///
    /// `epochs == 0` and `learning_rate == 0` are permitted: both reduce
    /// training to a no-op, which is useful for producing a reproducible
    /// random initialization.
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(ModelError::InvalidConfig(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(ModelError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.cd_k == 0 {
            return Err(ModelError::InvalidConfig("cd_k must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(ModelError::InvalidConfig(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(ModelError::InvalidConfig(format!(
                "weight_decay must be finite and >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Momentum velocities carried between contrastive-divergence updates.
#[derive(Debug, Clone)]
pub struct CdState<T: Real> {
    pub vel_w: Array2<T>,
    pub vel_b_v: Array1<T>,
    pub vel_b_h: Array1<T>,
}

impl<T: Real> CdState<T> {
    pub fn zeros(d: usize, k: usize) -> Self {
        CdState {
            vel_w: Array2::zeros((d, k)),
            vel_b_v: Array1::zeros(d),
            vel_b_h: Array1::zeros(k),
        }
    }
}

/// Parameter update produced by one contrastive-divergence step.
#[derive(Debug, Clone)]
pub struct CdDelta<T: Real> {
    pub d_w: Array2<T>,
    pub d_b_v: Array1<T>,
    pub d_b_h: Array1<T>,
}

impl<T: Real> Rbm<T> {
    /// Number of visible units.
    pub fn num_visible(&self) -> usize {
        self.w.nrows()
    }

    /// Number of hidden units.
    pub fn num_hidden(&self) -> usize {
        self.w.ncols()
    }

    /// Build an RBM from explicit parameters, checking that shapes agree.
    pub fn new(w: Array2<T>, b_v: Array1<T>, b_h: Array1<T>) -> Result<Self, ModelError> {
        if b_v.len() != w.nrows() {
            return Err(ModelError::ShapeMismatch {
                context: "Rbm::new visible bias",
                expected: w.nrows(),
                got: b_v.len(),
            });
        }
        if b_h.len() != w.ncols() {
            return Err(ModelError::ShapeMismatch {
                context: "Rbm::new hidden bias",
                expected: w.ncols(),
                got: b_h.len(),
            });
        }
        Ok(Rbm { w, b_v, b_h })
    }

    /// Small random weights (N(0, 0.01^2), drawn row by row) and zero biases.
    ///
    /// This is exactly the state `train_rbm` starts from, so training with
    /// `epochs == 0` returns this initialization unchanged.
    pub fn init_random(d: usize, k: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let scale = T::cast(0.01);
        let mut w = Array2::zeros((d, k));
        for i in 0..d {
            for j in 0..k {
                w[(i, j)] = T::standard_normal(&mut rng) * scale;
            }
        }
        Rbm {
            w,
            b_v: Array1::zeros(d),
            b_h: Array1::zeros(k),
        }
    }

    fn check_visible(&self, len: usize, context: &'static str) -> Result<(), ModelError> {
        if len != self.num_visible() {
            return Err(ModelError::ShapeMismatch {
                context,
                expected: self.num_visible(),
                got: len,
            });
        }
        Ok(())
    }

    fn check_hidden(&self, len: usize, context: &'static str) -> Result<(), ModelError> {
        if len != self.num_hidden() {
            return Err(ModelError::ShapeMismatch {
                context,
                expected: self.num_hidden(),
                got: len,
            });
        }
        Ok(())
    }

    /// Joint energy of a visible/hidden configuration.
    pub fn energy(&self, v: ArrayView1<T>, h: ArrayView1<T>) -> Result<T, ModelError> {
        self.check_visible(v.len(), "energy visible")?;
        self.check_hidden(h.len(), "energy hidden")?;
        let interaction = v.dot(&self.w).dot(&h);
        Ok(-(interaction + self.b_v.dot(&v) + self.b_h.dot(&h)))
    }

    /// `P(h[j] = 1 | v)` for every hidden unit.
    pub fn hidden_prob(&self, v: ArrayView1<T>) -> Result<Array1<T>, ModelError> {
        self.check_visible(v.len(), "hidden_prob")?;
        let mut act = v.dot(&self.w) + &self.b_h;
        act.mapv_inplace(sigmoid);
        Ok(act)
    }

    /// `P(v[i] = 1 | h)` for every visible unit.
    pub fn visible_prob(&self, h: ArrayView1<T>) -> Result<Array1<T>, ModelError> {
        self.check_hidden(h.len(), "visible_prob")?;
        let mut act = self.w.dot(&h) + &self.b_v;
        act.mapv_inplace(sigmoid);
        Ok(act)
    }

    /// Row-wise [`Rbm::hidden_prob`] over a batch (B x D -> B x K).
    pub fn hidden_prob_batch(&self, v: ArrayView2<T>) -> Result<Array2<T>, ModelError> {
        self.check_visible(v.ncols(), "hidden_prob_batch")?;
        let mut act = v.dot(&self.w) + &self.b_h;
        act.mapv_inplace(sigmoid);
        Ok(act)
    }

    /// Row-wise [`Rbm::visible_prob`] over a batch (B x K -> B x D).
    pub fn visible_prob_batch(&self, h: ArrayView2<T>) -> Result<Array2<T>, ModelError> {
        self.check_hidden(h.ncols(), "visible_prob_batch")?;
        let mut act = h.dot(&self.w.t()) + &self.b_v;
        act.mapv_inplace(sigmoid);
        Ok(act)
    }

    /// Draw a binary hidden vector from `P(h | v)`.
    ///
    /// Consumes exactly K uniform variates, one per unit in index order.
    pub fn sample_hidden<R: Rng + ?Sized>(
        &self,
        v: ArrayView1<T>,
        rng: &mut R,
    ) -> Result<Array1<T>, ModelError> {
        let p = self.hidden_prob(v)?;
        Ok(sample_bernoulli(&p, rng))
    }

    /// Draw a binary visible vector from `P(v | h)`.
    pub fn sample_visible<R: Rng + ?Sized>(
        &self,
        h: ArrayView1<T>,
        rng: &mut R,
    ) -> Result<Array1<T>, ModelError> {
        let p = self.visible_prob(h)?;
        Ok(sample_bernoulli(&p, rng))
    }

    /// Free energy `F(v) = -b_v . v - sum_j softplus(b_h[j] + (W^T v)[j])`,
    /// so that `exp(-F(v)) = sum_h exp(-E(v, h))`.
    pub fn free_energy(&self, v: ArrayView1<T>) -> Result<T, ModelError> {
        self.check_visible(v.len(), "free_energy")?;
        let act = v.dot(&self.w) + &self.b_h;
        let hidden_term: T = act.iter().map(|&a| softplus(a)).sum();
        Ok(-self.b_v.dot(&v) - hidden_term)
    }

    /// Log partition function by enumerating all 2^D visible states.
    fn exact_log_z(&self) -> Result<T, ModelError> {
        let d = self.num_visible();
        let k = self.num_hidden();
        if d + k > EXACT_ENUM_LIMIT {
            return Err(ModelError::EnumerationGuard { d, k });
        }
        let mut terms = Vec::with_capacity(1 << d);
        for v in enumerate_states::<T>(d) {
            terms.push(-self.free_energy(v.view())?);
        }
        Ok(logsumexp(&terms))
    }

    /// Mean log-likelihood of the rows of `data` under the model.
    ///
    /// Exact, via enumeration of the 2^D visible states; refuses models with
    /// `D + K > EXACT_ENUM_LIMIT`.  Rows are treated as visible configurations
    /// as given (they are binary in every intended use).
    pub fn exact_log_likelihood(&self, data: ArrayView2<T>) -> Result<T, ModelError> {
        self.check_visible(data.ncols(), "exact_log_likelihood")?;
        if data.nrows() == 0 {
            return Err(ModelError::EmptyBatch);
        }
        let log_z = self.exact_log_z()?;
        let mut total = T::zero();
        for row in data.rows() {
            total += -self.free_energy(row)? - log_z;
        }
        Ok(total / T::cast(data.nrows() as f64))
    }

    /// Exact gradient of the mean log-likelihood with respect to all
    /// parameters: data expectation minus model expectation of the
    /// sufficient statistics.
    pub fn exact_log_likelihood_grad(
        &self,
        data: ArrayView2<T>,
    ) -> Result<(Array2<T>, Array1<T>, Array1<T>), ModelError> {
        self.check_visible(data.ncols(), "exact_log_likelihood_grad")?;
        if data.nrows() == 0 {
            return Err(ModelError::EmptyBatch);
        }
        let d = self.num_visible();
        let k = self.num_hidden();
        let log_z = self.exact_log_z()?;

        // Data expectations, with hidden units integrated out analytically.
        let n = T::cast(data.nrows() as f64);
        let ph = self.hidden_prob_batch(data)?;
        let mut g_w = data.t().dot(&ph) / n;
        let mut g_b_v = data.sum_axis(Axis(0)) / n;
        let mut g_b_h = ph.sum_axis(Axis(0)) / n;

        // Model expectations over all visible states, weighted by P(v).
        for v in enumerate_states::<T>(d) {
            let p_v = (-self.free_energy(v.view())? - log_z).exp();
            let ph_v = self.hidden_prob(v.view())?;
            for i in 0..d {
                for j in 0..k {
                    g_w[(i, j)] -= p_v * v[i] * ph_v[j];
                }
            }
            g_b_v.scaled_add(-p_v, &v);
            g_b_h.scaled_add(-p_v, &ph_v);
        }
        Ok((g_w, g_b_v, g_b_h))
    }

    /// One contrastive-divergence gradient estimate over a batch of visible
    /// rows, folded into the momentum state.
    ///
    /// The positive statistics pair each data row with its hidden
    /// probabilities; the negative statistics come from `cd_k` Gibbs steps in
    /// which hidden units are sampled and visible units are kept at their
    /// mean-field values.  Weight decay applies to `W` only.  The returned
    /// delta has already been folded into `state`; add it to the parameters
    /// with [`Rbm::apply_delta`].
    pub fn cd_update<R: Rng + ?Sized>(
        &self,
        batch: ArrayView2<T>,
        cfg: &CdConfig,
        state: &mut CdState<T>,
        rng: &mut R,
    ) -> Result<CdDelta<T>, ModelError> {
        self.check_visible(batch.ncols(), "cd_update")?;
        if batch.nrows() == 0 {
            return Err(ModelError::EmptyBatch);
        }
        cfg.validate()?;
        let b = T::cast(batch.nrows() as f64);
        let lr = T::cast(cfg.learning_rate);
        let momentum = T::cast(cfg.momentum);
        let decay = T::cast(cfg.weight_decay);

        let ph0 = self.hidden_prob_batch(batch)?;

        // Gibbs chain: binary hidden samples, mean-field visible values.
        let mut h = sample_bernoulli_batch(&ph0, rng);
        let mut vk = self.visible_prob_batch(h.view())?;
        for _ in 1..cfg.cd_k {
            let phk = self.hidden_prob_batch(vk.view())?;
            h = sample_bernoulli_batch(&phk, rng);
            vk = self.visible_prob_batch(h.view())?;
        }
        let phk = self.hidden_prob_batch(vk.view())?;

        let grad_w = (batch.t().dot(&ph0) - vk.t().dot(&phk)) / b - &(self.w.mapv(|w| w * decay));
        let grad_b_v = (batch.sum_axis(Axis(0)) - vk.sum_axis(Axis(0))) / b;
        let grad_b_h = (ph0.sum_axis(Axis(0)) - phk.sum_axis(Axis(0))) / b;

        state.vel_w.zip_mut_with(&grad_w, |vel, &g| *vel = momentum * *vel + lr * g);
        state
            .vel_b_v
            .zip_mut_with(&grad_b_v, |vel, &g| *vel = momentum * *vel + lr * g);
        state
            .vel_b_h
            .zip_mut_with(&grad_b_h, |vel, &g| *vel = momentum * *vel + lr * g);

        Ok(CdDelta {
            d_w: state.vel_w.clone(),
            d_b_v: state.vel_b_v.clone(),
            d_b_h: state.vel_b_h.clone(),
        })
    }

    /// Add a parameter update in place.
    pub fn apply_delta(&mut self, delta: &CdDelta<T>) {
        self.w += &delta.d_w;
        self.b_v += &delta.d_b_v;
        self.b_h += &delta.d_b_h;
    }

    /// Serializable snapshot of the parameters.
    pub fn to_record(&self) -> RbmRecord<T> {
        RbmRecord {
            version: crate::MODEL_FORMAT_VERSION,
            num_visible: self.num_visible(),
            num_hidden: self.num_hidden(),
            w: self.w.iter().cloned().collect(),
            b_v: self.b_v.to_vec(),
            b_h: self.b_h.to_vec(),
        }
    }

    /// Rebuild from a snapshot, validating version and shapes.
    pub fn from_record(rec: RbmRecord<T>) -> Result<Self, ModelError> {
        if rec.version != crate::MODEL_FORMAT_VERSION {
            return Err(ModelError::VersionMismatch {
                expected: crate::MODEL_FORMAT_VERSION,
                got: rec.version,
            });
        }
        if rec.w.len() != rec.num_visible * rec.num_hidden {
            return Err(ModelError::ShapeMismatch {
                context: "RbmRecord weights",
                expected: rec.num_visible * rec.num_hidden,
                got: rec.w.len(),
            });
        }
        let w = Array2::from_shape_vec((rec.num_visible, rec.num_hidden), rec.w)
            .expect("length checked above");
        Rbm::new(w, Array1::from_vec(rec.b_v), Array1::from_vec(rec.b_h))
    }
}

/// On-disk form of an RBM: row-major weights plus both bias vectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RbmRecord<T> {
    pub version: u32,
    pub num_visible: usize,
    pub num_hidden: usize,
    /// Row-major D x K weight matrix.
    pub w: Vec<T>,
    pub b_v: Vec<T>,
    pub b_h: Vec<T>,
}

/// All binary vectors of the given length, in increasing binary-code order
/// with bit `i` mapped to component `i`.
pub fn enumerate_states<T: Real>(len: usize) -> impl Iterator<Item = Array1<T>> {
    assert!(len < usize::BITS as usize, "state space too large");
    (0usize..(1 << len)).map(move |code| {
        Array1::from_shape_fn(len, |i| {
            if code >> i & 1 == 1 {
                T::one()
            } else {
                T::zero()
            }
        })
    })
}

fn sample_bernoulli<T: Real, R: Rng + ?Sized>(p: &Array1<T>, rng: &mut R) -> Array1<T> {
    p.mapv(|pi| {
        if T::uniform_01(rng) < pi {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// Row-major draw order: all units of row 0, then row 1, and so on.
fn sample_bernoulli_batch<T: Real, R: Rng + ?Sized>(p: &Array2<T>, rng: &mut R) -> Array2<T> {
    let mut out = Array2::zeros(p.dim());
    for r in 0..p.nrows() {
        for c in 0..p.ncols() {
            out[(r, c)] = if T::uniform_01(rng) < p[(r, c)] {
                T::one()
            } else {
                T::zero()
            };
        }
    }
    out
}

/// Train an RBM with contrastive divergence.
///
/// Initializes weights from N(0, 0.01^2) and biases at zero using
/// `cfg.seed`, then runs `cfg.epochs` passes over shuffled minibatches with a
/// persistent momentum state.  `data` rows must lie in [0, 1].
pub fn train_rbm<T: Real>(
    data: ArrayView2<T>,
    num_hidden: usize,
    cfg: &CdConfig,
) -> Result<Rbm<T>, ModelError> {
    cfg.validate()?;
    if data.nrows() == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    if num_hidden == 0 {
        return Err(ModelError::InvalidConfig("num_hidden must be >= 1".into()));
    }
    if data.iter().any(|&x| x < T::zero() || x > T::one() || !x.is_finite()) {
        return Err(ModelError::DataOutOfRange);
    }

    let d = data.ncols();
    let mut rbm = Rbm::<T>::init_random(d, num_hidden, cfg.seed);
    let mut state = CdState::zeros(d, num_hidden);
    // Separate stream from the initialization so adding epochs never changes
    // the starting point.
    let mut rng = rng_from_seed(crate::seeding::derive(cfg.seed, 1));

    let mut order: Vec<usize> = (0..data.nrows()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = gather_rows(data, chunk);
            let delta = rbm.cd_update(batch.view(), cfg, &mut state, &mut rng)?;
            rbm.apply_delta(&delta);
        }
    }
    Ok(rbm)
}

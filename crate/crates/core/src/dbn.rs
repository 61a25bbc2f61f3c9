//! Deep belief network classifier for binary valence.
//!
//! The network is a stack of RBMs trained greedily: layer 0 on the raw
//! features, each later layer on the mean-field hidden activations of the
//! layer below.  A two-unit softmax output layer sits on top.  Fine-tuning
//! minimizes mean cross-entropy by mini-batch gradient descent through the
//! output layer and every RBM weight matrix and hidden bias; RBM visible
//! biases belong to the generative model only and stay untouched.
//!
//! Inference is fully deterministic: a mean-field pass through
//! `hidden_prob` of each layer, then a softmax.  Class index 0 is Negative,
//! index 1 is Positive, and exact ties predict Negative.

use crate::corpus::ValenceLabel;
use crate::errors::ModelError;
use crate::rbm::{train_rbm, CdConfig, Rbm, RbmRecord};
use crate::scalar::Real;
use crate::seeding::{derive, rng_from_seed};
use crate::util::gather_rows;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// Number of output classes (Negative, Positive).
pub const NUM_CLASSES: usize = 2;

/// Hidden-layer sizes of the RBM stack, bottom to top.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbnArchitecture {
    pub layer_sizes: Vec<usize>,
}

impl Default for DbnArchitecture {
    /// Two 1000-unit layers under a 2000-unit top layer.
    fn default() -> Self {
        DbnArchitecture { layer_sizes: vec![1000, 1000, 2000] }
    }
}

impl DbnArchitecture {
    pub fn new(layer_sizes: Vec<usize>) -> Self {
        DbnArchitecture { layer_sizes }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.layer_sizes.is_empty() {
            return Err(ModelError::InvalidConfig("architecture needs at least one layer".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(ModelError::InvalidConfig("layer sizes must be >= 1".into()));
        }
        Ok(())
    }
}

/// Backpropagation fine-tuning settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FineTuneConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        FineTuneConfig { learning_rate: 1e-3, epochs: 100, batch_size: 64, seed: 0 }
    }
}

impl FineTuneConfig {
    /// `learning_rate == 0` and `epochs == 0` are permitted no-ops.
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
        Ok(())
    }
}

/// Greedy layer-wise pretraining.
///
/// Layer `l` trains on the mean-field propagation of the data through layers
/// `0..l` and uses the contrastive-divergence settings of `cfg` with seed
/// stream `l`, so each layer gets an independent reproducible RNG.
pub fn pretrain<T: Real>(
    data: ArrayView2<T>,
    arch: &DbnArchitecture,
    cfg: &CdConfig,
) -> Result<Vec<Rbm<T>>, ModelError> {
    arch.validate()?;
    cfg.validate()?;
    if data.nrows() == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let mut stack = Vec::with_capacity(arch.layer_sizes.len());
    let mut current = data.to_owned();
    for (layer, &num_hidden) in arch.layer_sizes.iter().enumerate() {
        let layer_cfg = CdConfig { seed: derive(cfg.seed, layer as u64), ..cfg.clone() };
        let rbm = train_rbm(current.view(), num_hidden, &layer_cfg)?;
        current = rbm.hidden_prob_batch(current.view())?;
        stack.push(rbm);
    }
    Ok(stack)
}

/// RBM stack plus softmax output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DbnClassifier<T: Real> {
    pub rbm_stack: Vec<Rbm<T>>,
    /// NUM_CLASSES x top-layer-size.
    pub out_weights: Array2<T>,
    pub out_bias: Array1<T>,
}

fn validate_chain<T: Real>(stack: &[Rbm<T>]) -> Result<(), ModelError> {
    if stack.is_empty() {
        return Err(ModelError::InvalidConfig("empty RBM stack".into()));
    }
    for pair in stack.windows(2) {
        if pair[1].num_visible() != pair[0].num_hidden() {
            return Err(ModelError::ShapeMismatch {
                context: "dbn layer chain",
                expected: pair[0].num_hidden(),
                got: pair[1].num_visible(),
            });
        }
    }
    Ok(())
}

impl<T: Real> DbnClassifier<T> {
    /// Put a zero-initialized output layer on a pretrained stack.  Zero
    /// output weights give the uninformative (0.5, 0.5) prediction; the
    /// softmax gradient is nonzero there, so fine-tuning proceeds normally.
    pub fn from_pretrained(rbm_stack: Vec<Rbm<T>>) -> Result<Self, ModelError> {
        validate_chain(&rbm_stack)?;
        let top = rbm_stack.last().expect("non-empty stack").num_hidden();
        Ok(DbnClassifier {
            rbm_stack,
            out_weights: Array2::zeros((NUM_CLASSES, top)),
            out_bias: Array1::zeros(NUM_CLASSES),
        })
    }

    /// Same shapes as a pretrained network but with small random weights in
    /// every layer — the no-pretraining ablation.  Layer `l` draws from seed
    /// stream `l`.
    pub fn random_init(
        input_dim: usize,
        arch: &DbnArchitecture,
        seed: u64,
    ) -> Result<Self, ModelError> {
        arch.validate()?;
        if input_dim == 0 {
            return Err(ModelError::InvalidConfig("input_dim must be >= 1".into()));
        }
        let mut stack = Vec::with_capacity(arch.layer_sizes.len());
        let mut prev = input_dim;
        for (layer, &k) in arch.layer_sizes.iter().enumerate() {
            stack.push(Rbm::init_random(prev, k, derive(seed, layer as u64)));
            prev = k;
        }
        DbnClassifier::from_pretrained(stack)
    }

    pub fn input_dim(&self) -> usize {
        self.rbm_stack[0].num_visible()
    }

    pub fn top_dim(&self) -> usize {
        self.rbm_stack.last().expect("non-empty stack").num_hidden()
    }

    /// Mean-field activations of every layer for a batch: element 0 is the
    /// input itself, element `l + 1` the activations of layer `l`.
    fn forward_activations(&self, batch: ArrayView2<T>) -> Result<Vec<Array2<T>>, ModelError> {
        if batch.ncols() != self.input_dim() {
            return Err(ModelError::ShapeMismatch {
                context: "dbn forward",
                expected: self.input_dim(),
                got: batch.ncols(),
            });
        }
        let mut acts = Vec::with_capacity(self.rbm_stack.len() + 1);
        acts.push(batch.to_owned());
        for rbm in &self.rbm_stack {
            let next = rbm.hidden_prob_batch(acts.last().expect("non-empty").view())?;
            acts.push(next);
        }
        Ok(acts)
    }

    fn logits_batch(&self, batch: ArrayView2<T>) -> Result<Array2<T>, ModelError> {
        let acts = self.forward_activations(batch)?;
        let top = acts.last().expect("non-empty");
        Ok(top.dot(&self.out_weights.t()) + &self.out_bias)
    }

    /// Class probabilities for one feature vector: a valid distribution of
    /// length [`NUM_CLASSES`] (entries positive, summing to 1).
    pub fn forward(&self, v: ArrayView1<T>) -> Result<Array1<T>, ModelError> {
        let batch = v.insert_axis(Axis(0));
        Ok(self.forward_batch(batch)?.row(0).to_owned())
    }

    /// Row-wise class probabilities for a batch.
    pub fn forward_batch(&self, batch: ArrayView2<T>) -> Result<Array2<T>, ModelError> {
        let mut logits = self.logits_batch(batch)?;
        for mut row in logits.rows_mut() {
            let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
            row.mapv_inplace(|z| (z - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|e| e / sum);
        }
        Ok(logits)
    }

    /// Predicted valence: argmax of [`DbnClassifier::forward`]; exact ties go
    /// to Negative.
    pub fn predict(&self, v: ArrayView1<T>) -> Result<ValenceLabel, ModelError> {
        let p = self.forward(v)?;
        Ok(if p[1] > p[0] { ValenceLabel::Positive } else { ValenceLabel::Negative })
    }

    /// Predictions for each row, in input order.
    pub fn predict_batch(&self, batch: ArrayView2<T>) -> Result<Vec<ValenceLabel>, ModelError> {
        let p = self.forward_batch(batch)?;
        Ok(p.rows()
            .into_iter()
            .map(|row| if row[1] > row[0] { ValenceLabel::Positive } else { ValenceLabel::Negative })
            .collect())
    }

    /// Mean cross-entropy of the labels under the model, computed from
    /// logits in a log-sum-exp form that cannot take log of zero.
    pub fn mean_cross_entropy(
        &self,
        x: ArrayView2<T>,
        labels: &[ValenceLabel],
    ) -> Result<f64, ModelError> {
        if x.nrows() == 0 {
            return Err(ModelError::EmptyBatch);
        }
        if labels.len() != x.nrows() {
            return Err(ModelError::ShapeMismatch {
                context: "dbn labels",
                expected: x.nrows(),
                got: labels.len(),
            });
        }
        let logits = self.logits_batch(x)?;
        let mut total = 0.0;
        for (row, label) in logits.rows().into_iter().zip(labels) {
            let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
            let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
            total += (lse - row[label.index()]).as_f64();
        }
        Ok(total / x.nrows() as f64)
    }

    /// Serialize to a versioned `.dbn.json` file.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let rec = self.to_record();
        let text = serde_json::to_string_pretty(&rec)
            .map_err(|e| ModelError::MalformedFile(e.to_string()))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Load a `.dbn.json` file, checking version before anything else.
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
        let rec: DbnRecord<T> = serde_json::from_value(value)
            .map_err(|e| ModelError::MalformedFile(e.to_string()))?;
        Self::from_record(rec)
    }

    pub fn to_record(&self) -> DbnRecord<T> {
        DbnRecord {
            version: crate::MODEL_FORMAT_VERSION,
            layers: self.rbm_stack.iter().map(Rbm::to_record).collect(),
            out_weights: self.out_weights.iter().cloned().collect(),
            out_bias: self.out_bias.to_vec(),
        }
    }

    pub fn from_record(rec: DbnRecord<T>) -> Result<Self, ModelError> {
        if rec.version != crate::MODEL_FORMAT_VERSION {
            return Err(ModelError::VersionMismatch {
                expected: crate::MODEL_FORMAT_VERSION,
                got: rec.version,
            });
        }
        let stack: Vec<Rbm<T>> = rec
            .layers
            .into_iter()
            .map(Rbm::from_record)
            .collect::<Result<_, _>>()?;
        validate_chain(&stack)?;
        let top = stack.last().expect("non-empty stack").num_hidden();
        if rec.out_weights.len() != NUM_CLASSES * top {
            return Err(ModelError::ShapeMismatch {
                context: "dbn output weights",
                expected: NUM_CLASSES * top,
                got: rec.out_weights.len(),
            });
        }
        if rec.out_bias.len() != NUM_CLASSES {
            return Err(ModelError::ShapeMismatch {
                context: "dbn output bias",
                expected: NUM_CLASSES,
                got: rec.out_bias.len(),
            });
        }
        let out_weights = Array2::from_shape_vec((NUM_CLASSES, top), rec.out_weights)
            .expect("length checked above");
        Ok(DbnClassifier {
            rbm_stack: stack,
            out_weights,
            out_bias: Array1::from_vec(rec.out_bias),
        })
    }
}

/// On-disk form of the classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DbnRecord<T> {
    pub version: u32,
    pub layers: Vec<RbmRecord<T>>,
    /// Row-major NUM_CLASSES x top-layer-size.
    pub out_weights: Vec<T>,
    pub out_bias: Vec<T>,
}

/// Fine-tune and return only the model.
pub fn fine_tune<T: Real>(
    model: DbnClassifier<T>,
    x: ArrayView2<T>,
    labels: &[ValenceLabel],
    cfg: &FineTuneConfig,
) -> Result<DbnClassifier<T>, ModelError> {
    Ok(fine_tune_traced(model, x, labels, cfg)?.0)
}

/// Fine-tune with a loss trace: entry 0 is the full-set mean cross-entropy
/// before any update, entry `e + 1` the loss after epoch `e`.
pub fn fine_tune_traced<T: Real>(
    mut model: DbnClassifier<T>,
    x: ArrayView2<T>,
    labels: &[ValenceLabel],
    cfg: &FineTuneConfig,
) -> Result<(DbnClassifier<T>, Vec<f64>), ModelError> {
    cfg.validate()?;
    if x.nrows() == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    if labels.len() != x.nrows() {
        return Err(ModelError::ShapeMismatch {
            context: "fine_tune labels",
            expected: x.nrows(),
            got: labels.len(),
        });
    }
    if x.ncols() != model.input_dim() {
        return Err(ModelError::ShapeMismatch {
            context: "fine_tune features",
            expected: model.input_dim(),
            got: x.ncols(),
        });
    }

    let lr = T::cast(cfg.learning_rate);
    let mut rng = rng_from_seed(cfg.seed);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    losses.push(model.mean_cross_entropy(x, labels)?);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = gather_rows(x, chunk);
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i].index()).collect();
            step(&mut model, batch.view(), &batch_labels, lr)?;
        }
        losses.push(model.mean_cross_entropy(x, labels)?);
    }
    Ok((model, losses))
}

/// One gradient-descent step on a batch.
fn step<T: Real>(
    model: &mut DbnClassifier<T>,
    batch: ArrayView2<T>,
    label_idx: &[usize],
    lr: T,
) -> Result<(), ModelError> {
    let b = T::cast(batch.nrows() as f64);
    let acts = model.forward_activations(batch)?;
    let top = acts.last().expect("non-empty");

    // Softmax probabilities.
    let mut probs = top.dot(&model.out_weights.t()) + &model.out_bias;
    for mut row in probs.rows_mut() {
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|z| (z - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|e| e / sum);
    }

    // d loss / d logits = (p - onehot) / B.
    let mut dlogits = probs;
    for (r, &y) in label_idx.iter().enumerate() {
        dlogits[(r, y)] -= T::one();
    }
    dlogits.mapv_inplace(|g| g / b);

    let g_out_w = dlogits.t().dot(top);
    let g_out_b = dlogits.sum_axis(Axis(0));
    let mut d_act = dlogits.dot(&model.out_weights);

    // Walk the stack top-down; layer l maps acts[l] -> acts[l + 1].
    let mut layer_grads = Vec::with_capacity(model.rbm_stack.len());
    for l in (0..model.rbm_stack.len()).rev() {
        let a_out = &acts[l + 1];
        let a_in = &acts[l];
        let mut dz = d_act;
        dz.zip_mut_with(a_out, |d, &a| *d = *d * a * (T::one() - a));
        let g_w = a_in.t().dot(&dz);
        let g_b = dz.sum_axis(Axis(0));
        if l > 0 {
            d_act = dz.dot(&model.rbm_stack[l].w.t());
        } else {
            d_act = Array2::zeros((0, 0));
        }
        layer_grads.push((l, g_w, g_b));
    }

    model.out_weights.scaled_add(-lr, &g_out_w);
    model.out_bias.scaled_add(-lr, &g_out_b);
    for (l, g_w, g_b) in layer_grads {
        model.rbm_stack[l].w.scaled_add(-lr, &g_w);
        model.rbm_stack[l].b_h.scaled_add(-lr, &g_b);
        // Visible biases are generative-only parameters; never updated here.
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rbm::CdConfig;
    use ndarray::array;
    use rand::Rng;

    fn toy_data(n: usize, dim: usize, seed: u64) -> (Array2<f64>, Vec<ValenceLabel>) {
        let mut rng = rng_from_seed(seed);
        let x = Array2::from_shape_fn((n, dim), |_| rng.random::<f64>());
        let labels = (0..n)
            .map(|i| if i % 2 == 0 { ValenceLabel::Negative } else { ValenceLabel::Positive })
            .collect();
        (x, labels)
    }

    fn quick_cd(seed: u64) -> CdConfig {
        CdConfig { epochs: 2, batch_size: 8, seed, ..CdConfig::default() }
    }

    fn small_model(input_dim: usize, sizes: &[usize], seed: u64) -> DbnClassifier<f64> {
        let mut model =
            DbnClassifier::random_init(input_dim, &DbnArchitecture::new(sizes.to_vec()), seed)
                .unwrap();
        // Random output layer too, so gradients flow everywhere from step 1.
        let mut rng = rng_from_seed(derive(seed, 999));
        model.out_weights = Array2::from_shape_fn((NUM_CLASSES, model.top_dim()), |_| {
            0.1 * f64::standard_normal(&mut rng)
        });
        model.out_bias = Array1::from_shape_fn(NUM_CLASSES, |_| 0.1 * f64::standard_normal(&mut rng));
        model
    }

    #[test]
    fn pretrain_produces_the_requested_shapes() {
        let (x, _) = toy_data(10, 5, 1);
        let stack = pretrain(x.view(), &DbnArchitecture::new(vec![3]), &quick_cd(2)).unwrap();
        assert_eq!(stack.len(), 1);
        assert_eq!((stack[0].num_visible(), stack[0].num_hidden()), (5, 3));

        let stack = pretrain(x.view(), &DbnArchitecture::new(vec![3, 4]), &quick_cd(2)).unwrap();
        assert_eq!((stack[1].num_visible(), stack[1].num_hidden()), (3, 4));
    }

    #[test]
    fn default_architecture_stacks_to_2000_units() {
        // epochs 0 keeps this instant: pretraining reduces to initialization.
        let (x, _) = toy_data(2, 30, 3);
        let cfg = CdConfig { epochs: 0, ..CdConfig::default() };
        let stack = pretrain(x.view(), &DbnArchitecture::default(), &cfg).unwrap();
        let dims: Vec<(usize, usize)> =
            stack.iter().map(|r| (r.num_visible(), r.num_hidden())).collect();
        assert_eq!(dims, vec![(30, 1000), (1000, 1000), (1000, 2000)]);
    }

    #[test]
    fn pretrain_matches_manual_layer_by_layer_training() {
        let (x, _) = toy_data(12, 4, 5);
        let cfg = quick_cd(17);
        let stack = pretrain(x.view(), &DbnArchitecture::new(vec![3, 2]), &cfg).unwrap();

        let cfg0 = CdConfig { seed: derive(17, 0), ..cfg.clone() };
        let layer0 = train_rbm(x.view(), 3, &cfg0).unwrap();
        assert_eq!(stack[0], layer0);

        let hidden = layer0.hidden_prob_batch(x.view()).unwrap();
        let cfg1 = CdConfig { seed: derive(17, 1), ..cfg };
        let layer1 = train_rbm(hidden.view(), 2, &cfg1).unwrap();
        assert_eq!(stack[1], layer1);
    }

    #[test]
    fn pretrain_rejects_bad_inputs() {
        let empty = Array2::<f64>::zeros((0, 4));
        assert!(matches!(
            pretrain(empty.view(), &DbnArchitecture::new(vec![3]), &quick_cd(1)),
            Err(ModelError::EmptyTrainingSet)
        ));
        let (x, _) = toy_data(4, 4, 1);
        assert!(matches!(
            pretrain(x.view(), &DbnArchitecture::new(vec![]), &quick_cd(1)),
            Err(ModelError::InvalidConfig(_))
        ));
        assert!(matches!(
            pretrain(x.view(), &DbnArchitecture::new(vec![3, 0]), &quick_cd(1)),
            Err(ModelError::InvalidConfig(_))
        ));
    }

    #[test]
    fn zero_output_layer_predicts_half_half() {
        let (x, _) = toy_data(6, 4, 7);
        let stack = pretrain(x.view(), &DbnArchitecture::new(vec![3]), &quick_cd(7)).unwrap();
        let model = DbnClassifier::from_pretrained(stack).unwrap();
        for row in x.rows() {
            let p = model.forward(row).unwrap();
            assert!((p[0] - 0.5).abs() < 1e-12);
            assert!((p[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_output_bias_pins_the_prediction() {
        let (x, _) = toy_data(3, 4, 9);
        let stack = pretrain(x.view(), &DbnArchitecture::new(vec![3]), &quick_cd(9)).unwrap();
        let mut model = DbnClassifier::from_pretrained(stack).unwrap();
        model.out_bias = array![20.0, -20.0];
        let p = model.forward(x.row(0)).unwrap();
        assert!(p[0] > 0.999);
        assert_eq!(model.predict(x.row(0)).unwrap(), ValenceLabel::Negative);
    }

    #[test]
    fn softmax_is_invariant_to_logit_shifts() {
        let model = small_model(4, &[3, 2], 11);
        let mut shifted = model.clone();
        shifted.out_bias.mapv_inplace(|b| b + 7.5);
        let (x, _) = toy_data(5, 4, 12);
        for row in x.rows() {
            let p = model.forward(row).unwrap();
            let q = shifted.forward(row).unwrap();
            assert!((p[0] - q[0]).abs() < 1e-12);
            assert!((p[1] - q[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_always_returns_a_distribution() {
        let model = small_model(6, &[4, 3], 13);
        let mut rng = rng_from_seed(14);
        for _ in 0..50 {
            let v = Array1::from_shape_fn(6, |_| 100.0 * (rng.random::<f64>() - 0.5));
            let p = model.forward(v.view()).unwrap();
            assert!(p[0] > 0.0 && p[1] > 0.0);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_batch_agrees_with_single_forward() {
        let model = small_model(5, &[4, 2], 15);
        let (x, _) = toy_data(9, 5, 16);
        let all = model.forward_batch(x.view()).unwrap();
        for (r, row) in x.rows().into_iter().enumerate() {
            let one = model.forward(row).unwrap();
            assert!((all[(r, 0)] - one[0]).abs() < 1e-14);
            assert!((all[(r, 1)] - one[1]).abs() < 1e-14);
        }
        let preds = model.predict_batch(x.view()).unwrap();
        assert_eq!(preds.len(), 9);
        for (r, &p) in preds.iter().enumerate() {
            assert_eq!(p, model.predict(x.row(r)).unwrap());
        }
    }

    #[test]
    fn forward_rejects_wrong_dimensions() {
        let model = small_model(5, &[3], 17);
        let v = Array1::<f64>::zeros(4);
        assert!(matches!(
            model.forward(v.view()),
            Err(ModelError::ShapeMismatch { expected: 5, got: 4, .. })
        ));
    }

    #[test]
    fn exact_ties_predict_negative() {
        let (x, _) = toy_data(2, 4, 19);
        let stack = pretrain(x.view(), &DbnArchitecture::new(vec![3]), &quick_cd(19)).unwrap();
        let model = DbnClassifier::from_pretrained(stack).unwrap();
        // Zero output layer -> exactly (0.5, 0.5) for every input.
        assert_eq!(model.predict(x.row(0)).unwrap(), ValenceLabel::Negative);
    }

    #[test]
    fn fine_tune_with_zero_learning_rate_changes_nothing() {
        let model = small_model(4, &[3, 2], 21);
        let (x, labels) = toy_data(8, 4, 22);
        let cfg = FineTuneConfig { learning_rate: 0.0, epochs: 3, ..FineTuneConfig::default() };
        let tuned = fine_tune(model.clone(), x.view(), &labels, &cfg).unwrap();
        assert_eq!(model, tuned);
    }

    /// Recover the analytic gradient from a single full-batch step at
    /// lr = 1 (new = old - g exactly) and compare against central finite
    /// differences of the cross-entropy on a 5 -> 4 -> 3 -> 2 network.
    #[test]
    fn fine_tune_gradient_matches_finite_differences() {
        let model = small_model(5, &[4, 3], 23);
        let (x, labels) = toy_data(8, 5, 24);
        let cfg = FineTuneConfig {
            learning_rate: 1.0,
            epochs: 1,
            batch_size: 8,
            seed: 0,
        };
        let stepped = fine_tune(model.clone(), x.view(), &labels, &cfg).unwrap();

        let eps = 1e-5;
        let mut checked = 0usize;
        let mut check = |analytic: f64, mut perturb: Box<dyn FnMut(&mut DbnClassifier<f64>, f64)>| {
            let mut plus = model.clone();
            perturb(&mut plus, eps);
            let mut minus = model.clone();
            perturb(&mut minus, -eps);
            let numeric = (plus.mean_cross_entropy(x.view(), &labels).unwrap()
                - minus.mean_cross_entropy(x.view(), &labels).unwrap())
                / (2.0 * eps);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                (analytic - numeric).abs() / denom < 1e-4,
                "analytic {analytic} vs numeric {numeric}"
            );
            checked += 1;
        };

        for l in 0..2 {
            let (d, k) = (model.rbm_stack[l].num_visible(), model.rbm_stack[l].num_hidden());
            for i in 0..d {
                for j in 0..k {
                    let g = model.rbm_stack[l].w[(i, j)] - stepped.rbm_stack[l].w[(i, j)];
                    check(g, Box::new(move |m, e| m.rbm_stack[l].w[(i, j)] += e));
                }
            }
            for j in 0..k {
                let g = model.rbm_stack[l].b_h[j] - stepped.rbm_stack[l].b_h[j];
                check(g, Box::new(move |m, e| m.rbm_stack[l].b_h[j] += e));
            }
        }
        for c in 0..NUM_CLASSES {
            for j in 0..model.top_dim() {
                let g = model.out_weights[(c, j)] - stepped.out_weights[(c, j)];
                check(g, Box::new(move |m, e| m.out_weights[(c, j)] += e));
            }
            let g = model.out_bias[c] - stepped.out_bias[c];
            check(g, Box::new(move |m, e| m.out_bias[c] += e));
        }
        assert_eq!(checked, 5 * 4 + 4 + 4 * 3 + 3 + 2 * 3 + 2);

        // Visible biases must not have moved at all.
        for l in 0..2 {
            assert_eq!(model.rbm_stack[l].b_v, stepped.rbm_stack[l].b_v);
        }
    }

    #[test]
    fn single_class_training_converges_with_monotone_loss() {
        let model = small_model(4, &[3, 2], 25);
        let (x, _) = toy_data(8, 4, 26);
        let labels = vec![ValenceLabel::Positive; 8];
        let cfg = FineTuneConfig {
            learning_rate: 0.5,
            epochs: 200,
            batch_size: 8,
            seed: 1,
        };
        let (tuned, losses) = fine_tune_traced(model, x.view(), &labels, &cfg).unwrap();
        let mean_p: f64 = tuned
            .forward_batch(x.view())
            .unwrap()
            .column(1)
            .iter()
            .sum::<f64>()
            / 8.0;
        assert!(mean_p > 0.9, "mean positive probability {mean_p}");
        assert_eq!(losses.len(), 201);
        for pair in losses.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-6, "loss rose: {} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn fine_tune_is_deterministic_for_equal_seeds() {
        let model = small_model(4, &[3, 2], 27);
        let (x, labels) = toy_data(12, 4, 28);
        let cfg = FineTuneConfig { epochs: 5, batch_size: 5, seed: 2, learning_rate: 0.1 };
        let a = fine_tune(model.clone(), x.view(), &labels, &cfg).unwrap();
        let b = fine_tune(model, x.view(), &labels, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fine_tune_rejects_mismatched_inputs() {
        let model = small_model(4, &[3], 29);
        let (x, labels) = toy_data(6, 4, 30);
        let cfg = FineTuneConfig::default();
        assert!(matches!(
            fine_tune(model.clone(), x.view(), &labels[..5], &cfg),
            Err(ModelError::ShapeMismatch { .. })
        ));
        let empty = Array2::<f64>::zeros((0, 4));
        assert!(matches!(
            fine_tune(model.clone(), empty.view(), &[], &cfg),
            Err(ModelError::EmptyTrainingSet)
        ));
        let (wrong, wrong_labels) = toy_data(6, 5, 31);
        assert!(matches!(
            fine_tune(model, wrong.view(), &wrong_labels, &cfg),
            Err(ModelError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn random_init_chains_shapes_and_is_deterministic() {
        let arch = DbnArchitecture::new(vec![6, 4, 3]);
        let a = DbnClassifier::<f64>::random_init(5, &arch, 33).unwrap();
        let b = DbnClassifier::<f64>::random_init(5, &arch, 33).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.input_dim(), 5);
        assert_eq!(a.top_dim(), 3);
        let dims: Vec<(usize, usize)> =
            a.rbm_stack.iter().map(|r| (r.num_visible(), r.num_hidden())).collect();
        assert_eq!(dims, vec![(5, 6), (6, 4), (4, 3)]);
        let c = DbnClassifier::<f64>::random_init(5, &arch, 34).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mismatched_stacks_cannot_be_assembled() {
        let a = Rbm::<f64>::init_random(5, 3, 1);
        let b = Rbm::<f64>::init_random(4, 2, 2); // needs visible size 3
        assert!(matches!(
            DbnClassifier::from_pretrained(vec![a, b]),
            Err(ModelError::ShapeMismatch { context: "dbn layer chain", expected: 3, got: 4 })
        ));
        assert!(matches!(
            DbnClassifier::<f64>::from_pretrained(vec![]),
            Err(ModelError::InvalidConfig(_))
        ));
    }

    #[test]
    fn save_load_round_trip_is_value_exact() {
        let model = small_model(5, &[4, 3], 35);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.dbn.json");
        model.save(&path).unwrap();
        let back = DbnClassifier::<f64>::load(&path).unwrap();
        assert_eq!(model, back);
        let (x, _) = toy_data(4, 5, 36);
        for row in x.rows() {
            let p = model.forward(row).unwrap();
            let q = back.forward(row).unwrap();
            assert_eq!(p, q, "forward must agree to the last bit");
        }
    }

    #[test]
    fn load_rejects_truncated_and_wrong_version_files() {
        let model = small_model(4, &[3], 37);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.dbn.json");
        model.save(&path).unwrap();

        let full = fs::read_to_string(&path).unwrap();
        let truncated_path = dir.path().join("truncated.dbn.json");
        fs::write(&truncated_path, &full[..full.len() / 2]).unwrap();
        assert!(matches!(
            DbnClassifier::<f64>::load(&truncated_path),
            Err(ModelError::MalformedFile(_))
        ));

        let versioned = full.replacen("\"version\": 1", "\"version\": 99", 1);
        assert_ne!(versioned, full, "version field must be present to rewrite");
        let versioned_path = dir.path().join("versioned.dbn.json");
        fs::write(&versioned_path, versioned).unwrap();
        assert!(matches!(
            DbnClassifier::<f64>::load(&versioned_path),
            Err(ModelError::VersionMismatch { expected: 1, got: 99 })
        ));
    }
}

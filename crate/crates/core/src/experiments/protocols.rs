//! The four evaluation protocols: within-corpus, cross-corpus,
//! target-fraction sweep, and leave-one-corpus-out.
//!
//! Every protocol repeats its experiment once per configured seed and
//! reports per-seed results plus summary statistics.  All randomness in a
//! repetition flows from its seed through fixed streams
//! ([`crate::seeding::derive`]): stream 0 drives data selection (the 75/25
//! split or the target-utterance draw), streams 1–4 drive model training.
//! Standardization is always fitted on the training material alone and then
//! applied to both sides, so no test-set statistics ever reach a model.

use super::{evaluate, EvaluationResult, ExperimentError};
use crate::baselines::{ae_transfer, train_svm, AeConfig, LinearSvm, SvmConfig};
use crate::corpus::{split, Corpus, ValenceLabel};
use crate::dbn::{fine_tune, pretrain, DbnArchitecture, DbnClassifier, FineTuneConfig};
use crate::rbm::CdConfig;
use crate::features::Standardizer;
use crate::scalar::Real;
use crate::seeding::{derive, rng_from_seed};
use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use std::collections::BTreeMap;

/// Train-side share of a within-corpus split.
pub const WITHIN_TRAIN_FRACTION: f64 = 0.75;

/// Seed streams, one per consumer of randomness in a repetition.
const STREAM_SELECTION: u64 = 0;
const STREAM_PRETRAIN: u64 = 1;
const STREAM_FINE_TUNE: u64 = 2;
const STREAM_AE: u64 = 3;
const STREAM_SVM: u64 = 4;

/// Which classifier a protocol trains, with its full configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// Greedy layer-wise pretraining followed by supervised fine-tuning.
    Dbn {
        architecture: DbnArchitecture,
        pretrain: CdConfig,
        fine_tune: FineTuneConfig,
    },
    /// The ablation: same network fine-tuned from random weights.
    DbnNoPretrain {
        architecture: DbnArchitecture,
        fine_tune: FineTuneConfig,
    },
    /// Linear SVM, optionally preceded by autoencoder feature transfer when
    /// a target sample is available.
    SparseAeSvm { ae: AeConfig, svm: SvmConfig },
}

/// Protocol settings: the model to train and the seeds to repeat over.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub model: ModelSpec,
    pub seeds: Vec<u64>,
}

impl ProtocolConfig {
    pub fn new(model: ModelSpec) -> Self {
        ProtocolConfig { model, seeds: default_seeds() }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if self.seeds.is_empty() {
            return Err(ExperimentError::NoSeeds);
        }
        Ok(())
    }
}

/// The five standard repetition seeds.
pub fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

/// The standard sweep grid: 0.1, 0.2, ..., 0.8.
pub fn default_fractions() -> Vec<f64> {
    (1..=8).map(|i| f64::from(i) / 10.0).collect()
}

/// A classifier produced by [`train_model`], ready for prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel<T: Real> {
    Dbn(DbnClassifier<T>),
    SparseAeSvm(LinearSvm<T>),
}

impl<T: Real> TrainedModel<T> {
    pub fn predict_batch(
        &self,
        data: ArrayView2<T>,
    ) -> Result<Vec<ValenceLabel>, ExperimentError> {
        match self {
            TrainedModel::Dbn(dbn) => Ok(dbn.predict_batch(data)?),
            TrainedModel::SparseAeSvm(svm) => Ok(svm.predict_batch(data)?),
        }
    }
}

/// Train one classifier on an already-standardized training corpus.
///
/// `target_sample` only matters for [`ModelSpec::SparseAeSvm`]: when
/// present and non-empty, an autoencoder is trained on it and the training
/// corpus is reconstructed through that autoencoder before the SVM sees it.
/// The configured seeds inside the spec are replaced by streams derived
/// from `seed`, so one spec can be reused across repetitions.
pub fn train_model<T: Real>(
    spec: &ModelSpec,
    train: &Corpus<T>,
    target_sample: Option<&Corpus<T>>,
    seed: u64,
) -> Result<TrainedModel<T>, ExperimentError> {
    let features = train.features_matrix();
    let labels = train.labels();
    match spec {
        ModelSpec::Dbn { architecture, pretrain: cd, fine_tune: ft } => {
            let cd = CdConfig { seed: derive(seed, STREAM_PRETRAIN), ..cd.clone() };
            let stack = pretrain(features.view(), architecture, &cd)?;
            let model = DbnClassifier::from_pretrained(stack)?;
            let ft = FineTuneConfig { seed: derive(seed, STREAM_FINE_TUNE), ..ft.clone() };
            Ok(TrainedModel::Dbn(fine_tune(model, features.view(), &labels, &ft)?))
        }
        ModelSpec::DbnNoPretrain { architecture, fine_tune: ft } => {
            let model = DbnClassifier::random_init(
                train.feature_dim(),
                architecture,
                derive(seed, STREAM_PRETRAIN),
            )?;
            let ft = FineTuneConfig { seed: derive(seed, STREAM_FINE_TUNE), ..ft.clone() };
            Ok(TrainedModel::Dbn(fine_tune(model, features.view(), &labels, &ft)?))
        }
        ModelSpec::SparseAeSvm { ae, svm } => {
            let svm_cfg = SvmConfig { seed: derive(seed, STREAM_SVM), ..svm.clone() };
            match target_sample {
                Some(sample) if !sample.is_empty() => {
                    let ae_cfg = AeConfig { seed: derive(seed, STREAM_AE), ..ae.clone() };
                    let transformed = ae_transfer(sample, train, &ae_cfg)?;
                    Ok(TrainedModel::SparseAeSvm(train_svm(
                        transformed.features_matrix().view(),
                        &transformed.labels(),
                        &svm_cfg,
                    )?))
                }
                _ => Ok(TrainedModel::SparseAeSvm(train_svm(
                    features.view(),
                    &labels,
                    &svm_cfg,
                )?)),
            }
        }
    }
}

/// One repetition: fit the standardizer on `train`, train, evaluate.
fn run_one<T: Real>(
    spec: &ModelSpec,
    train: &Corpus<T>,
    target_sample: Option<&Corpus<T>>,
    test: &Corpus<T>,
    seed: u64,
) -> Result<EvaluationResult, ExperimentError> {
    let standardizer = Standardizer::fit(train.features_matrix().view())?;
    let train_s = standardizer.apply_corpus(train)?;
    let sample_s = target_sample.map(|s| standardizer.apply_corpus(s)).transpose()?;
    let test_s = standardizer.apply_corpus(test)?;
    let model = train_model(spec, &train_s, sample_s.as_ref(), seed)?;
    let predictions = model.predict_batch(test_s.features_matrix().view())?;
    let mut result = evaluate(&test_s.labels(), &predictions)?;
    result.seed = seed;
    Ok(result)
}

/// Mean, stddev (population), median, and range of a per-seed metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub mean: f64,
    pub stddev: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl SummaryStats {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("metrics are finite"));
        let median = if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
        };
        SummaryStats {
            mean,
            stddev: var.sqrt(),
            median,
            min: sorted[0],
            max: *sorted.last().expect("non-empty values"),
        }
    }
}

/// Per-seed results of one protocol cell plus their summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub per_seed: Vec<EvaluationResult>,
    pub accuracy: SummaryStats,
    pub uar: SummaryStats,
}

impl Aggregate {
    fn from_runs(per_seed: Vec<EvaluationResult>) -> Self {
        let acc: Vec<f64> = per_seed.iter().map(|r| r.accuracy).collect();
        let uar: Vec<f64> = per_seed.iter().map(|r| r.uar).collect();
        Aggregate {
            accuracy: SummaryStats::from_values(&acc),
            uar: SummaryStats::from_values(&uar),
            per_seed,
        }
    }
}

/// One sweep grid point: the fraction of target data moved into training
/// and the aggregate over seeds at that fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub fraction: f64,
    pub aggregate: Aggregate,
}

/// Per seed: split 75/25 (selection stream), train on the training side
/// only, evaluate on the held-out quarter.
pub fn within_corpus<T: Real>(
    corpus: &Corpus<T>,
    cfg: &ProtocolConfig,
) -> Result<Aggregate, ExperimentError> {
    cfg.validate()?;
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let (train, test) = split(corpus, WITHIN_TRAIN_FRACTION, derive(seed, STREAM_SELECTION))?;
        runs.push(run_one(&cfg.model, &train, None, &test, seed)?);
    }
    Ok(Aggregate::from_runs(runs))
}

/// Pool the training corpora in the given order.
fn pool<T: Real>(train_corpora: &[&Corpus<T>]) -> Result<Corpus<T>, ExperimentError> {
    if train_corpora.is_empty() {
        return Err(ExperimentError::TooFewCorpora { needed: 1, got: 0 });
    }
    let id = train_corpora.iter().map(|c| c.id()).collect::<Vec<_>>().join("+");
    Ok(Corpus::concat(id, train_corpora)?)
}

/// Train on the union of `train_corpora`, evaluate on all of `test`.
pub fn cross_corpus<T: Real>(
    train_corpora: &[&Corpus<T>],
    test: &Corpus<T>,
    cfg: &ProtocolConfig,
) -> Result<Aggregate, ExperimentError> {
    cfg.validate()?;
    let train = pool(train_corpora)?;
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        runs.push(run_one(&cfg.model, &train, None, &test, seed)?);
    }
    Ok(Aggregate::from_runs(runs))
}

/// For each fraction `f` and each seed, move `floor(f * n)` uniformly drawn
/// target utterances into the training pool (they also serve as the
/// autoencoder target sample for [`ModelSpec::SparseAeSvm`]) and evaluate
/// on the untouched remainder.  Moved utterances are never evaluated.  At
/// `f = 0` a repetition is bit-identical to the same seed under
/// [`cross_corpus`].
pub fn target_fraction_sweep<T: Real>(
    train_corpora: &[&Corpus<T>],
    target: &Corpus<T>,
    fractions: &[f64],
    cfg: &ProtocolConfig,
) -> Result<Vec<SweepPoint>, ExperimentError> {
    cfg.validate()?;
    for &f in fractions {
        if !f.is_finite() || !(0.0..=0.8).contains(&f) {
            return Err(ExperimentError::BadTargetFraction(f));
        }
    }
    let base = pool(train_corpora)?;
    let n = target.len();

    let mut points = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let moved_count = (fraction * n as f64).floor() as usize;
        if n - moved_count == 0 {
            return Err(ExperimentError::EmptyTestSet { fraction, n });
        }
        let mut runs = Vec::with_capacity(cfg.seeds.len());
        for &seed in &cfg.seeds {
            let mut indices: Vec<usize> = (0..n).collect();
            indices.shuffle(&mut rng_from_seed(derive(seed, STREAM_SELECTION)));
            let mut moved_idx = indices[..moved_count].to_vec();
            let mut rest_idx = indices[moved_count..].to_vec();
            moved_idx.sort_unstable();
            rest_idx.sort_unstable();

            let rest = target.subset(&rest_idx, format!("{}-rest", target.id()));
            if moved_count == 0 {
                runs.push(run_one(&cfg.model, &base, None, &rest, seed)?);
            } else {
                let moved = target.subset(&moved_idx, format!("{}-moved", target.id()));
                let train = Corpus::concat(base.id(), &[&base, &moved])?;
                runs.push(run_one(&cfg.model, &train, Some(&moved), &rest, seed)?);
            }
        }
        points.push(SweepPoint { fraction, aggregate: Aggregate::from_runs(runs) });
    }
    Ok(points)
}

/// For each corpus: train on all the others, test on it.  Keyed by corpus
/// id in the returned map.
pub fn leave_one_corpus_out<T: Real>(
    corpora: &[Corpus<T>],
    cfg: &ProtocolConfig,
) -> Result<BTreeMap<String, Aggregate>, ExperimentError> {
    cfg.validate()?;
    if corpora.len() < 2 {
        return Err(ExperimentError::TooFewCorpora { needed: 2, got: corpora.len() });
    }
    let mut seen = std::collections::HashSet::new();
    for c in corpora {
        if !seen.insert(c.id()) {
            return Err(ExperimentError::DuplicateCorpus(c.id().to_string()));
        }
    }

    let mut results = BTreeMap::new();
    for (i, held_out) in corpora.iter().enumerate() {
        let others: Vec<&Corpus<T>> = corpora
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, c)| c)
            .collect();
        results.insert(held_out.id().to_string(), cross_corpus(&others, held_out, cfg)?);
    }
    Ok(results)
}

// The AE spec's epochs were needed here to keep transfer meaningful; see
// the suite tests for end-to-end sweeps with real transfer.
#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, random_rotation, SyntheticCorpusSpec, Utterance};
    use crate::errors::ModelError;
    use crate::features::FeatureError;
    use ndarray::Array1;

    fn svm_cfg() -> ProtocolConfig {
        ProtocolConfig {
            model: ModelSpec::SparseAeSvm {
                ae: AeConfig { hidden_size: 8, epochs: 30, ..AeConfig::default() },
                svm: SvmConfig { epochs: 30, ..SvmConfig::default() },
            },
            seeds: vec![0, 1, 2],
        }
    }

    fn corpus(n_per_class: usize, gap: f64, seed: u64) -> Corpus<f64> {
        let spec = SyntheticCorpusSpec::identity_shift(n_per_class, 6, gap, 1.0, seed);
        generate_synthetic(&spec).unwrap()
    }

    fn shifted_corpus(n_per_class: usize, gap: f64, seed: u64) -> Corpus<f64> {
        let spec = SyntheticCorpusSpec {
            shift_matrix: random_rotation(6, 0.8, 99),
            shift_offset: vec![0.6; 6],
            ..SyntheticCorpusSpec::identity_shift(n_per_class, 6, gap, 1.0, seed)
        };
        generate_synthetic(&spec).unwrap()
    }

    #[test]
    fn within_corpus_split_sizes_match_floor_arithmetic() {
        let corpus = corpus(247, 3.0, 1); // 494 utterances in total
        let agg = within_corpus(&corpus, &svm_cfg()).unwrap();
        assert_eq!(agg.per_seed.len(), 3);
        for r in &agg.per_seed {
            assert_eq!(r.n_test, 124, "370 train / 124 test");
        }
    }

    #[test]
    fn single_class_corpora_fail_in_model_training() {
        let utterances = (0..16)
            .map(|i| Utterance {
                id: format!("u{i}"),
                features: Array1::from_elem(4, 0.5),
                label: ValenceLabel::Negative,
                raw_label: None,
            })
            .collect();
        let corpus = Corpus::new("mono", "none", 4, utterances).unwrap();
        assert!(matches!(
            within_corpus(&corpus, &svm_cfg()),
            Err(ExperimentError::Model(ModelError::SingleClassData))
        ));
    }

    #[test]
    fn sweep_at_fraction_zero_is_bit_identical_to_cross_corpus() {
        let train = corpus(60, 2.0, 2);
        let test = corpus(60, 2.0, 3).with_id("target").unwrap();
        let cfg = svm_cfg();
        let cross = cross_corpus(&[&train], &test, &cfg).unwrap();
        let sweep = target_fraction_sweep(&[&train], &test, &[0.0], &cfg).unwrap();
        assert_eq!(sweep.len(), 1);
        assert_eq!(sweep[0].fraction, 0.0);
        assert_eq!(sweep[0].aggregate, cross);
    }

    #[test]
    fn sweep_moves_the_floor_count_and_never_evaluates_moved_utterances() {
        let train = corpus(40, 2.0, 4);
        let target = corpus(50, 2.0, 5).with_id("target").unwrap(); // n = 100
        let points =
            target_fraction_sweep(&[&train], &target, &[0.25, 0.5], &svm_cfg()).unwrap();
        for (point, moved) in points.iter().zip([25usize, 50]) {
            for r in &point.aggregate.per_seed {
                assert_eq!(r.n_test, 100 - moved, "fraction {}", point.fraction);
            }
        }
    }

    #[test]
    fn sweep_rejects_out_of_range_fractions_and_empty_targets() {
        let train = corpus(20, 2.0, 6);
        let target = corpus(20, 2.0, 7).with_id("target").unwrap();
        for bad in [-0.1, 0.81, f64::NAN] {
            assert!(matches!(
                target_fraction_sweep(&[&train], &target, &[bad], &svm_cfg()),
                Err(ExperimentError::BadTargetFraction(_))
            ));
        }
        let empty = Corpus::<f64>::new("void", "none", 6, vec![]).unwrap();
        assert!(matches!(
            target_fraction_sweep(&[&train], &empty, &[0.2], &svm_cfg()),
            Err(ExperimentError::EmptyTestSet { n: 0, .. })
        ));
    }

    #[test]
    fn default_grids_match_the_protocol() {
        assert_eq!(default_fractions().len(), 8);
        assert_eq!(default_fractions()[0], 0.1);
        assert_eq!(default_fractions()[7], 0.8);
        assert_eq!(default_seeds(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn removing_a_test_utterance_changes_exactly_one_confusion_count() {
        // Leakage sentinel: the trained model must not depend on the test
        // set, so dropping one test utterance shifts exactly one tally.
        let train = corpus(50, 2.0, 8);
        let full = shifted_corpus(40, 2.0, 9).with_id("target").unwrap();
        let shrunk_utts: Vec<_> = full.utterances()[..full.len() - 1].to_vec();
        let shrunk = Corpus::new("target", "synthetic", 6, shrunk_utts).unwrap();

        let cfg = ProtocolConfig { seeds: vec![3], ..svm_cfg() };
        let a = cross_corpus(&[&train], &full, &cfg).unwrap().per_seed[0].clone();
        let b = cross_corpus(&[&train], &shrunk, &cfg).unwrap().per_seed[0].clone();
        let mut total_diff = 0i64;
        for t in 0..2 {
            for p in 0..2 {
                let d = a.confusion[t][p] as i64 - b.confusion[t][p] as i64;
                assert!(d >= 0, "removing a test row cannot add counts elsewhere");
                total_diff += d;
            }
        }
        assert_eq!(total_diff, 1);
    }

    #[test]
    fn loco_on_two_corpora_reduces_to_the_two_cross_runs() {
        let a = corpus(30, 2.5, 10).with_id("alpha").unwrap();
        let b = corpus(30, 2.5, 11).with_id("beta").unwrap();
        let cfg = svm_cfg();
        let map = leave_one_corpus_out(&[a.clone(), b.clone()], &cfg).unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map["alpha"], cross_corpus(&[&b], &a, &cfg).unwrap());
        assert_eq!(map["beta"], cross_corpus(&[&a], &b, &cfg).unwrap());
    }

    #[test]
    fn loco_validates_its_corpus_list() {
        let a = corpus(10, 2.0, 12);
        assert!(matches!(
            leave_one_corpus_out(&[a.clone()], &svm_cfg()),
            Err(ExperimentError::TooFewCorpora { needed: 2, got: 1 })
        ));
        assert!(matches!(
            leave_one_corpus_out(&[a.clone(), a.clone()], &svm_cfg()),
            Err(ExperimentError::DuplicateCorpus(_))
        ));
    }

    #[test]
    fn dimension_mismatch_across_corpora_is_an_error() {
        let train = corpus(20, 2.0, 13);
        let narrow_spec = SyntheticCorpusSpec::identity_shift(10, 4, 2.0, 1.0, 14);
        let narrow: Corpus<f64> =
            generate_synthetic(&narrow_spec).unwrap().with_id("narrow").unwrap();
        assert!(matches!(
            cross_corpus(&[&train], &narrow, &svm_cfg()),
            Err(ExperimentError::Feature(FeatureError::DimMismatch { .. }))
        ));
    }

    #[test]
    fn empty_seed_lists_are_rejected() {
        let c = corpus(20, 2.0, 15);
        let cfg = ProtocolConfig { seeds: vec![], ..svm_cfg() };
        assert!(matches!(
            within_corpus(&c, &cfg),
            Err(ExperimentError::NoSeeds)
        ));
    }

    #[test]
    fn protocols_are_deterministic() {
        let c = corpus(40, 2.0, 16);
        let cfg = svm_cfg();
        assert_eq!(within_corpus(&c, &cfg).unwrap(), within_corpus(&c, &cfg).unwrap());
    }

    #[test]
    fn summary_stats_on_known_values() {
        let s = SummaryStats::from_values(&[3.0, 1.0, 2.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 4.0);
        assert!((s.stddev - 1.25f64.sqrt()).abs() < 1e-15);
        let odd = SummaryStats::from_values(&[5.0, 1.0, 3.0]);
        assert_eq!(odd.median, 3.0);
    }

    #[test]
    fn dbn_variants_run_end_to_end_and_separate_easy_data() {
        let train = corpus(60, 5.0, 17);
        let test = corpus(60, 5.0, 18).with_id("target").unwrap();
        let ft = FineTuneConfig {
            epochs: 300,
            batch_size: 20,
            learning_rate: 0.5,
            ..FineTuneConfig::default()
        };
        // A two-layer network only becomes trainable after pretraining; the
        // random-init ablation needs the single-layer variant to learn.
        for model in [
            ModelSpec::Dbn {
                architecture: DbnArchitecture { layer_sizes: vec![8, 8] },
                pretrain: CdConfig {
                    learning_rate: 0.05,
                    epochs: 200,
                    batch_size: 20,
                    ..CdConfig::default()
                },
                fine_tune: ft.clone(),
            },
            ModelSpec::DbnNoPretrain {
                architecture: DbnArchitecture { layer_sizes: vec![8] },
                fine_tune: ft.clone(),
            },
        ] {
            let cfg = ProtocolConfig { model, seeds: vec![0] };
            let agg = cross_corpus(&[&train], &test, &cfg).unwrap();
            assert!(
                agg.accuracy.mean > 0.8,
                "easy two-blob data should be separable, got {}",
                agg.accuracy.mean
            );
        }
    }
}


//! Deterministic random splitting of corpora.

use super::{Corpus, CorpusError};
use crate::scalar::Real;
use crate::seeding::rng_from_seed;
use rand::seq::SliceRandom;

/// Random train/test partition.
///
/// Shuffles uniformly with the given seed and takes the first
/// `floor(n * train_fraction)` utterances for training; the remainder is the
/// test set.  No stratification by class or speaker.
pub fn split<T: Real>(
    corpus: &Corpus<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Corpus<T>, Corpus<T>), CorpusError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::BadFraction(train_fraction));
    }
    let n = corpus.len();
    if n < 2 {
        return Err(CorpusError::TooFewUtterances { needed: 2, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let train_size = (n as f64 * train_fraction).floor() as usize;
    let train = corpus.subset(&order[..train_size], format!("{}-train", corpus.id()));
    let test = corpus.subset(&order[train_size..], format!("{}-test", corpus.id()));
    Ok((train, test))
}

/// K-fold partition: shuffle once, then cut into `k` folds whose sizes differ
/// by at most one.  Pair `f` holds fold `f` as the test set and the
/// concatenation of the others (in shuffled order) as the training set.
pub fn kfold<T: Real>(
    corpus: &Corpus<T>,
    k: usize,
    seed: u64,
) -> Result<Vec<(Corpus<T>, Corpus<T>)>, CorpusError> {
    if k < 2 {
        return Err(CorpusError::BadFoldCount(k));
    }
    let n = corpus.len();
    if k > n {
        return Err(CorpusError::TooManyFolds { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));

    // First n % k folds get the extra element.
    let base = n / k;
    let extra = n % k;
    let mut bounds = Vec::with_capacity(k + 1);
    let mut pos = 0;
    bounds.push(0);
    for f in 0..k {
        pos += base + usize::from(f < extra);
        bounds.push(pos);
    }

    let mut pairs = Vec::with_capacity(k);
    for f in 0..k {
        let test_idx = &order[bounds[f]..bounds[f + 1]];
        let train_idx: Vec<usize> = order[..bounds[f]]
            .iter()
            .chain(order[bounds[f + 1]..].iter())
            .copied()
            .collect();
        let train = corpus.subset(&train_idx, format!("{}-fold{}-train", corpus.id(), f));
        let test = corpus.subset(test_idx, format!("{}-fold{}-test", corpus.id(), f));
        pairs.push((train, test));
    }
    Ok(pairs)
}

//! Synthetic two-class corpora with controllable cross-corpus shift.
//!
//! Each corpus draws the Negative class from N(-g/2 * e1, sigma^2 I) and the
//! Positive class from N(+g/2 * e1, sigma^2 I), then pushes every sample
//! through a corpus-specific affine map `x -> A x + offset` followed by a
//! per-dimension logistic squash into (0, 1).  Different affine maps for
//! different corpora model recording-condition shift: the class structure is
//! the same underneath, but the observed feature distributions move.
//!
//! Pre-squash and with `A` the identity, the Bayes rule thresholds the first
//! coordinate at zero and attains accuracy Phi(g / (2 sigma)), which gives a
//! closed-form oracle for tests.

use super::{Corpus, CorpusError, Utterance, ValenceLabel};
use crate::scalar::{squash, Real};
use crate::seeding::rng_from_seed;
use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Recipe for one synthetic corpus.  Serializes to JSON with exactly these
/// field names (the shift matrix as nested row arrays).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusSpec {
    pub n_per_class: usize,
    pub dim: usize,
    /// Distance between the two class means (along the first coordinate).
    pub class_gap: f64,
    /// Row-major dim x dim affine map applied to every sample.
    pub shift_matrix: Vec<Vec<f64>>,
    /// Added after the matrix, before the logistic squash.
    pub shift_offset: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticCorpusSpec {
    /// Spec with the identity shift (no rotation, no offset).
    pub fn identity_shift(
        n_per_class: usize,
        dim: usize,
        class_gap: f64,
        noise_sigma: f64,
        seed: u64,
    ) -> Self {
        let shift_matrix = (0..dim)
            .map(|i| (0..dim).map(|j| f64::from(u8::from(i == j))).collect())
            .collect();
        SyntheticCorpusSpec {
            n_per_class,
            dim,
            class_gap,
            shift_matrix,
            shift_offset: vec![0.0; dim],
            noise_sigma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.n_per_class == 0 {
            return Err(CorpusError::InvalidSpec("n_per_class must be >= 1".into()));
        }
        if self.dim == 0 {
            return Err(CorpusError::InvalidSpec("dim must be >= 1".into()));
        }
        if !(self.noise_sigma > 0.0) || !self.noise_sigma.is_finite() {
            return Err(CorpusError::InvalidSpec(format!(
                "noise_sigma must be finite and > 0, got {}",
                self.noise_sigma
            )));
        }
        if !(self.class_gap >= 0.0) || !self.class_gap.is_finite() {
            return Err(CorpusError::InvalidSpec(format!(
                "class_gap must be finite and >= 0, got {}",
                self.class_gap
            )));
        }
        if self.shift_matrix.len() != self.dim
            || self.shift_matrix.iter().any(|row| row.len() != self.dim)
        {
            return Err(CorpusError::InvalidSpec(format!(
                "shift_matrix must be {0} x {0}",
                self.dim
            )));
        }
        if self.shift_offset.len() != self.dim {
            return Err(CorpusError::InvalidSpec(format!(
                "shift_offset must have length {}, got {}",
                self.dim,
                self.shift_offset.len()
            )));
        }
        let det = determinant(&self.shift_matrix);
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(CorpusError::InvalidSpec(format!(
                "shift_matrix is singular (|det| = {:.3e})",
                det.abs()
            )));
        }
        Ok(())
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
fn determinant(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .expect("non-empty range");
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
        }
    }
    det
}

/// Draw a synthetic corpus: all Negative utterances first, then all Positive,
/// each sample consuming `dim` normal variates in coordinate order.
///
/// All arithmetic runs in the target scalar type, so the same spec and seed
/// give identical corpora on every call.
pub fn generate_synthetic<T: Real>(
    spec: &SyntheticCorpusSpec,
) -> Result<Corpus<T>, CorpusError> {
    spec.validate()?;
    let dim = spec.dim;
    let a = Array2::from_shape_fn((dim, dim), |(i, j)| T::cast(spec.shift_matrix[i][j]));
    let offset = Array1::from_shape_fn(dim, |i| T::cast(spec.shift_offset[i]));
    let sigma = T::cast(spec.noise_sigma);
    let half_gap = T::cast(spec.class_gap / 2.0);

    let mut rng = rng_from_seed(spec.seed);
    let mut utterances = Vec::with_capacity(2 * spec.n_per_class);
    for label in [ValenceLabel::Negative, ValenceLabel::Positive] {
        let mean0 = match label {
            ValenceLabel::Negative => -half_gap,
            ValenceLabel::Positive => half_gap,
        };
        for s in 0..spec.n_per_class {
            let mut x = Array1::from_shape_fn(dim, |_| T::standard_normal(&mut rng) * sigma);
            x[0] += mean0;
            let mut y = a.dot(&x) + &offset;
            y.mapv_inplace(squash);
            utterances.push(Utterance {
                id: format!("{}-{s:05}", label.as_str()),
                features: y,
                label,
                raw_label: None,
            });
        }
    }
    Corpus::new("synthetic", "synthetic", dim, utterances)
}

/// Random rotation matrix as a product of Givens rotations, one per
/// coordinate pair, each by an angle uniform in [-strength, strength]
/// radians.  `strength` 0 gives the identity; larger values mix coordinates
/// more aggressively while preserving distances exactly.
pub fn random_rotation(dim: usize, strength: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut r = Array2::<f64>::eye(dim);
    let mut rng = rng_from_seed(seed);
    for i in 0..dim {
        for j in i + 1..dim {
            let theta = (2.0 * rng.random::<f64>() - 1.0) * strength;
            let (sin, cos) = theta.sin_cos();
            // Left-multiply by the Givens rotation in the (i, j) plane.
            for col in 0..dim {
                let ri = r[(i, col)];
                let rj = r[(j, col)];
                r[(i, col)] = cos * ri - sin * rj;
                r[(j, col)] = sin * ri + cos * rj;
            }
        }
    }
    (0..dim).map(|i| (0..dim).map(|j| r[(i, j)]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Phi(1) and Phi(3): standard normal CDF at the Bayes margins used below.
    const PHI_1: f64 = 0.841344746068543;
    const PHI_3: f64 = 0.998650101968370;

    fn bayes_accuracy_on_first_feature(corpus: &Corpus<f64>) -> f64 {
        // Identity shift, zero offset: the pre-squash Bayes rule thresholds
        // coordinate 0 at 0, i.e. the squashed feature at 0.5.
        let correct = corpus
            .utterances()
            .iter()
            .filter(|u| {
                let predicted_positive = u.features[0] > 0.5;
                (u.label == ValenceLabel::Positive) == predicted_positive
            })
            .count();
        correct as f64 / corpus.len() as f64
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticCorpusSpec::identity_shift(50, 4, 2.0, 1.0, 99);
        let a: Corpus<f64> = generate_synthetic(&spec).unwrap();
        let b: Corpus<f64> = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        let other = SyntheticCorpusSpec { seed: 100, ..spec };
        let c: Corpus<f64> = generate_synthetic(&other).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn features_stay_strictly_inside_the_unit_interval() {
        let mut spec = SyntheticCorpusSpec::identity_shift(200, 5, 4.0, 2.0, 7);
        spec.shift_offset = vec![3.0, -3.0, 0.0, 10.0, -10.0];
        let c64: Corpus<f64> = generate_synthetic(&spec).unwrap();
        for u in c64.utterances() {
            assert!(u.features.iter().all(|&x| x > 0.0 && x < 1.0));
        }
        let c32: Corpus<f32> = generate_synthetic(&spec).unwrap();
        for u in c32.utterances() {
            assert!(u.features.iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn class_sizes_and_order_are_fixed() {
        let spec = SyntheticCorpusSpec::identity_shift(3, 2, 1.0, 1.0, 1);
        let c: Corpus<f64> = generate_synthetic(&spec).unwrap();
        assert_eq!(c.len(), 6);
        let labels = c.labels();
        assert!(labels[..3].iter().all(|&l| l == ValenceLabel::Negative));
        assert!(labels[3..].iter().all(|&l| l == ValenceLabel::Positive));
        assert_eq!(c.utterances()[0].id, "neg-00000");
        assert_eq!(c.utterances()[3].id, "pos-00000");
    }

    #[test]
    fn zero_gap_classes_are_statistically_identical() {
        let spec = SyntheticCorpusSpec::identity_shift(2000, 2, 0.0, 1.0, 13);
        let c: Corpus<f64> = generate_synthetic(&spec).unwrap();
        let mean_of = |label| {
            let xs: Vec<f64> = c
                .utterances()
                .iter()
                .filter(|u| u.label == label)
                .map(|u| u.features[0])
                .collect();
            xs.iter().sum::<f64>() / xs.len() as f64
        };
        let gap = (mean_of(ValenceLabel::Negative) - mean_of(ValenceLabel::Positive)).abs();
        // Squashed N(0,1) has stddev < 0.25; 4 standard errors of the
        // difference of two 2000-sample means.
        assert!(gap < 4.0 * 0.25 * (2.0 / 2000.0_f64).sqrt(), "gap {gap}");
    }

    #[test]
    fn bayes_rule_accuracy_matches_the_gaussian_oracle() {
        // class_gap 6, sigma 1 -> Phi(3); class_gap 2 -> Phi(1).
        let spec = SyntheticCorpusSpec::identity_shift(50_000, 3, 6.0, 1.0, 21);
        let c: Corpus<f64> = generate_synthetic(&spec).unwrap();
        let acc = bayes_accuracy_on_first_feature(&c);
        assert!((acc - PHI_3).abs() < 0.003, "acc {acc} vs {PHI_3}");

        let spec = SyntheticCorpusSpec::identity_shift(50_000, 3, 2.0, 1.0, 22);
        let c: Corpus<f64> = generate_synthetic(&spec).unwrap();
        let acc = bayes_accuracy_on_first_feature(&c);
        assert!((acc - PHI_1).abs() < 0.005, "acc {acc} vs {PHI_1}");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let good = SyntheticCorpusSpec::identity_shift(5, 3, 1.0, 1.0, 0);
        assert!(good.validate().is_ok());
        for bad in [
            SyntheticCorpusSpec { n_per_class: 0, ..good.clone() },
            SyntheticCorpusSpec { noise_sigma: 0.0, ..good.clone() },
            SyntheticCorpusSpec { noise_sigma: f64::NAN, ..good.clone() },
            SyntheticCorpusSpec { class_gap: -1.0, ..good.clone() },
            SyntheticCorpusSpec { shift_offset: vec![0.0; 2], ..good.clone() },
            SyntheticCorpusSpec { shift_matrix: vec![vec![0.0; 3]; 3], ..good.clone() },
            SyntheticCorpusSpec { shift_matrix: vec![vec![0.0; 2]; 3], ..good.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(CorpusError::InvalidSpec(_))), "{bad:?}");
        }
    }

    #[test]
    fn offsets_shift_the_squashed_features_monotonically() {
        let base = SyntheticCorpusSpec::identity_shift(500, 2, 1.0, 1.0, 31);
        let mut shifted = base.clone();
        shifted.shift_offset = vec![1.0, 0.0];
        let a: Corpus<f64> = generate_synthetic(&base).unwrap();
        let b: Corpus<f64> = generate_synthetic(&shifted).unwrap();
        // Same seed, same normal draws; the offset moves every sample's first
        // coordinate before the monotone squash.
        for (ua, ub) in a.utterances().iter().zip(b.utterances()) {
            assert!(ub.features[0] > ua.features[0]);
            assert_eq!(ub.features[1], ua.features[1]);
        }
    }

    #[test]
    fn random_rotation_is_orthogonal() {
        let r = random_rotation(6, 0.8, 5);
        for i in 0..6 {
            for j in 0..6 {
                let dot: f64 = (0..6).map(|k| r[k][i] * r[k][j]).sum();
                let want = f64::from(u8::from(i == j));
                assert!((dot - want).abs() < 1e-9, "R^T R [{i}][{j}] = {dot}");
            }
        }
        assert!((determinant(&r) - 1.0).abs() < 1e-9);

        let id = random_rotation(4, 0.0, 9);
        for (i, row) in id.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                assert!((x - f64::from(u8::from(i == j))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn determinant_matches_known_values() {
        assert!((determinant(&[vec![2.0, 0.0], vec![0.0, 3.0]]) - 6.0).abs() < 1e-12);
        assert!((determinant(&[vec![0.0, 1.0], vec![1.0, 0.0]]) + 1.0).abs() < 1e-12);
        assert_eq!(determinant(&[vec![1.0, 2.0], vec![2.0, 4.0]]), 0.0);
    }

    #[test]
    fn spec_round_trips_through_json_field_names() {
        let spec = SyntheticCorpusSpec::identity_shift(5, 2, 1.0, 0.5, 77);
        let json = serde_json::to_string(&spec).unwrap();
        for field in [
            "n_per_class",
            "dim",
            "class_gap",
            "shift_matrix",
            "shift_offset",
            "noise_sigma",
            "seed",
        ] {
            assert!(json.contains(field), "missing {field} in {json}");
        }
        let back: SyntheticCorpusSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }
}

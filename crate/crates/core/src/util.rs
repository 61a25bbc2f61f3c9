//! Small internal helpers shared by the training code.

use crate::scalar::Real;
use ndarray::{Array2, ArrayView2};

/// Copy the given rows of `data` into a fresh matrix, in `idx` order.
pub(crate) fn gather_rows<T: Real>(data: ArrayView2<T>, idx: &[usize]) -> Array2<T> {
    let mut out = Array2::zeros((idx.len(), data.ncols()));
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).assign(&data.row(i));
    }
    out
}

/// log(sum(exp(xs))) without overflow.
pub(crate) fn logsumexp<T: Real>(xs: &[T]) -> T {
    let m = xs.iter().cloned().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    let s: T = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_naive() {
        let xs = [0.0_f64, 1.0, -2.0, 3.5];
        let naive: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((logsumexp(&xs) - naive).abs() < 1e-12);
    }

    #[test]
    fn logsumexp_survives_large_inputs() {
        let xs = [1000.0_f64, 1000.0];
        assert!((logsumexp(&xs) - (1000.0 + 2.0_f64.ln())).abs() < 1e-9);
    }
}

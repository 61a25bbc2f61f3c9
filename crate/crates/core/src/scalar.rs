//! Scalar abstraction for the numeric kernels.
//!
//! Everything numeric in this crate is generic over [`Real`], which is
//! implemented for `f32` and `f64`. The trait folds in the num-traits,
//! ndarray, rustfft and serde bounds the kernels need, plus seeded sampling
//! hooks so random draws stay on one code path per concrete type.

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftNum;
use serde::{de::DeserializeOwned, Serialize};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar: f32 or f64.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Display
    + Debug
    + LinalgScalar
    + ScalarOperand
    + FftNum
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn cast(x: f64) -> Self;

    /// Lossy widening to `f64`.
    fn as_f64(self) -> f64;

    /// One draw from N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from U[0, 1).
    fn uniform_01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Largest |z| for which `sigmoid(z)` is still strictly inside (0, 1)
    /// at this precision. Used by [`squash`] to keep outputs open-interval.
    fn logistic_arg_limit() -> Self;
}

impl Real for f32 {
    fn cast(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
    fn uniform_01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f32>()
    }
    fn logistic_arg_limit() -> Self {
        15.0
    }
}

impl Real for f64 {
    fn cast(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
    fn uniform_01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f64>()
    }
    fn logistic_arg_limit() -> Self {
        36.0
    }
}

/// Logistic function g(x) = 1 / (1 + e^{-x}).
///
/// Unclamped: under saturation the result can round to exactly 0.0 or 1.0,
/// which is what the Bernoulli-unit conditionals expect.
pub fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Logistic squash with the argument clamped to the precision-dependent
/// range where the output stays strictly inside (0, 1).
pub fn squash<T: Real>(z: T) -> T {
    let lim = T::logistic_arg_limit();
    sigmoid(z.min(lim).max(-lim))
}

/// Numerically stable log(1 + e^x).
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

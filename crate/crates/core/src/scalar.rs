//! Floating-point abstraction for the numeric core.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Scalar type for the geometry, field, controller, and policy math.
///
/// Implemented for `f32` and `f64`. The simulation engine runs on `f64`; the
/// math modules stay generic so narrower precision can be swapped in.
pub trait Scalar:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + core::fmt::Debug
    + core::fmt::Display
    + core::iter::Sum
    + Copy
    + Send
    + Sync
    + 'static
{
    /// Conversion from `f64`, used for constants and configuration values.
    fn from_f64_lossy(v: f64) -> Self;

    /// Widening conversion to `f64` for reporting.
    fn to_f64_lossy(self) -> f64;

    /// Draws from the standard normal distribution.
    fn sample_std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draws uniformly from `[0, 1)`.
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f32 {
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }

    fn to_f64_lossy(self) -> f64 {
        f64::from(self)
    }

    fn sample_std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random()
    }
}

impl Scalar for f64 {
    fn from_f64_lossy(v: f64) -> Self {
        v
    }

    fn to_f64_lossy(self) -> f64 {
        self
    }

    fn sample_std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random()
    }
}

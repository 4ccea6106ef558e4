//! Floating-point scalar abstraction used throughout the crate.
//!
//! All numerical routines are generic over [`Scalar`], which is satisfied by
//! `f32` and `f64`. Simulation routines additionally need to draw standard
//! variates of the scalar type; [`SampleScalar`] bundles those distribution
//! bounds so they do not have to be restated on every function.

use std::fmt::{Debug, Display};
use std::iter::{Product, Sum};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand::distr::{Distribution, Open01, StandardUniform};
use rand_distr::{Exp1, StandardNormal};

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum<Self>
    + Product<Self>
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    ///
    /// Panics only if the conversion is unrepresentable, which cannot happen
    /// for finite constants and the supported types.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 must convert to scalar")
    }

    /// Widens this scalar to `f64` (exact for `f32` and `f64`).
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum<T>
        + Product<T>
        + Display
        + Debug
        + Send
        + Sync
        + 'static
{
}

/// Scalar type that can be drawn from the standard sampling distributions.
///
/// The distribution bounds live on the blanket impl, so generic code only
/// needs a single `F: SampleScalar` bound to draw normal, exponential, or
/// uniform variates of type `F`.
pub trait SampleScalar: Scalar {
    /// One standard normal variate.
    fn sample_standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Self;

    /// One unit-rate exponential variate.
    fn sample_exp1<R: rand::Rng + ?Sized>(rng: &mut R) -> Self;

    /// One uniform variate on the open interval `(0, 1)`.
    fn sample_open01<R: rand::Rng + ?Sized>(rng: &mut R) -> Self;

    /// One uniform variate on the half-open interval `[0, 1)`.
    fn sample_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> Self;
}

impl<T> SampleScalar for T
where
    T: Scalar,
    StandardNormal: Distribution<T>,
    Exp1: Distribution<T>,
    Open01: Distribution<T>,
    StandardUniform: Distribution<T>,
{
    fn sample_standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    fn sample_exp1<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(Exp1)
    }

    fn sample_open01<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(Open01)
    }

    fn sample_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardUniform)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generic_roundtrip<F: Scalar>(x: f64) -> f64 {
        F::of(x).to_f64_lossy()
    }

    #[test]
    fn conversions_roundtrip_for_both_widths() {
        assert_eq!(generic_roundtrip::<f64>(1.25), 1.25);
        assert_eq!(generic_roundtrip::<f32>(1.25), 1.25);
    }

    fn draws_compile<F: SampleScalar>(rng: &mut impl rand::Rng) -> F {
        let n = F::sample_standard_normal(rng);
        let e = F::sample_exp1(rng);
        let u = F::sample_open01(rng);
        let v = F::sample_unit(rng);
        assert!(e > F::zero() && u > F::zero() && u < F::one() && v >= F::zero());
        n + e + u + v
    }

    #[test]
    fn sampling_bounds_are_usable_for_both_widths() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let a: f64 = draws_compile(&mut rng);
        let b: f32 = draws_compile(&mut rng);
        assert!(a.is_finite());
        assert!(b.is_finite());
    }
}

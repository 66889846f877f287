//! Scalar abstraction for the floating-point core.
//!
//! All array, codebook and protocol math is generic over [`Scalar`], which is
//! implemented for `f32` and `f64`. The harness instantiates everything at
//! `f64`; the `*64` aliases at the crate root pin those concrete types.

use std::fmt;
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

/// Complex value over a generic scalar.
pub type Cx<T> = Complex<T>;

/// Floating-point scalar usable throughout the simulator.
pub trait Scalar:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    /// Draw from the standard normal distribution.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw uniformly from `[0, 1)`.
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Conversion from `f64` for constants and config values.
    fn from_f64_lossy(value: f64) -> Self;

    /// Conversion to `f64` for reporting.
    fn to_f64_lossy(self) -> f64;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.sample(StandardNormal)
            }

            #[inline]
            fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.gen()
            }

            #[inline]
            fn from_f64_lossy(value: f64) -> Self {
                value as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// `sum_n a(n) * conj(s(n))`, the effective response of codeword `s` seen
/// from direction response `a`. Lengths must agree (checked by callers).
#[inline]
pub fn inner_product_conj<T: Scalar>(a: &[Cx<T>], s: &[Cx<T>]) -> Cx<T> {
    debug_assert_eq!(a.len(), s.len());
    a.iter()
        .zip(s.iter())
        .fold(Cx::new(T::zero(), T::zero()), |acc, (&x, &y)| {
            acc + x * y.conj()
        })
}

//! Floating point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use nalgebra as na;
use num_traits as nt;

/// Real scalar usable by the assembly, factorization, Krylov and spectral code.
///
/// Implemented for `f32` and `f64`.
pub trait Real:
    nt::Float
    + na::Scalar
    + nt::FloatConst
    + nt::FromPrimitive
    + nt::ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts a literal; panics only if the target type cannot hold it at all.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("literal not representable")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        <Self as nt::FromPrimitive>::from_usize(n).expect("integer not representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <Self as nt::ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Scalars that can also be handed to nalgebra's dense decompositions.
///
/// Kept separate from [`Real`]: `RealField` and `Float` export methods with
/// identical names, so only the dense wrappers carry both bounds.
pub trait DenseReal: Real + na::RealField {}

impl DenseReal for f32 {}
impl DenseReal for f64 {}

/// Euclidean norm.
pub fn norm2<T: Real>(x: &[T]) -> T {
    // scaled accumulation keeps f32 runs from overflowing on large residuals
    let scale = max_abs(x);
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let s: T = x
        .iter()
        .map(|v| {
            let t = *v / scale;
            t * t
        })
        .sum();
    scale * s.sqrt()
}

pub fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| *a * *b).sum()
}

/// `y += a * x`
pub fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * *xi;
    }
}

pub fn max_abs<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

pub fn all_finite<T: Real>(x: &[T]) -> bool {
    x.iter().all(|v| v.is_finite())
}

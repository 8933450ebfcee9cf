//! Scalar abstraction shared by every solver in the crate.
//!
//! All numerical code is written against [`Real`], which is satisfied by `f32`
//! and `f64`. Complex quantities are carried as [`num_complex::Complex<T>`].

use nalgebra::RealField;
use num_traits::ToPrimitive;

/// A real floating-point scalar usable by the solvers.
pub trait Real: RealField + Copy + ToPrimitive {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the working precision.
#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

#[inline]
pub(crate) fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `|z|` without overflow.
#[inline]
pub(crate) fn modulus<T: Real>(z: num_complex::Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// Machine epsilon of `T`.
#[inline]
pub(crate) fn eps<T: Real>() -> T {
    T::default_epsilon()
}

/// `max(floor, factor * eps)`: a tolerance that stays meaningful in `f32`.
#[inline]
pub(crate) fn tol_floor<T: Real>(floor: f64, factor: f64) -> T {
    let f: T = lit(floor);
    let e: T = eps::<T>() * lit(factor);
    if f > e {
        f
    } else {
        e
    }
}

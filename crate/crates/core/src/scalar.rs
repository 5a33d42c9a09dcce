//! Scalar abstraction shared by every numeric module.
//!
//! Field values, norms and energies are generic over [`Scalar`]; the crate
//! root re-exports `f64` aliases for the common case. Tolerances in the test
//! suites assume `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar usable as a lattice function value.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into the scalar type.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a scalar to `f64` (lossless for `f32`/`f64`).
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), carry: T::zero() }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

impl<T: Scalar> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn ksum<T: Scalar, I: IntoIterator<Item = T>>(iter: I) -> T {
    iter.into_iter().collect::<CompensatedSum<T>>().value()
}

/// `|x|^p` with an integer fast path, precomputed once per exponent.
#[derive(Debug, Clone, Copy)]
pub struct AbsPow<T> {
    exp: T,
    int: Option<i32>,
}

impl<T: Scalar> AbsPow<T> {
    pub fn new(exp: T) -> Self {
        let int = if exp.fract() == T::zero() && exp.abs() <= lit(64.0) {
            exp.to_i32()
        } else {
            None
        };
        Self { exp, int }
    }

    pub fn exponent(&self) -> T {
        self.exp
    }

    /// `|x|^p`, with `0^p = 0` for `p > 0`.
    #[inline]
    pub fn abs_pow(&self, x: T) -> T {
        let a = x.abs();
        match self.int {
            Some(1) => a,
            Some(2) => a * a,
            Some(n) => a.powi(n),
            None => a.powf(self.exp),
        }
    }

    /// `|x|^(p-1) sign(x)`; zero at `x = 0` for every `p`.
    #[inline]
    pub fn signed_pow_m1(&self, x: T) -> T {
        if x == T::zero() {
            return T::zero();
        }
        let a = x.abs();
        let m = match self.int {
            Some(1) => T::one(),
            Some(2) => a,
            Some(3) => a * a,
            Some(n) => a.powi(n - 1),
            None => a.powf(self.exp - T::one()),
        };
        if x > T::zero() {
            m
        } else {
            -m
        }
    }
}

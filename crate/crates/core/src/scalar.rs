//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Real scalar the samplers and estimators are generic over: `f32` or `f64`.
///
/// Random draws go through this trait so that generic code does not need
/// `Distribution<T>` bounds on every signature.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Uniform draw on `[0, 1)`.
    fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw from `Normal(mean, sd^2)`.
    fn normal<R: Rng + ?Sized>(rng: &mut R, mean: Self, sd: Self) -> Self;

    /// Lossy conversion from `f64`; used for literals.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn from_count(v: usize) -> Self {
        Self::from_usize(v).expect("count representable")
    }

    fn from_stat(v: i64) -> Self {
        Self::from_i64(v).expect("statistic representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f32>()
    }

    fn normal<R: Rng + ?Sized>(rng: &mut R, mean: Self, sd: Self) -> Self {
        let z: f32 = StandardNormal.sample(rng);
        mean + sd * z
    }
}

impl Real for f64 {
    fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f64>()
    }

    fn normal<R: Rng + ?Sized>(rng: &mut R, mean: Self, sd: Self) -> Self {
        let z: f64 = StandardNormal.sample(rng);
        mean + sd * z
    }
}

/// `log(2 cosh x)` without overflow for large `|x|`.
pub fn log_two_cosh<T: Real>(x: T) -> T {
    let a = x.abs();
    a + (-(a + a)).exp().ln_1p()
}

/// `log(exp(a) + exp(b))`.
pub fn log_add_exp<T: Real>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

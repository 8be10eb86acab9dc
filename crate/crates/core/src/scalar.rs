//! The floating-point scalar the signal chain is generic over.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point: `f32` or `f64`.
///
/// Everything numeric in the crate is written against this trait. The
/// `f64` instantiation is the reference one; `f32` trades precision
/// (cepstral round-off is then around `1e-6`, not `1e-12`) for memory.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant, rounding to the nearest representable value.
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 always converts to a float scalar")
    }

    /// Widens (or keeps) the value as `f64`.
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("float scalar always converts to f64")
    }

    /// Converts a count or index.
    fn from_usize_lossy(v: usize) -> Self {
        Self::lit(v as f64)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

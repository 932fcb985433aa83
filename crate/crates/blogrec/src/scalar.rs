//! Scalar abstraction for the numeric kernels.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the similarity, factorization-machine, and scoring
/// kernels are generic over. Implemented for `f32` and `f64` via the blanket
/// impl; code elsewhere never matches on the concrete type.
pub trait Real:
    Float
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
}

impl<T> Real for T where
    T: Float
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
}

/// Convert a finite `f64` constant into the working scalar type.
pub(crate) fn real<S: Real>(v: f64) -> S {
    S::from_f64(v).expect("finite f64 converts to scalar")
}

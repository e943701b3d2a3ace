//! Scalar abstraction used by the numeric kernels.
//!
//! Geometry, the circuit solver, and the estimators are generic over [`Real`]
//! so the same code paths run in `f32` or `f64`. File formats and the CLI
//! pipeline fix the scalar to `f64`; single-precision aliases live at the
//! crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar for the math kernels.
///
/// The supertraits cover everything the kernels need: ordinary float
/// arithmetic, π and friends, conversion from literal constants, and enough
/// marker traits to move values across threads.
pub trait Real:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Convert an `f64` constant into the working scalar.
///
/// Panics only if the scalar type cannot represent ordinary constants, which
/// cannot happen for `f32`/`f64`.
#[inline]
pub fn real<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("constant must be representable in the scalar type")
}

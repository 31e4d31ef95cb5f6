//! Scalar abstraction for the numeric kernels.
//!
//! Everything numerical in this crate is generic over [`Real`], so the same
//! estimator code runs in `f64` (the default used by the CLI and the
//! simulation harness) or `f32`. Concrete aliases live at the crate root.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from `f64`; rounds once for `f32`.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Real")
    }

    /// Exact conversion from a (small) count.
    fn from_count(x: usize) -> Self {
        Self::from_usize(x).expect("count fits in Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}

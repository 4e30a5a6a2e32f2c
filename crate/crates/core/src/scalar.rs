//! Scalar abstraction shared by the numeric kernels.
//!
//! Tensors, layers, the optimizer, K-Means and the peak search are written
//! against [`Scalar`] so that they run unchanged on `f32` or `f64`. The
//! pipeline itself instantiates them at `f64` (see the aliases at the crate
//! root); gradient checks rely on the extra precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from a literal or an `f64` intermediate.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::of(n as f64)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

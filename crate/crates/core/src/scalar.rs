//! Scalar abstraction for probabilities.
//!
//! Every numeric path in the crate is written against [`Prob`] so the same
//! engine runs in `f64` (the default everywhere) or `f32`.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use std::fmt::{Debug, Display};
use std::iter::Sum;

pub trait Prob: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Uniform draw from `[0, 1)`.
    fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }

    fn half() -> Self {
        Self::of(0.5)
    }
}

impl Prob for f64 {
    fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f64>()
    }
}

impl Prob for f32 {
    fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f32>()
    }
}

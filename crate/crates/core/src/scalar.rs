use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Real type the retrieval scoring is written against (`f32` or `f64`).
pub trait Scalar: Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {
    fn from_u32(v: u32) -> Self {
        <Self as FromPrimitive>::from_u32(v).expect("u32 converts to a float")
    }

    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 converts to a float")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

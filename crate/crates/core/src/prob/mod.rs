//! Seeded randomness and the conjugate-distribution kernels the models are
//! built from.

pub mod categorical;
pub mod dirichlet;
pub mod gauss;
pub mod giw;
pub mod rng;
pub mod seeding;
pub mod simplex;

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::ToPrimitive;

pub use categorical::{sample_categorical, sample_log_weights};
pub use dirichlet::{sample_dirichlet_posterior, stick_breaking};
pub use gauss::{gaussian_logpdf, sample_gaussian, GaussParams, MvNormal};
pub use giw::{giw_posterior, sample_gauss_params, GiwHyper};

/// Floating-point type the linear-algebra kernels are generic over.
///
/// Random variates are always drawn in `f64` and narrowed with [`Scalar::cast`],
/// so `f32` and `f64` instantiations consume identical random streams.
pub trait Scalar: RealField + Copy + ToPrimitive + Display + Debug + Send + Sync {
    fn cast(x: f64) -> Self;

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("float to f64")
    }
}

impl Scalar for f64 {
    fn cast(x: f64) -> Self {
        x
    }
}

impl Scalar for f32 {
    fn cast(x: f64) -> Self {
        x as f32
    }
}

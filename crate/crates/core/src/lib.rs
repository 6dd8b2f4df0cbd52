//! Two-agent symbol emergence: multimodal cross-situational categorization
//! coupled through a Metropolis-Hastings naming game.
//!
//! Each agent clusters four sensory modalities (action, position, object,
//! color) with truncated-stick-breaking Gaussian mixtures and learns a
//! word distribution per (modality, category) pair. The agents agree on a
//! shared four-word utterance per scene by proposing words to each other and
//! accepting them with a Metropolis-Hastings rule. After training, one agent
//! can describe a scene and the other predicts the observations it implies.
//!
//! The probability kernels are generic over [`Scalar`] (`f32`/`f64`); the
//! model layers above them work in `f64`, exposed through the aliases below.

pub mod agent;
pub mod crossmodal;
pub mod data;
pub mod error;
pub mod game;
pub mod h2h;
pub mod metrics;
pub mod modality;
pub mod prob;

pub use error::{Error, Result};
pub use modality::{ByModality, Modality};
pub use prob::rng::Rng;
pub use prob::simplex::Simplex;
pub use prob::Scalar;

/// Gaussian emission parameters in double precision.
pub type GaussParams = prob::gauss::GaussParams<f64>;
/// Gaussian emission parameters in single precision.
pub type GaussParams32 = prob::gauss::GaussParams<f32>;
/// Gaussian-Inverse-Wishart hyperparameters in double precision.
pub type GiwHyper = prob::giw::GiwHyper<f64>;
/// Gaussian-Inverse-Wishart hyperparameters in single precision.
pub type GiwHyper32 = prob::giw::GiwHyper<f32>;
/// Prepared (Cholesky-factored) multivariate normal in double precision.
pub type MvNormal = prob::gauss::MvNormal<f64>;
/// Prepared (Cholesky-factored) multivariate normal in single precision.
pub type MvNormal32 = prob::gauss::MvNormal<f32>;

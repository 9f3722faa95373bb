//! Wavelet-domain diffusion-autoencoder face morphing and biometric
//! vulnerability metrics.
//!
//! The morph pipeline decomposes both subjects with a single-level Haar
//! transform, morphs the LL planes through a diffusion autoencoder
//! (semantic encoder + deterministic DDIM inversion, lerp/slerp latent
//! blending, DDIM decoding), averages the detail planes and inverts the
//! transform.

pub mod diffusion;
pub mod error;
pub mod image;
pub mod io;
pub mod latent;
pub mod metrics;
mod nn;
pub mod pipeline;
pub mod wavelet;

pub use error::{Error, ErrorClass, Result};
pub use image::ImageBuffer;
pub use pipeline::{morph, ModelBundle, MorphMode, MorphRequest};
pub use wavelet::{dwt_haar, iwt_haar, Band, SubBands};

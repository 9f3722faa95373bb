//! Forward noising and deterministic (η = 0) DDIM sampling and inversion.
//!
//! Tensors live in *model space*: pixel-unit images in `[0, 1]` are mapped
//! to `[-1, 1]` by [`to_model_space`] before diffusion and back by
//! [`from_model_space`] afterwards.

mod denoiser;
mod mlp;
mod schedule;
mod train;

pub use denoiser::{
    make_analytic_denoiser, AnalyticGaussianDenoiser, CountingDenoiser, Denoiser, GaussianMean,
    ZeroDenoiser,
};
pub use mlp::{sinusoidal_embedding, DenoiserLayout, TrainableDenoiser, TIME_EMBEDDING_DIM};
pub use schedule::{make_schedule, NoiseSchedule, ScheduleParams};
pub use train::{
    loss_and_gradient, train_denoiser, Gradient, Optimizer, TrainConfig, TrainOutcome, TrainSample,
};

use crate::error::Result;
use crate::image::ImageBuffer;
use crate::latent::SemanticCode;

/// `[0, 1]` pixel units → `[-1, 1]` model space.
pub fn to_model_space(img: &ImageBuffer) -> ImageBuffer {
    img.map(|v| 2.0 * v - 1.0)
}

/// Inverse of [`to_model_space`].
pub fn from_model_space(x: &ImageBuffer) -> ImageBuffer {
    x.map(|v| 0.5 * (v + 1.0))
}

/// `x_t = √ᾱ_t · x₀ + √(1 − ᾱ_t) · ε`.
pub fn forward_noising(
    x0: &ImageBuffer,
    t: usize,
    eps: &ImageBuffer,
    sched: &NoiseSchedule,
) -> Result<ImageBuffer> {
    sched.check_step(t, 0)?;
    x0.ensure_same_shape(eps, "forward_noising x0 vs eps")?;
    if t == 0 {
        return Ok(x0.clone());
    }
    let ab = sched.alpha_bar(t);
    let (sa, sn) = (ab.sqrt(), (1.0 - ab).sqrt());
    let data = x0
        .data()
        .iter()
        .zip(eps.data())
        .map(|(x, e)| sa * x + sn * e)
        .collect();
    x0.with_data(data)
}

/// Moves `x` from noise level `from` to `to` along the DDIM trajectory
/// determined by the noise estimate `eps`:
/// `x_to = √ᾱ_to · (x − √(1 − ᾱ_from)·ε)/√ᾱ_from + √(1 − ᾱ_to)·ε`.
///
/// Used in both directions: `from > to` samples, `from < to` inverts.
pub fn ddim_transition(
    x: &ImageBuffer,
    eps: &ImageBuffer,
    from: usize,
    to: usize,
    sched: &NoiseSchedule,
) -> Result<ImageBuffer> {
    x.ensure_same_shape(eps, "ddim noise estimate")?;
    let (a_from, a_to) = (sched.alpha_bar(from), sched.alpha_bar(to));
    let (sa_from, sn_from) = (a_from.sqrt(), (1.0 - a_from).sqrt());
    let (sa_to, sn_to) = (a_to.sqrt(), (1.0 - a_to).sqrt());
    let data = x
        .data()
        .iter()
        .zip(eps.data())
        .map(|(&x, &e)| sa_to * ((x - sn_from * e) / sa_from) + sn_to * e)
        .collect();
    x.with_data(data)
}

/// One deterministic step `x_t → x_{t−1}`.
pub fn ddim_step<D: Denoiser + ?Sized>(
    x_t: &ImageBuffer,
    t: usize,
    den: &D,
    z_sem: Option<&SemanticCode>,
    sched: &NoiseSchedule,
) -> Result<ImageBuffer> {
    sched.check_step(t, 1)?;
    let eps = den.predict_noise(x_t, t, z_sem)?;
    ddim_transition(x_t, &eps, t, t - 1, sched)
}

/// Runs the sampler from `x_T` down to an `x₀` estimate over a uniform
/// `steps`-long sub-sequence of `T..1`.
pub fn ddim_decode<D: Denoiser + ?Sized>(
    x_big_t: &ImageBuffer,
    z_sem: Option<&SemanticCode>,
    den: &D,
    sched: &NoiseSchedule,
    steps: usize,
) -> Result<ImageBuffer> {
    let taus = sched.sub_sequence(steps)?;
    let mut x = x_big_t.clone();
    for k in (0..taus.len()).rev() {
        let from = taus[k];
        let to = if k == 0 { 0 } else { taus[k - 1] };
        let eps = den.predict_noise(&x, from, z_sem)?;
        x = ddim_transition(&x, &eps, from, to, sched)?;
    }
    Ok(x)
}

/// Deterministic inversion `x₀ → x_T` over the same sub-sequence as
/// [`ddim_decode`]. Each move `τ_{k−1} → τ_k` uses the noise estimate at
/// the current sample with the destination step, so decode and encode query
/// the denoiser at identical step indices.
pub fn ddim_encode<D: Denoiser + ?Sized>(
    x0: &ImageBuffer,
    z_sem: Option<&SemanticCode>,
    den: &D,
    sched: &NoiseSchedule,
    steps: usize,
) -> Result<ImageBuffer> {
    let taus = sched.sub_sequence(steps)?;
    let mut x = x0.clone();
    let mut from = 0;
    for &to in &taus {
        let eps = den.predict_noise(&x, to, z_sem)?;
        x = ddim_transition(&x, &eps, from, to, sched)?;
        from = to;
    }
    Ok(x)
}

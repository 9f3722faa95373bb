use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::diffusion::NoiseSchedule;
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::latent::SemanticCode;

/// A noise predictor ε(x_t, t, z_sem).
///
/// Implementations must be deterministic: identical inputs give identical
/// outputs. The returned tensor has the shape of `x_t`.
pub trait Denoiser: Send + Sync {
    fn predict_noise(
        &self,
        x_t: &ImageBuffer,
        t: usize,
        z_sem: Option<&SemanticCode>,
    ) -> Result<ImageBuffer>;
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn predict_noise(
        &self,
        x_t: &ImageBuffer,
        t: usize,
        z: Option<&SemanticCode>,
    ) -> Result<ImageBuffer> {
        (**self).predict_noise(x_t, t, z)
    }
}

impl<D: Denoiser + ?Sized> Denoiser for Box<D> {
    fn predict_noise(
        &self,
        x_t: &ImageBuffer,
        t: usize,
        z: Option<&SemanticCode>,
    ) -> Result<ImageBuffer> {
        (**self).predict_noise(x_t, t, z)
    }
}

impl<D: Denoiser + ?Sized> Denoiser for std::sync::Arc<D> {
    fn predict_noise(
        &self,
        x_t: &ImageBuffer,
        t: usize,
        z: Option<&SemanticCode>,
    ) -> Result<ImageBuffer> {
        (**self).predict_noise(x_t, t, z)
    }
}

/// Always predicts zero noise. DDIM with this predictor is a pure rescaling
/// chain, which makes encode/decode exactly invertible.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDenoiser;

impl Denoiser for ZeroDenoiser {
    fn predict_noise(
        &self,
        x_t: &ImageBuffer,
        _t: usize,
        _z: Option<&SemanticCode>,
    ) -> Result<ImageBuffer> {
        Ok(x_t.map(|_| 0.0))
    }
}

/// Data mean for [`AnalyticGaussianDenoiser`].
#[derive(Debug, Clone, PartialEq)]
pub enum GaussianMean {
    Scalar(f64),
    /// One mean per tensor element.
    PerElement(Vec<f64>),
}

/// Exact MMSE noise predictor for data `x₀ ~ N(μ, σ₀² I)`:
///
/// ```text
/// x̂₀ = μ + √ᾱ_t σ₀² / (ᾱ_t σ₀² + 1 − ᾱ_t) · (x_t − √ᾱ_t μ)
/// ε̂  = (x_t − √ᾱ_t x̂₀) / √(1 − ᾱ_t)
/// ```
#[derive(Debug, Clone)]
pub struct AnalyticGaussianDenoiser {
    mean: GaussianMean,
    sigma0_sq: f64,
    schedule: NoiseSchedule,
}

pub fn make_analytic_denoiser(
    mean: GaussianMean,
    sigma0_sq: f64,
    schedule: &NoiseSchedule,
) -> Result<AnalyticGaussianDenoiser> {
    if !(sigma0_sq > 0.0 && sigma0_sq.is_finite()) {
        return Err(Error::invalid(
            "sigma0_sq",
            format!("{sigma0_sq} must be positive"),
        ));
    }
    if let GaussianMean::PerElement(m) = &mean {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mu", "non-finite mean"));
        }
    }
    Ok(AnalyticGaussianDenoiser {
        mean,
        sigma0_sq,
        schedule: schedule.clone(),
    })
}

impl AnalyticGaussianDenoiser {
    pub fn sigma0_sq(&self) -> f64 {
        self.sigma0_sq
    }

    /// Posterior mean E[x₀ | x_t].
    pub fn predict_x0(&self, x_t: &ImageBuffer, t: usize) -> Result<ImageBuffer> {
        self.schedule.check_step(t, 1)?;
        if let GaussianMean::PerElement(m) = &self.mean {
            if m.len() != x_t.len() {
                return Err(Error::shape(format!(
                    "analytic denoiser mean has {} elements, input has {}",
                    m.len(),
                    x_t.len()
                )));
            }
        }
        let ab = self.schedule.alpha_bar(t);
        let sa = ab.sqrt();
        let gain = sa * self.sigma0_sq / (ab * self.sigma0_sq + 1.0 - ab);
        let data = x_t
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let mu = match &self.mean {
                    GaussianMean::Scalar(m) => *m,
                    GaussianMean::PerElement(m) => m[i],
                };
                mu + gain * (x - sa * mu)
            })
            .collect();
        x_t.with_data(data)
    }
}

impl Denoiser for AnalyticGaussianDenoiser {
    fn predict_noise(
        &self,
        x_t: &ImageBuffer,
        t: usize,
        _z: Option<&SemanticCode>,
    ) -> Result<ImageBuffer> {
        let x0 = self.predict_x0(x_t, t)?;
        let ab = self.schedule.alpha_bar(t);
        let (sa, sn) = (ab.sqrt(), (1.0 - ab).sqrt());
        let data = x_t
            .data()
            .iter()
            .zip(x0.data())
            .map(|(&x, &x0)| (x - sa * x0) / sn)
            .collect();
        x_t.with_data(data)
    }
}

/// Wraps a denoiser and records how often, and on what shapes, it is called.
pub struct CountingDenoiser<D> {
    inner: D,
    calls: AtomicUsize,
    shapes: Mutex<Vec<(usize, usize, usize)>>,
}

impl<D: Denoiser> CountingDenoiser<D> {
    pub fn new(inner: D) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
            shapes: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Distinct input shapes seen so far, in first-seen order.
    pub fn shapes(&self) -> Vec<(usize, usize, usize)> {
        self.shapes.lock().expect("poisoned").clone()
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
        self.shapes.lock().expect("poisoned").clear();
    }
}

impl<D: Denoiser> Denoiser for CountingDenoiser<D> {
    fn predict_noise(
        &self,
        x_t: &ImageBuffer,
        t: usize,
        z: Option<&SemanticCode>,
    ) -> Result<ImageBuffer> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        {
            let mut shapes = self.shapes.lock().expect("poisoned");
            if !shapes.contains(&x_t.shape()) {
                shapes.push(x_t.shape());
            }
        }
        self.inner.predict_noise(x_t, t, z)
    }
}

//! Noise-prediction training: minimize `‖ε − ε_θ(x_t, t, z_sem)‖²` over
//! uniformly drawn steps and Gaussian noise, with the semantic code computed
//! from the clean image.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffusion::{
    forward_noising, to_model_space, DenoiserLayout, NoiseSchedule, ScheduleParams,
    TrainableDenoiser,
};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::latent::{Encoder, SemanticEncoder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub schedule: ScheduleParams,
    pub optimizer: Optimizer,
    /// Width of both hidden layers.
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 7,
            schedule: ScheduleParams::default(),
            optimizer: Optimizer::Adam,
            hidden: 128,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(
                "learning_rate",
                format!("{} must be positive", self.learning_rate),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        if self.hidden == 0 {
            return Err(Error::invalid("hidden", "must be positive"));
        }
        Ok(())
    }
}

/// One training example: a clean `[0, 1]` image, a step and the noise drawn
/// for it.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub image: ImageBuffer,
    pub t: usize,
    pub eps: ImageBuffer,
}

/// Parameter gradients, flattened in the `parameters()` order of the
/// denoiser and (for a learned encoder) the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub denoiser: Vec<f64>,
    pub encoder: Vec<f64>,
}

/// Mean squared noise-prediction error over `batch` and its gradient.
pub fn loss_and_gradient(
    den: &TrainableDenoiser,
    encoder: &Encoder,
    sched: &NoiseSchedule,
    batch: &[TrainSample],
) -> Result<(f64, Gradient)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("empty training batch".into()));
    }
    let mut grad = Gradient {
        denoiser: vec![0.0; den.param_count()],
        encoder: match encoder {
            Encoder::Learned(e) => vec![0.0; e.param_count()],
            Encoder::Pool(_) => Vec::new(),
        },
    };
    let n = den.layout().pixels();
    let scale = 2.0 / (n * batch.len()) as f64;
    let mut loss = 0.0;
    for s in batch {
        let z = encoder.encode(&s.image)?;
        let x_t = forward_noising(&to_model_space(&s.image), s.t, &s.eps, sched)?;
        let input = den.assemble_input(&x_t, s.t, Some(z.values()))?;
        let (out, cache) = den.forward_cached(input);
        let mut d_out = Vec::with_capacity(n);
        for (o, e) in out.iter().zip(s.eps.data()) {
            let r = o - e;
            loss += r * r;
            d_out.push(scale * r);
        }
        let d_in = den.backward(&cache, &d_out, &mut grad.denoiser);
        if let Encoder::Learned(e) = encoder {
            let d_z = &d_in[d_in.len() - z.dim()..];
            e.backward(s.image.data(), z.values(), d_z, &mut grad.encoder);
        }
    }
    Ok((loss / (n * batch.len()) as f64, grad))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub denoiser: TrainableDenoiser,
    pub encoder: Encoder,
    /// Mean loss of each epoch.
    pub losses: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

enum Stepper {
    Sgd,
    Adam(Adam),
}

impl Stepper {
    fn new(kind: Optimizer, n: usize) -> Self {
        match kind {
            Optimizer::Sgd => Stepper::Sgd,
            Optimizer::Adam => Stepper::Adam(Adam::new(n)),
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        match self {
            Stepper::Sgd => params.iter_mut().zip(grad).for_each(|(p, g)| *p -= lr * g),
            Stepper::Adam(a) => a.update(params, grad, lr),
        }
    }
}

/// Trains a fresh [`TrainableDenoiser`] (and the encoder, if learned) on
/// `dataset`, a set of equally shaped single-channel `[0, 1]` images.
///
/// All randomness (initialization, shuffling, step and noise draws) derives
/// from `cfg.seed`, so identical inputs give bit-identical results.
pub fn train_denoiser(
    dataset: &[ImageBuffer],
    encoder: &Encoder,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let first = dataset
        .first()
        .ok_or_else(|| Error::EmptyInput("training dataset is empty".into()))?;
    if let Some((i, img)) = dataset
        .iter()
        .enumerate()
        .find(|(_, img)| !img.same_shape(first))
    {
        return Err(Error::shape(format!(
            "training image {i} has shape {:?}, image 0 has {:?}",
            img.shape(),
            first.shape()
        )));
    }
    let (h, w, ch) = first.shape();
    if ch != 1 {
        return Err(Error::shape(format!(
            "training images must be single-channel, got {ch}"
        )));
    }
    if encoder.input_shape() != (h, w) {
        return Err(Error::shape(format!(
            "encoder expects {:?}, dataset images are {h}x{w}",
            encoder.input_shape()
        )));
    }
    let sched = NoiseSchedule::new(cfg.schedule)?;
    let layout = DenoiserLayout {
        height: h,
        width: w,
        semantic_dim: encoder.dim(),
        hidden: cfg.hidden,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut den = TrainableDenoiser::new(layout, rng.random())?;
    let mut encoder = encoder.clone();
    let mut den_params = den.parameters();
    let mut enc_params = match &encoder {
        Encoder::Learned(e) => e.parameters(),
        Encoder::Pool(_) => Vec::new(),
    };
    let mut den_opt = Stepper::new(cfg.optimizer, den_params.len());
    let mut enc_opt = Stepper::new(cfg.optimizer, enc_params.len());

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<TrainSample> = chunk
                .iter()
                .map(|&i| {
                    let t = rng.random_range(1..=sched.len());
                    let noise = (0..h * w).map(|_| rng.sample(StandardNormal)).collect();
                    TrainSample {
                        image: dataset[i].clone(),
                        t,
                        eps: ImageBuffer::new(h, w, 1, noise).expect("noise shape"),
                    }
                })
                .collect();
            let (loss, grad) = loss_and_gradient(&den, &encoder, &sched, &batch)?;
            epoch_loss += loss * chunk.len() as f64;
            den_opt.update(&mut den_params, &grad.denoiser, cfg.learning_rate);
            den.set_parameters(&den_params)?;
            if let Encoder::Learned(e) = &mut encoder {
                enc_opt.update(&mut enc_params, &grad.encoder, cfg.learning_rate);
                e.set_parameters(&enc_params)?;
            }
        }
        let mean = epoch_loss / dataset.len() as f64;
        if !mean.is_finite() {
            return Err(Error::invalid(
                "learning_rate",
                format!("training diverged at epoch {epoch}"),
            ));
        }
        log::debug!("epoch {epoch}: loss {mean:.6}");
        losses.push(mean);
    }
    Ok(TrainOutcome {
        denoiser: den,
        encoder,
        losses,
    })
}

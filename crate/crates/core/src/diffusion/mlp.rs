use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::Denoiser;
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::latent::SemanticCode;
use crate::nn::{silu, silu_grad, Dense};

pub const TIME_EMBEDDING_DIM: usize = 16;

/// Sinusoidal step embedding: `[sin(t·f₀), cos(t·f₀), …]` with
/// `f_i = 10000^(−i / (dim/2))`.
pub fn sinusoidal_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for i in 0..half {
        let freq = 10000f64.powf(-(i as f64) / half as f64);
        let arg = t as f64 * freq;
        out.push(arg.sin());
        out.push(arg.cos());
    }
    out
}

/// Shape of a [`TrainableDenoiser`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiserLayout {
    pub height: usize,
    pub width: usize,
    pub semantic_dim: usize,
    pub hidden: usize,
}

impl DenoiserLayout {
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn input_dim(&self) -> usize {
        self.pixels() + TIME_EMBEDDING_DIM + self.semantic_dim
    }

    /// `[input, hidden, hidden, output]`.
    pub fn layer_sizes(&self) -> [usize; 4] {
        [self.input_dim(), self.hidden, self.hidden, self.pixels()]
    }
}

/// Two-hidden-layer SiLU network predicting ε from
/// `flatten(x_t) ⊕ embed(t) ⊕ z_sem`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainableDenoiser {
    layout: DenoiserLayout,
    pub(crate) layers: [Dense; 3],
}

/// Activations kept for the backward pass.
pub(crate) struct ForwardCache {
    pub input: Vec<f64>,
    pub pre1: Vec<f64>,
    pub act1: Vec<f64>,
    pub pre2: Vec<f64>,
    pub act2: Vec<f64>,
}

impl TrainableDenoiser {
    pub fn new(layout: DenoiserLayout, seed: u64) -> Result<Self> {
        if layout.height == 0 || layout.width == 0 || layout.hidden == 0 {
            return Err(Error::invalid(
                "layout",
                format!("{layout:?} has a zero dimension"),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [i, h1, h2, o] = layout.layer_sizes();
        Ok(Self {
            layout,
            layers: [
                Dense::init(i, h1, &mut rng),
                Dense::init(h1, h2, &mut rng),
                Dense::init(h2, o, &mut rng),
            ],
        })
    }

    pub fn layout(&self) -> DenoiserLayout {
        self.layout
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Flat parameter vector: `w1, b1, w2, b2, w3, b3`.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            l.write_params(&mut out);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::shape(format!(
                "denoiser expects {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut rest = params;
        for l in &mut self.layers {
            rest = l.read_params(rest);
        }
        Ok(())
    }

    /// Per-layer `(weight, bias)` tensors for serialization.
    pub fn layer_tensors(&self) -> Vec<ImageBuffer> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    ImageBuffer::new(l.outputs, l.inputs, 1, l.weight.clone())
                        .expect("layer shape"),
                    ImageBuffer::new(l.outputs, 1, 1, l.bias.clone()).expect("layer shape"),
                ]
            })
            .collect()
    }

    pub fn from_layer_tensors(layout: DenoiserLayout, tensors: &[ImageBuffer]) -> Result<Self> {
        let sizes = layout.layer_sizes();
        if tensors.len() != 6 {
            return Err(Error::shape(format!(
                "expected 6 layer tensors, got {}",
                tensors.len()
            )));
        }
        let mut layers = Vec::with_capacity(3);
        for (k, pair) in tensors.chunks_exact(2).enumerate() {
            let (inputs, outputs) = (sizes[k], sizes[k + 1]);
            let (w, b) = (&pair[0], &pair[1]);
            if w.shape() != (outputs, inputs, 1) || b.shape() != (outputs, 1, 1) {
                return Err(Error::shape(format!(
                    "layer {k}: weight {:?} / bias {:?} do not match {inputs}->{outputs}",
                    w.shape(),
                    b.shape()
                )));
            }
            layers.push(
                Dense::from_parts(inputs, outputs, w.data().to_vec(), b.data().to_vec())
                    .expect("checked shapes"),
            );
        }
        let layers: [Dense; 3] = layers.try_into().expect("three layers");
        Ok(Self { layout, layers })
    }

    pub(crate) fn assemble_input(
        &self,
        x_t: &ImageBuffer,
        t: usize,
        z_sem: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        let l = &self.layout;
        if x_t.shape() != (l.height, l.width, 1) {
            return Err(Error::shape(format!(
                "denoiser built for ({}, {}, 1), got {:?}",
                l.height,
                l.width,
                x_t.shape()
            )));
        }
        let z = match z_sem {
            Some(z) if z.len() == l.semantic_dim => z,
            None if l.semantic_dim == 0 => &[][..],
            Some(z) => {
                return Err(Error::shape(format!(
                    "semantic code has {} entries, denoiser expects {}",
                    z.len(),
                    l.semantic_dim
                )))
            }
            None => {
                return Err(Error::invalid(
                    "z_sem",
                    "conditional denoiser needs a semantic code",
                ))
            }
        };
        let mut input = Vec::with_capacity(l.input_dim());
        input.extend_from_slice(x_t.data());
        input.extend(sinusoidal_embedding(t, TIME_EMBEDDING_DIM));
        input.extend_from_slice(z);
        Ok(input)
    }

    pub(crate) fn forward_cached(&self, input: Vec<f64>) -> (Vec<f64>, ForwardCache) {
        let pre1 = self.layers[0].forward(&input);
        let act1: Vec<f64> = pre1.iter().map(|&v| silu(v)).collect();
        let pre2 = self.layers[1].forward(&act1);
        let act2: Vec<f64> = pre2.iter().map(|&v| silu(v)).collect();
        let out = self.layers[2].forward(&act2);
        (
            out,
            ForwardCache {
                input,
                pre1,
                act1,
                pre2,
                act2,
            },
        )
    }

    /// Accumulates parameter gradients into `grad` (flat, [`Self::parameters`]
    /// order) and returns d(loss)/d(input).
    pub(crate) fn backward(
        &self,
        cache: &ForwardCache,
        d_out: &[f64],
        grad: &mut [f64],
    ) -> Vec<f64> {
        let n0 = self.layers[0].param_count();
        let n1 = self.layers[1].param_count();
        let (g0, rest) = grad.split_at_mut(n0);
        let (g1, g2) = rest.split_at_mut(n1);
        let d_act2 = self.layers[2].backward(&cache.act2, d_out, g2);
        let d_pre2: Vec<f64> = d_act2
            .iter()
            .zip(&cache.pre2)
            .map(|(d, &p)| d * silu_grad(p))
            .collect();
        let d_act1 = self.layers[1].backward(&cache.act1, &d_pre2, g1);
        let d_pre1: Vec<f64> = d_act1
            .iter()
            .zip(&cache.pre1)
            .map(|(d, &p)| d * silu_grad(p))
            .collect();
        self.layers[0].backward(&cache.input, &d_pre1, g0)
    }
}

impl Denoiser for TrainableDenoiser {
    fn predict_noise(
        &self,
        x_t: &ImageBuffer,
        t: usize,
        z_sem: Option<&SemanticCode>,
    ) -> Result<ImageBuffer> {
        let input = self.assemble_input(x_t, t, z_sem.map(|z| z.values()))?;
        let (out, _) = self.forward_cached(input);
        x_t.with_data(out)
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::latent::SemanticCode;
use crate::nn::Dense;

/// Maps a single-channel image to a fixed-length semantic code.
pub trait SemanticEncoder: Send + Sync {
    fn encode(&self, img: &ImageBuffer) -> Result<SemanticCode>;
    fn dim(&self) -> usize;
    /// `(height, width)` the encoder accepts.
    fn input_shape(&self) -> (usize, usize);
    fn id(&self) -> &'static str;
}

pub fn encode_semantic<E: SemanticEncoder + ?Sized>(
    img: &ImageBuffer,
    enc: &E,
) -> Result<SemanticCode> {
    enc.encode(img)
}

fn check_input(img: &ImageBuffer, shape: (usize, usize), who: &str) -> Result<()> {
    if img.shape() != (shape.0, shape.1, 1) {
        return Err(Error::shape(format!(
            "{who} encoder built for ({}, {}, 1), got {:?}",
            shape.0,
            shape.1,
            img.shape()
        )));
    }
    Ok(())
}

/// Fixed average-pool pyramid: block means on 1×1, 2×2, 4×4, … grids,
/// concatenated coarse to fine and truncated to `dim` values.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolPyramidEncoder {
    height: usize,
    width: usize,
    dim: usize,
    grids: Vec<usize>,
}

impl PoolPyramidEncoder {
    pub fn new(height: usize, width: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        let mut grids = Vec::new();
        let mut total = 0;
        let mut g = 1;
        while total < dim {
            if !height.is_multiple_of(g) || !width.is_multiple_of(g) {
                return Err(Error::invalid(
                    "dim",
                    format!("{dim} values need a {g}x{g} pooling grid, which does not tile {height}x{width}"),
                ));
            }
            grids.push(g);
            total += g * g;
            g *= 2;
        }
        Ok(Self {
            height,
            width,
            dim,
            grids,
        })
    }
}

impl SemanticEncoder for PoolPyramidEncoder {
    fn encode(&self, img: &ImageBuffer) -> Result<SemanticCode> {
        check_input(img, (self.height, self.width), "pool")?;
        let mut out = Vec::with_capacity(self.dim);
        'grids: for &g in &self.grids {
            let (bh, bw) = (self.height / g, self.width / g);
            let area = (bh * bw) as f64;
            for gi in 0..g {
                for gj in 0..g {
                    if out.len() == self.dim {
                        break 'grids;
                    }
                    let mut sum = 0.0;
                    for r in gi * bh..(gi + 1) * bh {
                        for c in gj * bw..(gj + 1) * bw {
                            sum += img.get(r, c, 0);
                        }
                    }
                    out.push(sum / area);
                }
            }
        }
        Ok(SemanticCode::new(out))
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn input_shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn id(&self) -> &'static str {
        "pool"
    }
}

/// `z = tanh(W · flatten(img) + b)`, trained jointly with the denoiser.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedEncoder {
    height: usize,
    width: usize,
    pub(crate) layer: Dense,
}

impl LearnedEncoder {
    pub fn new(height: usize, width: usize, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 || height == 0 || width == 0 {
            return Err(Error::invalid("dim", "encoder dimensions must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            height,
            width,
            layer: Dense::init(height * width, dim, &mut rng),
        })
    }

    pub fn from_tensors(
        height: usize,
        width: usize,
        weight: &ImageBuffer,
        bias: &ImageBuffer,
    ) -> Result<Self> {
        let n = height * width;
        let dim = bias.len();
        if weight.shape() != (dim, n, 1) || bias.shape() != (dim, 1, 1) {
            return Err(Error::shape(format!(
                "encoder tensors {:?} / {:?} do not fit a {height}x{width} input",
                weight.shape(),
                bias.shape()
            )));
        }
        let layer = Dense::from_parts(n, dim, weight.data().to_vec(), bias.data().to_vec())
            .expect("checked shapes");
        Ok(Self {
            height,
            width,
            layer,
        })
    }

    /// `[weight (dim × pixels), bias (dim × 1)]`.
    pub fn tensors(&self) -> Vec<ImageBuffer> {
        let l = &self.layer;
        vec![
            ImageBuffer::new(l.outputs, l.inputs, 1, l.weight.clone()).expect("layer shape"),
            ImageBuffer::new(l.outputs, 1, 1, l.bias.clone()).expect("layer shape"),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.layer.param_count()
    }

    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.layer.write_params(&mut out);
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::shape(format!(
                "encoder expects {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        self.layer.read_params(params);
        Ok(())
    }

    /// Accumulates parameter gradients for input `x` with output `z` given
    /// `d_z`.
    pub(crate) fn backward(&self, x: &[f64], z: &[f64], d_z: &[f64], grad: &mut [f64]) {
        let d_pre: Vec<f64> = d_z.iter().zip(z).map(|(d, z)| d * (1.0 - z * z)).collect();
        self.layer.backward(x, &d_pre, grad);
    }
}

impl SemanticEncoder for LearnedEncoder {
    fn encode(&self, img: &ImageBuffer) -> Result<SemanticCode> {
        check_input(img, (self.height, self.width), "learned")?;
        Ok(SemanticCode::new(
            self.layer
                .forward(img.data())
                .into_iter()
                .map(f64::tanh)
                .collect(),
        ))
    }

    fn dim(&self) -> usize {
        self.layer.outputs
    }

    fn input_shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn id(&self) -> &'static str {
        "learned"
    }
}

/// The built-in semantic encoders.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    Pool(PoolPyramidEncoder),
    Learned(LearnedEncoder),
}

impl Encoder {
    fn inner(&self) -> &dyn SemanticEncoder {
        match self {
            Encoder::Pool(e) => e,
            Encoder::Learned(e) => e,
        }
    }
}

impl SemanticEncoder for Encoder {
    fn encode(&self, img: &ImageBuffer) -> Result<SemanticCode> {
        self.inner().encode(img)
    }

    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn input_shape(&self) -> (usize, usize) {
        self.inner().input_shape()
    }

    fn id(&self) -> &'static str {
        self.inner().id()
    }
}

//! End-to-end morph generation.
//!
//! ```text
//! A, B ──preprocess──► DWT ──► LL_A, LL_B ──encode──► (z, x_T)_A, (z, x_T)_B
//!                       │                               │ lerp z, slerp x_T
//!                       │                               ▼
//!                       └─► LH/HL/HH averaged     decode ──► LL_morph
//!                                    └──────────────┬──────────┘
//!                                                  IWT ──► morph
//! ```
//!
//! Planes enter the diffusion autoencoder in pixel units (`plane / 2`, so an
//! LL plane of a `[0, 1]` image is again in `[0, 1]`), then in model space.

mod dataset;
mod vulnerability;

pub use dataset::{make_toy_dataset, ToyFace};
pub use vulnerability::{preprocess_all, vulnerability_study, StudyOptions, VulnerabilityStudy};

use std::sync::Arc;

use rayon::prelude::*;

use crate::diffusion::{
    ddim_decode, ddim_encode, from_model_space, to_model_space, Denoiser, NoiseSchedule,
};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::latent::{interpolate_pair, preprocess, LatentPair, SemanticEncoder, StochasticCode};
use crate::wavelet::{average_subbands, dwt_haar, iwt_haar, Band, BandSelection, SubBands};

/// Which sub-bands go through the diffusion autoencoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum MorphMode {
    /// Diffusion on LL only; detail planes averaged.
    #[default]
    #[serde(rename = "ll")]
    LlOnly,
    /// Each of the four planes morphed independently.
    #[serde(rename = "all")]
    AllSubbands,
}

impl std::str::FromStr for MorphMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ll" | "ll_only" => Ok(MorphMode::LlOnly),
            "all" | "all_subbands" => Ok(MorphMode::AllSubbands),
            other => Err(Error::invalid("mode", format!("unknown mode {other:?}"))),
        }
    }
}

/// Everything needed to run the pipeline. Immutable once built.
#[derive(Clone)]
pub struct ModelBundle {
    schedule: NoiseSchedule,
    denoiser: Arc<dyn Denoiser>,
    encoder: Arc<dyn SemanticEncoder>,
    io_resolution: (usize, usize),
    ddim_steps: usize,
}

impl std::fmt::Debug for ModelBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelBundle")
            .field("schedule", &self.schedule.params())
            .field("encoder", &self.encoder.id())
            .field("io_resolution", &self.io_resolution)
            .field("ddim_steps", &self.ddim_steps)
            .finish_non_exhaustive()
    }
}

impl ModelBundle {
    pub fn new(
        schedule: NoiseSchedule,
        denoiser: Arc<dyn Denoiser>,
        encoder: Arc<dyn SemanticEncoder>,
        io_resolution: (usize, usize),
        ddim_steps: usize,
    ) -> Result<Self> {
        let (h, w) = io_resolution;
        if h < 2 || w < 2 || h % 2 != 0 || w % 2 != 0 {
            return Err(Error::invalid(
                "io_resolution",
                format!("{h}x{w} must be even in both axes"),
            ));
        }
        if ddim_steps == 0 || ddim_steps > schedule.len() {
            return Err(Error::invalid(
                "ddim_steps",
                format!("{ddim_steps} not in 1..={}", schedule.len()),
            ));
        }
        if encoder.input_shape() != (h / 2, w / 2) {
            return Err(Error::shape(format!(
                "encoder expects {:?}, operating resolution is {:?}",
                encoder.input_shape(),
                (h / 2, w / 2)
            )));
        }
        Ok(Self {
            schedule,
            denoiser,
            encoder,
            io_resolution,
            ddim_steps,
        })
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn denoiser(&self) -> &Arc<dyn Denoiser> {
        &self.denoiser
    }

    pub fn encoder(&self) -> &Arc<dyn SemanticEncoder> {
        &self.encoder
    }

    pub fn io_resolution(&self) -> (usize, usize) {
        self.io_resolution
    }

    /// Resolution the diffusion model runs at: half the I/O resolution.
    pub fn operating_resolution(&self) -> (usize, usize) {
        (self.io_resolution.0 / 2, self.io_resolution.1 / 2)
    }

    pub fn ddim_steps(&self) -> usize {
        self.ddim_steps
    }

    /// Same bundle with a different denoiser.
    pub fn with_denoiser(&self, denoiser: Arc<dyn Denoiser>) -> Self {
        Self {
            denoiser,
            ..self.clone()
        }
    }

    /// Semantic code plus DDIM-inverted stochastic code of one
    /// single-channel plane (pixel units).
    pub fn encode_latents(&self, img: &ImageBuffer) -> Result<LatentPair> {
        let semantic = self.encoder.encode(img)?;
        let x_t = ddim_encode(
            &to_model_space(img),
            Some(&semantic),
            &*self.denoiser,
            &self.schedule,
            self.ddim_steps,
        )?;
        Ok(LatentPair {
            semantic,
            stochastic: StochasticCode(x_t),
        })
    }

    pub fn decode_latents(&self, latents: &LatentPair) -> Result<ImageBuffer> {
        let x0 = ddim_decode(
            &latents.stochastic.0,
            Some(&latents.semantic),
            &*self.denoiser,
            &self.schedule,
            self.ddim_steps,
        )?;
        Ok(from_model_space(&x0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorphRequest {
    pub subject_a: ImageBuffer,
    pub subject_b: ImageBuffer,
    /// Weight of subject A in `[0, 1]`.
    pub gamma: f64,
    pub mode: MorphMode,
}

impl MorphRequest {
    pub fn new(subject_a: ImageBuffer, subject_b: ImageBuffer) -> Self {
        Self {
            subject_a,
            subject_b,
            gamma: 0.5,
            mode: MorphMode::LlOnly,
        }
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn mode(mut self, mode: MorphMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Work done by one pipeline call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MorphStats {
    /// Denoiser evaluations across all DDIM encode/decode passes.
    pub denoiser_evals: usize,
    /// Shape `(height, width)` of the planes the diffusion model saw.
    pub operating_shape: (usize, usize),
    pub io_shape: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorphOutput {
    pub image: ImageBuffer,
    pub stats: MorphStats,
}

fn to_pixel_units(plane: &ImageBuffer) -> ImageBuffer {
    plane.map(|v| 0.5 * v)
}

fn to_plane_units(img: &ImageBuffer) -> ImageBuffer {
    img.map(|v| 2.0 * v)
}

/// Applies `f` to each channel of a plane and reassembles the result.
fn per_channel(
    plane: &ImageBuffer,
    mut f: impl FnMut(&ImageBuffer) -> Result<ImageBuffer>,
) -> Result<ImageBuffer> {
    if plane.channels() == 1 {
        return f(plane);
    }
    let out = (0..plane.channels())
        .map(|k| f(&plane.channel(k)))
        .collect::<Result<Vec<_>>>()?;
    ImageBuffer::from_channels(&out)
}

impl ModelBundle {
    fn morph_plane(
        &self,
        a: &ImageBuffer,
        b: &ImageBuffer,
        gamma: f64,
        stats: &mut MorphStats,
    ) -> Result<ImageBuffer> {
        let channels = a.channels();
        let (pa, pb) = (to_pixel_units(a), to_pixel_units(b));
        let mut planes = Vec::with_capacity(channels);
        for k in 0..channels {
            let (ca, cb) = if channels == 1 {
                (pa.clone(), pb.clone())
            } else {
                (pa.channel(k), pb.channel(k))
            };
            let la = self.encode_latents(&ca)?;
            let lb = self.encode_latents(&cb)?;
            let mixed = interpolate_pair(&la, &lb, gamma)?;
            planes.push(self.decode_latents(&mixed)?);
            stats.denoiser_evals += 3 * self.ddim_steps;
        }
        let merged = if channels == 1 {
            planes.pop().expect("one plane")
        } else {
            ImageBuffer::from_channels(&planes)?
        };
        Ok(to_plane_units(&merged))
    }

    fn roundtrip_plane(&self, plane: &ImageBuffer, stats: &mut MorphStats) -> Result<ImageBuffer> {
        let out = per_channel(&to_pixel_units(plane), |img| {
            let latents = self.encode_latents(img)?;
            self.decode_latents(&latents)
        })?;
        stats.denoiser_evals += 2 * self.ddim_steps * plane.channels();
        Ok(to_plane_units(&out))
    }

    fn prepare(&self, img: &ImageBuffer) -> Result<SubBands> {
        let pre = preprocess(img, self.io_resolution)?;
        dwt_haar(&pre.image)
    }

    fn stats(&self) -> MorphStats {
        MorphStats {
            denoiser_evals: 0,
            operating_shape: self.operating_resolution(),
            io_shape: self.io_resolution,
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid("gamma", format!("{gamma} not in [0, 1]")));
    }
    Ok(())
}

/// Generates a morph of `req.subject_a` and `req.subject_b`.
pub fn morph(req: &MorphRequest, m: &ModelBundle) -> Result<ImageBuffer> {
    morph_with_stats(req, m).map(|o| o.image)
}

pub fn morph_with_stats(req: &MorphRequest, m: &ModelBundle) -> Result<MorphOutput> {
    let (bands, stats) = morph_subbands(req, m)?;
    Ok(MorphOutput {
        image: iwt_haar(&bands)?,
        stats,
    })
}

/// The morphed sub-bands, before the inverse transform.
pub fn morph_subbands(req: &MorphRequest, m: &ModelBundle) -> Result<(SubBands, MorphStats)> {
    check_gamma(req.gamma)?;
    let a = m.prepare(&req.subject_a)?;
    let b = m.prepare(&req.subject_b)?;
    if a.plane_shape() != b.plane_shape() {
        return Err(Error::shape(format!(
            "subjects have {} and {} channels",
            a.plane_shape().2,
            b.plane_shape().2
        )));
    }
    let mut stats = m.stats();
    let ll = m.morph_plane(&a.ll, &b.ll, req.gamma, &mut stats)?;
    let bands = match req.mode {
        MorphMode::LlOnly => {
            let detail = average_subbands(&a, &b, BandSelection::Detail)?;
            detail.complete_with([(Band::LL, ll)])?
        }
        MorphMode::AllSubbands => {
            let mut planes = vec![ll];
            for band in Band::DETAIL {
                planes.push(m.morph_plane(a.get(band), b.get(band), req.gamma, &mut stats)?);
            }
            let [ll, lh, hl, hh]: [ImageBuffer; 4] = planes.try_into().expect("four planes");
            SubBands::new(ll, lh, hl, hh)?
        }
    };
    Ok((bands, stats))
}

/// Single-subject round trip: LL through encode/decode, own detail planes.
pub fn reconstruct(img: &ImageBuffer, m: &ModelBundle) -> Result<ImageBuffer> {
    reconstruct_with_stats(img, m).map(|o| o.image)
}

pub fn reconstruct_with_stats(img: &ImageBuffer, m: &ModelBundle) -> Result<MorphOutput> {
    let mut bands = m.prepare(img)?;
    let mut stats = m.stats();
    bands.ll = m.roundtrip_plane(&bands.ll, &mut stats)?;
    Ok(MorphOutput {
        image: iwt_haar(&bands)?,
        stats,
    })
}

/// Runs requests in parallel; output order matches input order. The first
/// failing request (by index) aborts the batch.
pub fn batch_morph(pairs: &[MorphRequest], m: &ModelBundle) -> Result<Vec<ImageBuffer>> {
    let results: Vec<Result<ImageBuffer>> = pairs.par_iter().map(|req| morph(req, m)).collect();
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Batch {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{make_schedule, ZeroDenoiser};
    use crate::latent::PoolPyramidEncoder;

    fn bundle() -> ModelBundle {
        ModelBundle::new(
            make_schedule(10, 1e-3, 0.05).unwrap(),
            Arc::new(ZeroDenoiser),
            Arc::new(PoolPyramidEncoder::new(8, 8, 8).unwrap()),
            (16, 16),
            5,
        )
        .unwrap()
    }

    fn face(k: usize) -> ImageBuffer {
        ImageBuffer::from_fn(16, 16, 1, |r, c, _| {
            (((r + k) * (c + 2 * k + 1)) % 17) as f64 / 16.0
        })
    }

    #[test]
    fn bundle_validation() {
        let s = make_schedule(10, 1e-3, 0.05).unwrap();
        let enc: Arc<dyn SemanticEncoder> = Arc::new(PoolPyramidEncoder::new(8, 8, 8).unwrap());
        assert!(
            ModelBundle::new(s.clone(), Arc::new(ZeroDenoiser), enc.clone(), (16, 16), 11).is_err()
        );
        assert!(
            ModelBundle::new(s.clone(), Arc::new(ZeroDenoiser), enc.clone(), (15, 16), 5).is_err()
        );
        assert!(ModelBundle::new(s, Arc::new(ZeroDenoiser), enc, (32, 32), 5).is_err());
    }

    #[test]
    fn zero_denoiser_identity() {
        let m = bundle();
        let a = face(1);
        let pre = preprocess(&a, (16, 16)).unwrap().image;
        for gamma in [0.0, 0.3, 1.0] {
            let out = morph(&MorphRequest::new(a.clone(), a.clone()).gamma(gamma), &m).unwrap();
            assert!(out.max_abs_diff(&pre) <= 1e-10);
        }
        assert!(reconstruct(&a, &m).unwrap().max_abs_diff(&pre) <= 1e-10);
    }

    #[test]
    fn gamma_out_of_range() {
        let err = morph(&MorphRequest::new(face(1), face(2)).gamma(1.1), &bundle());
        assert!(matches!(
            err,
            Err(Error::InvalidParameter { name: "gamma", .. })
        ));
    }

    #[test]
    fn color_is_per_channel() {
        let m = bundle();
        let rgb = ImageBuffer::from_fn(16, 16, 3, |r, c, k| {
            ((r * 3 + c * (k + 1)) % 11) as f64 / 10.0
        });
        let out = morph(&MorphRequest::new(rgb.clone(), rgb.clone()), &m).unwrap();
        let pre = preprocess(&rgb, (16, 16)).unwrap().image;
        assert_eq!(out.shape(), (16, 16, 3));
        assert!(out.max_abs_diff(&pre) <= 1e-10);
    }

    #[test]
    fn batch_order_and_errors() {
        let m = bundle();
        assert!(batch_morph(&[], &m).unwrap().is_empty());
        let req = MorphRequest::new(face(1), face(2));
        let out = batch_morph(&[req.clone(), req.clone()], &m).unwrap();
        assert_eq!(out[0], out[1]);
        assert_eq!(out[0], morph(&req, &m).unwrap());

        let mut reqs = vec![req.clone(); 5];
        reqs[3].gamma = -0.5;
        match batch_morph(&reqs, &m) {
            Err(Error::Batch { index, .. }) => assert_eq!(index, 3),
            other => panic!("expected batch error, got {other:?}"),
        }
    }

    #[test]
    fn stats_count_evaluations() {
        let m = bundle();
        let req = MorphRequest::new(face(1), face(2));
        let ll = morph_with_stats(&req, &m).unwrap().stats;
        let all = morph_with_stats(&req.clone().mode(MorphMode::AllSubbands), &m)
            .unwrap()
            .stats;
        assert_eq!(ll.denoiser_evals, 15);
        assert_eq!(all.denoiser_evals, 60);
        assert_eq!(ll.operating_shape, (8, 8));
    }

    #[test]
    fn modes_share_the_ll_path() {
        let m = bundle();
        let req = MorphRequest::new(face(1), face(4)).gamma(0.3);
        let (ll, _) = morph_subbands(&req, &m).unwrap();
        let (all, _) = morph_subbands(&req.clone().mode(MorphMode::AllSubbands), &m).unwrap();
        assert_eq!(ll.ll, all.ll);
        assert_ne!(ll.hh, all.hh);
    }
}

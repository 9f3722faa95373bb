//! Model bundle directory:
//!
//! ```text
//! schedule.json   {"T", "beta_start", "beta_end", "ddim_steps"}
//! denoiser.waft   weight/bias tensors of the three layers
//! denoiser.json   layout, seed, schedule, io_resolution
//! encoder.waft    encoder tensors (none for the pool encoder)
//! encoder.json    kind, dim, input_shape
//! ```

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diffusion::{DenoiserLayout, NoiseSchedule, ScheduleParams, TrainableDenoiser};
use crate::error::{Error, Result};
use crate::io::config::EncoderKind;
use crate::io::waft::{read_tensor_list, write_tensor_list};
use crate::io::write_json;
use crate::latent::{Encoder, LearnedEncoder, PoolPyramidEncoder, SemanticEncoder};
use crate::pipeline::ModelBundle;

pub const BUNDLE_VERSION: u32 = 1;

/// A trained model as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedBundle {
    pub schedule: ScheduleParams,
    pub ddim_steps: usize,
    pub io_resolution: (usize, usize),
    pub denoiser: TrainableDenoiser,
    /// Seed the denoiser was trained with.
    pub seed: u64,
    pub encoder: Encoder,
}

impl SavedBundle {
    pub fn model_bundle(&self) -> Result<ModelBundle> {
        ModelBundle::new(
            NoiseSchedule::new(self.schedule)?,
            Arc::new(self.denoiser.clone()),
            Arc::new(self.encoder.clone()),
            self.io_resolution,
            self.ddim_steps,
        )
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    #[serde(flatten)]
    schedule: ScheduleParams,
    ddim_steps: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenoiserFile {
    format_version: u32,
    layout: DenoiserLayout,
    layer_sizes: [usize; 4],
    seed: u64,
    schedule: ScheduleParams,
    io_resolution: [usize; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EncoderFile {
    kind: EncoderKind,
    dim: usize,
    input_shape: [usize; 2],
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        offset: 0,
        reason: format!("{}: {e}", path.display()),
    })
}

pub fn save_bundle(dir: impl AsRef<Path>, b: &SavedBundle) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    write_json(
        &ScheduleFile {
            schedule: b.schedule,
            ddim_steps: b.ddim_steps,
        },
        dir.join("schedule.json"),
    )?;
    let layout = b.denoiser.layout();
    write_tensor_list(dir.join("denoiser.waft"), &b.denoiser.layer_tensors())?;
    write_json(
        &DenoiserFile {
            format_version: BUNDLE_VERSION,
            layout,
            layer_sizes: layout.layer_sizes(),
            seed: b.seed,
            schedule: b.schedule,
            io_resolution: [b.io_resolution.0, b.io_resolution.1],
        },
        dir.join("denoiser.json"),
    )?;
    let (kind, tensors) = match &b.encoder {
        Encoder::Pool(_) => (EncoderKind::Pool, Vec::new()),
        Encoder::Learned(e) => (EncoderKind::Learned, e.tensors()),
    };
    let (h, w) = b.encoder.input_shape();
    write_tensor_list(dir.join("encoder.waft"), &tensors)?;
    write_json(
        &EncoderFile {
            kind,
            dim: b.encoder.dim(),
            input_shape: [h, w],
        },
        dir.join("encoder.json"),
    )
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<SavedBundle> {
    let dir = dir.as_ref();
    let sched: ScheduleFile = read_json(&dir.join("schedule.json"))?;
    let meta: DenoiserFile = read_json(&dir.join("denoiser.json"))?;
    if meta.format_version != BUNDLE_VERSION {
        return Err(Error::Unsupported(format!(
            "bundle format version {}",
            meta.format_version
        )));
    }
    if meta.schedule != sched.schedule {
        return Err(Error::Format {
            offset: 0,
            reason: "schedule.json and denoiser.json disagree on the schedule".into(),
        });
    }
    let denoiser = TrainableDenoiser::from_layer_tensors(
        meta.layout,
        &read_tensor_list(dir.join("denoiser.waft"))?,
    )?;
    let enc: EncoderFile = read_json(&dir.join("encoder.json"))?;
    let tensors = read_tensor_list(dir.join("encoder.waft"))?;
    let [h, w] = enc.input_shape;
    let encoder = match enc.kind {
        EncoderKind::Pool if tensors.is_empty() => {
            Encoder::Pool(PoolPyramidEncoder::new(h, w, enc.dim)?)
        }
        EncoderKind::Learned if tensors.len() == 2 => Encoder::Learned(
            LearnedEncoder::from_tensors(h, w, &tensors[0], &tensors[1])?,
        ),
        kind => {
            return Err(Error::Format {
                offset: 0,
                reason: format!("{kind:?} encoder with {} tensors", tensors.len()),
            })
        }
    };
    if encoder.dim() != enc.dim {
        return Err(Error::shape(format!(
            "encoder.json says dim {}, tensors give {}",
            enc.dim,
            encoder.dim()
        )));
    }
    Ok(SavedBundle {
        schedule: sched.schedule,
        ddim_steps: sched.ddim_steps,
        io_resolution: (meta.io_resolution[0], meta.io_resolution[1]),
        denoiser,
        seed: meta.seed,
        encoder,
    })
}

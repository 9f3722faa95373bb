//! Latent pairs, dataset directories and morph manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::io::pgm::{read_pgm, write_pgm, DEFAULT_MAXVAL};
use crate::io::waft::{read_tensor_list, write_tensor_list};
use crate::io::write_json;
use crate::latent::{LatentPair, SemanticCode, StochasticCode};
use crate::pipeline::ToyFace;

/// Sidecar describing a stored [`LatentPair`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentMeta {
    pub encoder: String,
    pub dim: usize,
    pub operating_resolution: [usize; 2],
}

/// Writes the semantic code (as a `dim × 1 × 1` tensor) and the stochastic
/// code to `path`, and the metadata to `path` with a `.json` extension.
pub fn write_latents(path: impl AsRef<Path>, pair: &LatentPair, encoder: &str) -> Result<()> {
    let path = path.as_ref();
    let z = pair.semantic.values();
    let x = &pair.stochastic.0;
    let semantic = ImageBuffer::new(z.len(), 1, 1, z.to_vec())?;
    write_tensor_list(path, &[semantic, x.clone()])?;
    write_json(
        &LatentMeta {
            encoder: encoder.into(),
            dim: z.len(),
            operating_resolution: [x.height(), x.width()],
        },
        path.with_extension("json"),
    )
}

pub fn read_latents(path: impl AsRef<Path>) -> Result<(LatentPair, LatentMeta)> {
    let path = path.as_ref();
    let meta_path = path.with_extension("json");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::file(&meta_path, e))?;
    let meta: LatentMeta = serde_json::from_str(&text)?;
    let tensors = read_tensor_list(path)?;
    let [z, x]: [ImageBuffer; 2] =
        tensors
            .try_into()
            .map_err(|t: Vec<ImageBuffer>| Error::Format {
                offset: 0,
                reason: format!("latent file holds {} tensors, expected 2", t.len()),
            })?;
    if z.shape() != (meta.dim, 1, 1)
        || (x.height(), x.width()) != (meta.operating_resolution[0], meta.operating_resolution[1])
    {
        return Err(Error::shape(format!(
            "latent tensors {:?} / {:?} disagree with metadata",
            z.shape(),
            x.shape()
        )));
    }
    Ok((
        LatentPair {
            semantic: SemanticCode::new(z.into_data()),
            stochastic: StochasticCode(x),
        },
        meta,
    ))
}

pub const LABELS_FILE: &str = "labels.csv";

/// `face_0000.pgm`, … plus `labels.csv` (`file,identity`).
pub fn write_dataset(dir: impl AsRef<Path>, faces: &[ToyFace]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let mut labels = String::from("file,identity\n");
    for (i, f) in faces.iter().enumerate() {
        let name = format!("face_{i:04}.pgm");
        write_pgm(&f.image, dir.join(&name), DEFAULT_MAXVAL)?;
        labels.push_str(&format!("{name},{}\n", f.identity));
    }
    let path = dir.join(LABELS_FILE);
    fs::write(&path, labels).map_err(|e| Error::file(&path, e))
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Vec<ToyFace>> {
    let dir = dir.as_ref();
    let path = dir.join(LABELS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some("file,identity") {
        return Err(Error::Line {
            line: 1,
            reason: "expected header \"file,identity\"".into(),
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| Error::Line {
            line: i + 1,
            reason,
        };
        let (file, id) = line
            .split_once(',')
            .ok_or_else(|| bad(format!("expected file,identity, found {line:?}")))?;
        let identity = id
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad identity {id:?}")))?;
        out.push(ToyFace {
            image: read_pgm(dir.join(file.trim()))?,
            identity,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} lists no images",
            path.display()
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub subject_a: PathBuf,
    pub subject_b: PathBuf,
    pub gamma: f64,
    pub output: PathBuf,
}

/// Lines `subject_a_path,subject_b_path,gamma,output_path`. Relative paths
/// resolve against `base`. An optional first line starting with
/// `subject_a` is treated as a header.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("subject_a")) {
            continue;
        }
        let bad = |reason: String| Error::Line {
            line: i + 1,
            reason,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [a, b, gamma, output] = fields[..] else {
            return Err(bad(format!("expected 4 fields, found {}", fields.len())));
        };
        let gamma: f64 = gamma
            .parse()
            .map_err(|_| bad(format!("gamma {gamma:?} is not a number")))?;
        out.push(ManifestEntry {
            subject_a: base.join(a),
            subject_b: base.join(b),
            gamma,
            output: base.join(output),
        });
    }
    Ok(out)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

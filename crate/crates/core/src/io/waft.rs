//! Raw tensor container: `"WAFT"`, then `H`, `W`, `C` as little-endian
//! `u32`, then `H·W·C` little-endian `f64` in row-major order. Lists of
//! tensors carry a leading count byte.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::wavelet::SubBands;

pub const WAFT_MAGIC: &[u8; 4] = b"WAFT";
pub const WAFT_VERSION: u32 = 1;

const HEADER: usize = 16;

pub fn encode_tensor(img: &ImageBuffer, out: &mut Vec<u8>) -> Result<()> {
    let (h, w, c) = img.shape();
    out.extend_from_slice(WAFT_MAGIC);
    for d in [h, w, c] {
        let d = u32::try_from(d)
            .map_err(|_| Error::shape(format!("dimension {d} does not fit in u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in img.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

/// Decodes one tensor starting at `offset`, returning it and the offset just
/// past it.
pub fn decode_tensor(bytes: &[u8], offset: usize) -> Result<(ImageBuffer, usize)> {
    let rest = &bytes[offset.min(bytes.len())..];
    if rest.len() < HEADER {
        return Err(Error::Truncated {
            expected: HEADER,
            actual: rest.len(),
        });
    }
    if &rest[..4] != WAFT_MAGIC {
        return Err(Error::Format {
            offset,
            reason: "bad magic, expected \"WAFT\"".into(),
        });
    }
    let dim =
        |k: usize| u32::from_le_bytes(rest[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
    let (h, w, c) = (dim(0), dim(1), dim(2));
    let n = h
        .checked_mul(w)
        .and_then(|x| x.checked_mul(c))
        .and_then(|x| x.checked_mul(8))
        .ok_or_else(|| Error::Format {
            offset: offset + 4,
            reason: format!("dimensions {h}x{w}x{c} overflow"),
        })?;
    if rest.len() - HEADER < n {
        return Err(Error::Truncated {
            expected: HEADER + n,
            actual: rest.len(),
        });
    }
    let data = rest[HEADER..HEADER + n]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let img = ImageBuffer::new(h, w, c, data).map_err(|e| Error::Format {
        offset,
        reason: e.to_string(),
    })?;
    Ok((img, offset + HEADER + n))
}

pub fn encode_tensor_list(tensors: &[ImageBuffer]) -> Result<Vec<u8>> {
    let count = u8::try_from(tensors.len())
        .map_err(|_| Error::invalid("tensors", "at most 255 per file"))?;
    let mut out = vec![count];
    for t in tensors {
        encode_tensor(t, &mut out)?;
    }
    Ok(out)
}

pub fn decode_tensor_list(bytes: &[u8]) -> Result<Vec<ImageBuffer>> {
    let Some(&count) = bytes.first() else {
        return Err(Error::Truncated {
            expected: 1,
            actual: 0,
        });
    };
    let mut offset = 1;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let (t, next) = decode_tensor(bytes, offset)?;
        out.push(t);
        offset = next;
    }
    if offset != bytes.len() {
        return Err(Error::Format {
            offset,
            reason: format!("{} trailing bytes", bytes.len() - offset),
        });
    }
    Ok(out)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::file(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::file(path, e))
}

pub fn write_tensor(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<()> {
    let mut out = Vec::with_capacity(HEADER + 8 * img.len());
    encode_tensor(img, &mut out)?;
    write(path.as_ref(), &out)
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let bytes = read(path.as_ref())?;
    let (img, end) = decode_tensor(&bytes, 0)?;
    if end != bytes.len() {
        return Err(Error::Format {
            offset: end,
            reason: format!("{} trailing bytes", bytes.len() - end),
        });
    }
    Ok(img)
}

pub fn write_tensor_list(path: impl AsRef<Path>, tensors: &[ImageBuffer]) -> Result<()> {
    write(path.as_ref(), &encode_tensor_list(tensors)?)
}

pub fn read_tensor_list(path: impl AsRef<Path>) -> Result<Vec<ImageBuffer>> {
    decode_tensor_list(&read(path.as_ref())?)
}

/// LL, LH, HL, HH with count byte `0x04`.
pub fn write_subbands(path: impl AsRef<Path>, bands: &SubBands) -> Result<()> {
    write_tensor_list(path, &bands.clone().into_array())
}

pub fn read_subbands(path: impl AsRef<Path>) -> Result<SubBands> {
    let path = path.as_ref();
    let bytes = read(path)?;
    if bytes.first() != Some(&4) {
        return Err(Error::Format {
            offset: 0,
            reason: format!(
                "sub-band file must hold 4 tensors, count byte is {:?}",
                bytes.first()
            ),
        });
    }
    let [ll, lh, hl, hh]: [ImageBuffer; 4] = decode_tensor_list(&bytes)?
        .try_into()
        .expect("count checked");
    SubBands::new(ll, lh, hl, hh)
}

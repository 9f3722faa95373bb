//! Binary PGM (`P5`). Samples are one byte for `maxval < 256`, otherwise
//! two bytes, big-endian. Pixels map to `[0, 1]` by dividing by `maxval`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

pub const DEFAULT_MAXVAL: u16 = 65535;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn fail<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::Format {
            offset: self.pos,
            reason: reason.into(),
        })
    }

    /// Skips whitespace and `#` comments.
    fn skip_space(&mut self) -> Result<()> {
        let mut seen = false;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
            seen = true;
        }
        if !seen {
            return self.fail("expected whitespace");
        }
        Ok(())
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            self.pos = start;
            return self.fail(format!("expected {what}"));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse().or_else(|_| {
            self.pos = start;
            self.fail(format!("{what} {text} out of range"))
        })
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<ImageBuffer> {
    let mut cur = Cursor { bytes, pos: 0 };
    match bytes.get(..2) {
        Some(b"P5") => {}
        Some(b"P2") => return Err(Error::Unsupported("ASCII PGM (P2)".into())),
        _ => return cur.fail("bad magic, expected \"P5\""),
    }
    cur.pos = 2;
    cur.skip_space()?;
    let width = cur.number("width")?;
    cur.skip_space()?;
    let height = cur.number("height")?;
    cur.skip_space()?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return cur.fail(format!("empty image {width}x{height}"));
    }
    if maxval == 0 || maxval > 65535 {
        return cur.fail(format!("maxval {maxval} not in 1..=65535"));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return cur.fail("expected a single whitespace before the raster"),
    }
    let sample = if maxval < 256 { 1 } else { 2 };
    let expected = width * height * sample;
    let raster = &bytes[cur.pos..];
    if raster.len() < expected {
        return Err(Error::Truncated {
            expected,
            actual: raster.len(),
        });
    }
    let scale = maxval as f64;
    let data = if sample == 1 {
        raster[..expected]
            .iter()
            .map(|&b| b as f64 / scale)
            .collect()
    } else {
        raster[..expected]
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / scale)
            .collect()
    };
    ImageBuffer::new(height, width, 1, data)
}

/// Values are clamped to `[0, 1]` and rounded half away from zero.
pub fn encode_pgm(img: &ImageBuffer, maxval: u16) -> Result<Vec<u8>> {
    if img.channels() != 1 {
        return Err(Error::shape(format!(
            "PGM holds one channel, image has {}",
            img.channels()
        )));
    }
    if maxval == 0 {
        return Err(Error::invalid("maxval", "must be positive"));
    }
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval).into_bytes();
    let scale = maxval as f64;
    for &v in img.data() {
        if !v.is_finite() {
            return Err(Error::invalid("image", format!("non-finite pixel {v}")));
        }
        let q = (v.clamp(0.0, 1.0) * scale).round() as u16;
        if maxval < 256 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    Ok(out)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    decode_pgm(&bytes)
}

pub fn write_pgm(img: &ImageBuffer, path: impl AsRef<Path>, maxval: u16) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pgm(img, maxval)?;
    fs::write(path, bytes).map_err(|e| Error::file(path, e))
}

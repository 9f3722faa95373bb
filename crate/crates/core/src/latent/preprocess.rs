//! Deterministic stand-in for facial alignment: center crop, bilinear
//! resize and per-image min-max normalization.

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

/// A preprocessed image plus whether normalization had to be skipped
/// because the image has zero dynamic range.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub image: ImageBuffer,
    pub degenerate: bool,
}

pub fn center_crop_square(img: &ImageBuffer) -> ImageBuffer {
    let (h, w, ch) = img.shape();
    let s = h.min(w);
    if s == h && s == w {
        return img.clone();
    }
    let (r0, c0) = ((h - s) / 2, (w - s) / 2);
    ImageBuffer::from_fn(s, s, ch, |r, c, k| img.get(r0 + r, c0 + c, k))
}

/// Bilinear resampling with half-pixel centers and edge clamping.
pub fn bilinear_resize(img: &ImageBuffer, height: usize, width: usize) -> ImageBuffer {
    let (h, w, ch) = img.shape();
    if (h, w) == (height, width) {
        return img.clone();
    }
    let sy = h as f64 / height as f64;
    let sx = w as f64 / width as f64;
    let coord = |dst: usize, scale: f64, n: usize| {
        let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = src.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, src - i0 as f64)
    };
    ImageBuffer::from_fn(height, width, ch, |r, c, k| {
        let (y0, y1, fy) = coord(r, sy, h);
        let (x0, x1, fx) = coord(c, sx, w);
        let top = img.get(y0, x0, k) * (1.0 - fx) + img.get(y0, x1, k) * fx;
        let bot = img.get(y1, x0, k) * (1.0 - fx) + img.get(y1, x1, k) * fx;
        top * (1.0 - fy) + bot * fy
    })
}

fn check_target(target: (usize, usize)) -> Result<()> {
    for (name, v) in [("target height", target.0), ("target width", target.1)] {
        if v < 2 || v % 2 != 0 {
            return Err(Error::invalid(
                "target",
                format!("{name} {v} must be even and at least 2"),
            ));
        }
    }
    Ok(())
}

/// Crops to a centered square, resizes to `target = (height, width)` and
/// min-max normalizes to `[0, 1]`.
pub fn preprocess(img: &ImageBuffer, target: (usize, usize)) -> Result<Preprocessed> {
    check_target(target)?;
    let resized = bilinear_resize(&center_crop_square(img), target.0, target.1);
    let (lo, hi) = resized.min_max();
    let range = hi - lo;
    if !range.is_finite() || range <= 0.0 {
        log::warn!("image has zero dynamic range; skipping normalization");
        return Ok(Preprocessed {
            image: resized,
            degenerate: true,
        });
    }
    Ok(Preprocessed {
        image: resized.map(|v| (v - lo) / range),
        degenerate: false,
    })
}

/// Applies [`preprocess`] to both subjects of a morph.
pub fn preprocess_xi(
    a: &ImageBuffer,
    b: &ImageBuffer,
    target: (usize, usize),
) -> Result<(Preprocessed, Preprocessed)> {
    Ok((preprocess(a, target)?, preprocess(b, target)?))
}

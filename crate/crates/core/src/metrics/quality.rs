use crate::error::{Error, Result};
use crate::image::ImageBuffer;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    pub peak: f64,
    /// Side of the square, non-overlapping averaging windows.
    pub window: usize,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            peak: 1.0,
            window: 8,
        }
    }
}

pub fn ssim(x: &ImageBuffer, y: &ImageBuffer) -> Result<f64> {
    ssim_with(x, y, SsimParams::default())
}

/// Mean SSIM over non-overlapping `window × window` tiles, each channel
/// separately. Edge tiles may be smaller when the image size is not a
/// multiple of the window.
pub fn ssim_with(x: &ImageBuffer, y: &ImageBuffer, p: SsimParams) -> Result<f64> {
    x.ensure_same_shape(y, "ssim")?;
    if p.window == 0 {
        return Err(Error::invalid("window", "must be positive"));
    }
    if p.peak.is_nan() || p.peak <= 0.0 {
        return Err(Error::invalid(
            "peak",
            format!("{} must be positive", p.peak),
        ));
    }
    let c1 = (p.k1 * p.peak).powi(2);
    let c2 = (p.k2 * p.peak).powi(2);
    let (h, w, ch) = x.shape();
    let mut total = 0.0;
    let mut count = 0usize;
    for k in 0..ch {
        for r0 in (0..h).step_by(p.window) {
            for c0 in (0..w).step_by(p.window) {
                let (r1, c1_) = ((r0 + p.window).min(h), (c0 + p.window).min(w));
                let n = ((r1 - r0) * (c1_ - c0)) as f64;
                let (mut sx, mut sy) = (0.0, 0.0);
                for r in r0..r1 {
                    for c in c0..c1_ {
                        sx += x.get(r, c, k);
                        sy += y.get(r, c, k);
                    }
                }
                let (mx, my) = (sx / n, sy / n);
                let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
                for r in r0..r1 {
                    for c in c0..c1_ {
                        let (dx, dy) = (x.get(r, c, k) - mx, y.get(r, c, k) - my);
                        vx += dx * dx;
                        vy += dy * dy;
                        cov += dx * dy;
                    }
                }
                let (vx, vy, cov) = (vx / n, vy / n, cov / n);
                let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
                let den = (mx * mx + my * my + c1) * (vx + vy + c2);
                total += num / den;
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

/// `10·log10(peak² / MSE)` in dB; `+∞` for identical images.
pub fn psnr(x: &ImageBuffer, y: &ImageBuffer, peak: f64) -> Result<f64> {
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::invalid("peak", format!("{peak} must be positive")));
    }
    x.ensure_same_shape(y, "psnr")?;
    let mse = x
        .data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

/// One synthetic face and the identity it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyFace {
    pub image: ImageBuffer,
    pub identity: usize,
}

/// Identity-level geometry, in units of the image side.
#[derive(Debug, Clone, Copy)]
struct Identity {
    background: f64,
    gradient: f64,
    center: (f64, f64),
    radius: (f64, f64),
    skin: f64,
    eye_y: f64,
    eye_sep: f64,
    eye_size: f64,
    eye_depth: f64,
    mouth_y: f64,
    mouth_size: (f64, f64),
    mouth_depth: f64,
}

impl Identity {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        Self {
            background: rng.random_range(0.1..0.35),
            gradient: rng.random_range(0.05..0.3),
            center: (rng.random_range(0.46..0.54), rng.random_range(0.46..0.54)),
            radius: (rng.random_range(0.26..0.38), rng.random_range(0.32..0.44)),
            skin: rng.random_range(0.55..0.85),
            eye_y: rng.random_range(0.32..0.46),
            eye_sep: rng.random_range(0.12..0.26),
            eye_size: rng.random_range(0.035..0.065),
            eye_depth: rng.random_range(0.25..0.5),
            mouth_y: rng.random_range(0.62..0.76),
            mouth_size: (rng.random_range(0.05..0.13), rng.random_range(0.022..0.04)),
            mouth_depth: rng.random_range(0.2..0.4),
        }
    }

    /// Small per-sample variation of the same identity.
    fn jitter(&self, rng: &mut ChaCha8Rng) -> Self {
        let mut s = *self;
        let mut j = |v: &mut f64, amount: f64| *v += rng.random_range(-amount..amount);
        j(&mut s.center.0, 0.012);
        j(&mut s.center.1, 0.012);
        j(&mut s.eye_y, 0.01);
        j(&mut s.eye_sep, 0.008);
        j(&mut s.mouth_y, 0.01);
        j(&mut s.background, 0.02);
        j(&mut s.skin, 0.03);
        j(&mut s.eye_depth, 0.03);
        j(&mut s.mouth_depth, 0.03);
        s
    }

    fn render(&self, size: usize) -> ImageBuffer {
        let n = size as f64;
        let gauss = |x: f64, y: f64, cx: f64, cy: f64, sx: f64, sy: f64| {
            (-0.5 * (((x - cx) / sx).powi(2) + ((y - cy) / sy).powi(2))).exp()
        };
        let (cx, cy) = self.center;
        ImageBuffer::from_fn(size, size, 1, |r, c, _| {
            let (x, y) = ((c as f64 + 0.5) / n, (r as f64 + 0.5) / n);
            let dist = ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt();
            let bg = self.background + self.gradient * dist;
            let e =
                (((x - cx) / self.radius.0).powi(2) + ((y - cy) / self.radius.1).powi(2)).sqrt();
            let mask = 1.0 / (1.0 + ((e - 1.0) / 0.06).exp());
            let mut v = bg + mask * (self.skin - bg);
            let eye_y = cy - 0.5 + self.eye_y;
            for side in [-1.0, 1.0] {
                let ex = cx + side * self.eye_sep;
                v -= self.eye_depth * gauss(x, y, ex, eye_y, self.eye_size, self.eye_size);
            }
            let mouth_y = cy - 0.5 + self.mouth_y;
            v -= self.mouth_depth * gauss(x, y, cx, mouth_y, self.mouth_size.0, self.mouth_size.1);
            v.clamp(0.0, 1.0)
        })
    }
}

/// `n` grayscale `size × size` faces in `[0, 1]`: a radial background, an
/// elliptical face and Gaussian blobs for eyes and mouth. Samples cycle
/// through `identities`, each with its own geometry plus per-sample jitter.
/// Deterministic in `seed`.
pub fn make_toy_dataset(
    n: usize,
    size: usize,
    identities: usize,
    seed: u64,
) -> Result<Vec<ToyFace>> {
    if size < 8 || !size.is_power_of_two() {
        return Err(Error::invalid(
            "size",
            format!("{size} must be a power of two >= 8"),
        ));
    }
    if identities == 0 || identities > n {
        return Err(Error::invalid(
            "identities",
            format!("{identities} must be in 1..={n}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<Identity> = (0..identities).map(|_| Identity::draw(&mut rng)).collect();
    Ok((0..n)
        .map(|i| {
            let identity = i % identities;
            ToyFace {
                image: ids[identity].jitter(&mut rng).render(size),
                identity,
            }
        })
        .collect())
}

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::latent::bilinear_resize;
use crate::metrics::ScoreSet;

/// Maps an image to a feature vector compared by cosine similarity.
pub trait Embedder: Send + Sync {
    fn embed(&self, img: &ImageBuffer) -> Result<Vec<f64>>;
}

/// Channel-averaged image downsampled to `grid × grid`, centered to zero
/// mean and scaled to unit norm. A constant image embeds to the zero vector.
#[derive(Debug, Clone, Copy)]
pub struct BaselineEmbedder {
    pub grid: usize,
}

impl Default for BaselineEmbedder {
    fn default() -> Self {
        Self { grid: 8 }
    }
}

impl Embedder for BaselineEmbedder {
    fn embed(&self, img: &ImageBuffer) -> Result<Vec<f64>> {
        let (h, w, ch) = img.shape();
        let g = self.grid;
        if h < g || w < g {
            return Err(Error::shape(format!(
                "embedder needs at least {g}x{g} pixels, got {h}x{w}"
            )));
        }
        let gray = ImageBuffer::from_fn(h, w, 1, |r, c, _| {
            (0..ch).map(|k| img.get(r, c, k)).sum::<f64>() / ch as f64
        });
        let small = if h % g == 0 && w % g == 0 {
            let (bh, bw) = (h / g, w / g);
            ImageBuffer::from_fn(g, g, 1, |i, j, _| {
                let mut s = 0.0;
                for r in i * bh..(i + 1) * bh {
                    for c in j * bw..(j + 1) * bw {
                        s += gray.get(r, c, 0);
                    }
                }
                s / (bh * bw) as f64
            })
        } else {
            bilinear_resize(&gray, g, g)
        };
        let mean = small.mean();
        let mut v: Vec<f64> = small.data().iter().map(|x| x - mean).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Cosine similarity of the two embeddings.
pub fn embedding_similarity<E: Embedder + ?Sized>(
    a: &ImageBuffer,
    b: &ImageBuffer,
    embedder: &E,
) -> Result<f64> {
    a.ensure_same_shape(b, "embedding_similarity")?;
    let (ea, eb) = (embedder.embed(a)?, embedder.embed(b)?);
    if ea.len() != eb.len() {
        return Err(Error::shape(
            "embedder returned vectors of different length",
        ));
    }
    Ok(cosine(&ea, &eb))
}

/// How the two mated comparisons of a morph combine into one attack score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttackRule {
    /// The morph must match both contributing subjects.
    #[default]
    Min,
    Max,
}

/// Attack scores compare each morph with a probe of each contributing
/// subject; bona fide scores compare genuine mated pairs.
pub fn build_score_set<E: Embedder + ?Sized>(
    morphs: &[ImageBuffer],
    probes_a: &[ImageBuffer],
    probes_b: &[ImageBuffer],
    bonafide_pairs: &[(ImageBuffer, ImageBuffer)],
    embedder: &E,
    rule: AttackRule,
) -> Result<ScoreSet> {
    if morphs.is_empty() {
        return Err(Error::EmptyInput("no morphs to score".into()));
    }
    if probes_a.len() != morphs.len() || probes_b.len() != morphs.len() {
        return Err(Error::shape(format!(
            "{} morphs but {} / {} probes",
            morphs.len(),
            probes_a.len(),
            probes_b.len()
        )));
    }
    let attack = morphs
        .iter()
        .zip(probes_a.iter().zip(probes_b))
        .map(|(m, (pa, pb))| {
            let (sa, sb) = (
                embedding_similarity(m, pa, embedder)?,
                embedding_similarity(m, pb, embedder)?,
            );
            Ok(match rule {
                AttackRule::Min => sa.min(sb),
                AttackRule::Max => sa.max(sb),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let bonafide = bonafide_pairs
        .iter()
        .map(|(x, y)| embedding_similarity(x, y, embedder))
        .collect::<Result<Vec<_>>>()?;
    ScoreSet::new(bonafide, attack)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(seed: usize) -> ImageBuffer {
        ImageBuffer::from_fn(16, 16, 1, |r, c, _| {
            (((r + 1) * (c + 3) * (seed + 7)) % 13) as f64 / 13.0
        })
    }

    /// Embeds an image as its first two pixels.
    struct FirstTwo;

    impl Embedder for FirstTwo {
        fn embed(&self, img: &ImageBuffer) -> Result<Vec<f64>> {
            Ok(img.data()[..2].to_vec())
        }
    }

    #[test]
    fn self_similarity_is_one() {
        let e = BaselineEmbedder::default();
        assert!((embedding_similarity(&img(1), &img(1), &e).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_is_zero() {
        let a = ImageBuffer::new(1, 2, 1, vec![1.0, 0.0]).unwrap();
        let b = ImageBuffer::new(1, 2, 1, vec![0.0, 3.0]).unwrap();
        assert_eq!(embedding_similarity(&a, &b, &FirstTwo).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_and_bounded() {
        let e = BaselineEmbedder::default();
        for k in 0..10 {
            let (a, b) = (img(k), img(k + 3));
            let (ab, ba) = (
                embedding_similarity(&a, &b, &e).unwrap(),
                embedding_similarity(&b, &a, &e).unwrap(),
            );
            assert_eq!(ab, ba);
            assert!((-1.0..=1.0).contains(&ab));
        }
        assert!(embedding_similarity(&img(0), &ImageBuffer::zeros(8, 8, 1), &e).is_err());
        assert!(BaselineEmbedder::default()
            .embed(&ImageBuffer::zeros(4, 4, 1))
            .is_err());
    }

    #[test]
    fn score_set_rules() {
        let e = BaselineEmbedder::default();
        let m = img(2);
        let s = build_score_set(
            std::slice::from_ref(&m),
            std::slice::from_ref(&m),
            std::slice::from_ref(&m),
            &[(img(1), img(1))],
            &e,
            AttackRule::Min,
        )
        .unwrap();
        assert!((s.attack()[0] - 1.0).abs() < 1e-12);

        let err = build_score_set(&[], &[], &[], &[(img(1), img(1))], &e, AttackRule::Min);
        assert!(matches!(err, Err(Error::EmptyInput(_))));
        let err = build_score_set(
            std::slice::from_ref(&m),
            &[],
            std::slice::from_ref(&m),
            &[(img(1), img(1))],
            &e,
            AttackRule::Min,
        );
        assert!(matches!(err, Err(Error::Shape(_))));

        let (pa, pb) = (img(3), img(5));
        let lo = build_score_set(
            std::slice::from_ref(&m),
            std::slice::from_ref(&pa),
            std::slice::from_ref(&pb),
            &[(pa.clone(), pa.clone())],
            &e,
            AttackRule::Min,
        )
        .unwrap();
        let hi = build_score_set(
            std::slice::from_ref(&m),
            std::slice::from_ref(&pa),
            std::slice::from_ref(&pb),
            &[(pa.clone(), pa.clone())],
            &e,
            AttackRule::Max,
        )
        .unwrap();
        assert!(lo.attack()[0] <= hi.attack()[0]);
    }
}

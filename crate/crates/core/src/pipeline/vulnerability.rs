//! Toy vulnerability study: morph pairs of the same identity and pairs of
//! the most dissimilar identities, then score each morph against held-out
//! probes of its contributing subjects.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::latent::preprocess;
use crate::metrics::{AttackRule, Embedder, ScoreSet};
use crate::pipeline::{batch_morph, ModelBundle, MorphMode, MorphRequest, ToyFace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    pub morphs_per_identity: usize,
    pub gamma: f64,
    pub mode: MorphMode,
    pub rule: AttackRule,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            morphs_per_identity: 4,
            gamma: 0.5,
            mode: MorphMode::LlOnly,
            rule: AttackRule::Min,
        }
    }
}

/// Scores from one study. All three sets share the bona fide scores.
#[derive(Debug, Clone, PartialEq)]
pub struct VulnerabilityStudy {
    pub overall: ScoreSet,
    pub same_identity: ScoreSet,
    pub distant_identity: ScoreSet,
    /// For each identity, the identity it was paired with for distant morphs.
    pub distant_partner: Vec<usize>,
}

struct Planned {
    request: MorphRequest,
    probes: (usize, usize),
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Needs at least two identities with four samples each (two to morph, two
/// to probe).
pub fn vulnerability_study<E: Embedder + ?Sized>(
    faces: &[ToyFace],
    m: &ModelBundle,
    embedder: &E,
    opts: &StudyOptions,
) -> Result<VulnerabilityStudy> {
    if opts.morphs_per_identity == 0 {
        return Err(Error::invalid("morphs_per_identity", "must be positive"));
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, f) in faces.iter().enumerate() {
        groups.entry(f.identity).or_default().push(i);
    }
    if groups.len() < 2 {
        return Err(Error::EmptyInput(
            "study needs at least two identities".into(),
        ));
    }
    if let Some((id, g)) = groups.iter().find(|(_, g)| g.len() < 4) {
        return Err(Error::EmptyInput(format!(
            "identity {id} has {} samples, need at least 4",
            g.len()
        )));
    }
    let prepared = faces
        .iter()
        .map(|f| preprocess(&f.image, m.io_resolution()).map(|p| p.image))
        .collect::<Result<Vec<_>>>()?;
    let embeddings = prepared
        .iter()
        .map(|img| embedder.embed(img))
        .collect::<Result<Vec<_>>>()?;

    let ids: Vec<usize> = groups.keys().copied().collect();
    let centroid = |id: usize| {
        let g = &groups[&id];
        let mut c = vec![0.0; embeddings[g[0]].len()];
        for &i in g {
            c.iter_mut().zip(&embeddings[i]).for_each(|(c, e)| *c += e);
        }
        c
    };
    let centroids: Vec<Vec<f64>> = ids.iter().map(|&id| centroid(id)).collect();
    let partner: Vec<usize> = (0..ids.len())
        .map(|p| {
            (0..ids.len())
                .filter(|&q| q != p)
                .min_by(|&a, &b| {
                    cosine(&centroids[p], &centroids[a])
                        .total_cmp(&cosine(&centroids[p], &centroids[b]))
                })
                .expect("two identities")
        })
        .collect();

    let request = |a: usize, b: usize| {
        MorphRequest::new(faces[a].image.clone(), faces[b].image.clone())
            .gamma(opts.gamma)
            .mode(opts.mode)
    };
    let (mut same, mut distant) = (Vec::new(), Vec::new());
    for (p, id) in ids.iter().enumerate() {
        let g = &groups[id];
        let h = &groups[&ids[partner[p]]];
        let n = g.len();
        for k in 0..opts.morphs_per_identity {
            same.push(Planned {
                request: request(g[(2 * k) % n], g[(2 * k + 1) % n]),
                probes: (g[(2 * k + 2) % n], g[(2 * k + 3) % n]),
            });
            distant.push(Planned {
                request: request(g[k % n], h[k % h.len()]),
                probes: (g[(k + 1) % n], h[(k + 1) % h.len()]),
            });
        }
    }

    let score = |plan: &[Planned]| -> Result<Vec<f64>> {
        let reqs: Vec<MorphRequest> = plan.iter().map(|p| p.request.clone()).collect();
        let morphs = batch_morph(&reqs, m)?;
        morphs
            .iter()
            .zip(plan)
            .map(|(img, p)| {
                let e = embedder.embed(img)?;
                let (sa, sb) = (
                    cosine(&e, &embeddings[p.probes.0]),
                    cosine(&e, &embeddings[p.probes.1]),
                );
                Ok(match opts.rule {
                    AttackRule::Min => sa.min(sb),
                    AttackRule::Max => sa.max(sb),
                })
            })
            .collect()
    };
    let same_scores = score(&same)?;
    let distant_scores = score(&distant)?;

    let mut bonafide = Vec::new();
    for g in groups.values() {
        for (x, &i) in g.iter().enumerate() {
            for &j in &g[x + 1..] {
                bonafide.push(cosine(&embeddings[i], &embeddings[j]));
            }
        }
    }
    let overall: Vec<f64> = same_scores.iter().chain(&distant_scores).copied().collect();
    Ok(VulnerabilityStudy {
        overall: ScoreSet::new(bonafide.clone(), overall)?,
        same_identity: ScoreSet::new(bonafide.clone(), same_scores)?,
        distant_identity: ScoreSet::new(bonafide, distant_scores)?,
        distant_partner: partner.iter().map(|&q| ids[q]).collect(),
    })
}

/// Preprocessed copies of `faces` at the bundle's I/O resolution.
pub fn preprocess_all(faces: &[ImageBuffer], m: &ModelBundle) -> Result<Vec<ImageBuffer>> {
    faces
        .iter()
        .map(|f| preprocess(f, m.io_resolution()).map(|p| p.image))
        .collect()
}

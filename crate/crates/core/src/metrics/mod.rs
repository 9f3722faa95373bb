//! Image quality and biometric vulnerability metrics.
//!
//! Scores are similarities: higher means more alike, and a comparison is
//! accepted iff `score ≥ τ`. At threshold τ
//!
//! * APCER(τ) = |{attack ≥ τ}| / |attack| (morphs wrongly accepted),
//! * BPCER(τ) = |{bona fide < τ}| / |bona fide| (genuine pairs rejected).
//!
//! Thresholds are the midpoints between consecutive distinct scores plus
//! the sentinels −∞ and +∞.

mod embedding;
mod quality;

pub use embedding::{
    build_score_set, embedding_similarity, AttackRule, BaselineEmbedder, Embedder,
};
pub use quality::{psnr, ssim, ssim_with, SsimParams};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Labeled similarity scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    bonafide: Vec<f64>,
    attack: Vec<f64>,
}

impl ScoreSet {
    pub fn new(bonafide: Vec<f64>, attack: Vec<f64>) -> Result<Self> {
        if bonafide.is_empty() {
            return Err(Error::EmptyInput(
                "score set has no bona fide scores".into(),
            ));
        }
        if attack.is_empty() {
            return Err(Error::EmptyInput("score set has no attack scores".into()));
        }
        if bonafide.iter().chain(&attack).any(|s| !s.is_finite()) {
            return Err(Error::invalid("score", "scores must be finite"));
        }
        Ok(Self { bonafide, attack })
    }

    pub fn bonafide(&self) -> &[f64] {
        &self.bonafide
    }

    pub fn attack(&self) -> &[f64] {
        &self.attack
    }
}

/// One operating point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub apcer: f64,
    pub bpcer: f64,
    /// Attack scores accepted at this threshold.
    pub attacks_accepted: usize,
    /// Bona fide scores rejected at this threshold.
    pub bonafide_rejected: usize,
}

/// Operating points ordered by increasing threshold, from `(APCER, BPCER) =
/// (1, 0)` at −∞ to `(0, 1)` at +∞.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub n_bonafide: usize,
    pub n_attack: usize,
}

impl RocCurve {
    /// Checks sentinels, ordering and monotonicity.
    pub fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::invalid("curve", why.to_string()));
        let (Some(first), Some(last)) = (self.points.first(), self.points.last()) else {
            return bad("empty curve");
        };
        if self.points.len() < 2 || self.n_attack == 0 || self.n_bonafide == 0 {
            return bad("curve needs both classes and both sentinels");
        }
        if first.attacks_accepted != self.n_attack || first.bonafide_rejected != 0 {
            return bad("first point must be (APCER, BPCER) = (1, 0)");
        }
        if last.attacks_accepted != 0 || last.bonafide_rejected != self.n_bonafide {
            return bad("last point must be (APCER, BPCER) = (0, 1)");
        }
        for w in self.points.windows(2) {
            if w[0].threshold.partial_cmp(&w[1].threshold) != Some(std::cmp::Ordering::Less) {
                return bad("thresholds must increase");
            }
            if w[1].attacks_accepted > w[0].attacks_accepted
                || w[1].bonafide_rejected < w[0].bonafide_rejected
            {
                return bad("APCER must not increase and BPCER must not decrease");
            }
        }
        Ok(())
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Threshold sweep over midpoints of the sorted distinct scores.
pub fn roc(s: &ScoreSet) -> RocCurve {
    let attack = sorted(&s.attack);
    let bonafide = sorted(&s.bonafide);
    let mut union: Vec<f64> = attack.iter().chain(&bonafide).copied().collect();
    union.sort_by(f64::total_cmp);
    union.dedup();

    let (na, nb) = (attack.len(), bonafide.len());
    let point = |threshold: f64| {
        let attacks_accepted = na - attack.partition_point(|&x| x < threshold);
        let bonafide_rejected = bonafide.partition_point(|&x| x < threshold);
        RocPoint {
            threshold,
            apcer: attacks_accepted as f64 / na as f64,
            bpcer: bonafide_rejected as f64 / nb as f64,
            attacks_accepted,
            bonafide_rejected,
        }
    };
    let mut points = Vec::with_capacity(union.len() + 1);
    points.push(point(f64::NEG_INFINITY));
    points.extend(union.windows(2).map(|w| point(w[0] + 0.5 * (w[1] - w[0]))));
    points.push(point(f64::INFINITY));
    RocCurve {
        points,
        n_bonafide: nb,
        n_attack: na,
    }
}

/// Verifier AUC: trapezoidal area under `1 − BPCER` against `APCER`, equal to
/// `P(bona fide > attack) + ½·P(tie)`. A verifier that separates the classes
/// perfectly scores 1; lower values mean the attacks are harder to reject.
pub fn auc(c: &RocCurve) -> Result<f64> {
    c.validate()?;
    // Twice the area in units of 1/(na·nb), accumulated exactly.
    let nb = c.n_bonafide as u128;
    let mut twice: u128 = 0;
    for w in c.points.windows(2) {
        let dx = (w[0].attacks_accepted - w[1].attacks_accepted) as u128;
        let y0 = nb - w[0].bonafide_rejected as u128;
        let y1 = nb - w[1].bonafide_rejected as u128;
        twice += dx * (y0 + y1);
    }
    Ok(twice as f64 / (2.0 * c.n_attack as f64 * c.n_bonafide as f64))
}

/// Equal error rate: at the threshold minimizing |APCER − BPCER| (ties go to
/// the lower threshold) returns `((APCER + BPCER)/2, τ*)`.
pub fn eer(s: &ScoreSet) -> (f64, f64) {
    eer_from_curve(&roc(s))
}

fn eer_from_curve(c: &RocCurve) -> (f64, f64) {
    let (na, nb) = (c.n_attack as i128, c.n_bonafide as i128);
    let best = c
        .points
        .iter()
        .min_by_key(|p| (p.attacks_accepted as i128 * nb - p.bonafide_rejected as i128 * na).abs())
        .expect("curve has sentinels");
    (0.5 * (best.apcer + best.bpcer), best.threshold)
}

fn check_target(target: f64) -> Result<()> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid("target", format!("{target} not in (0, 1)")));
    }
    Ok(())
}

/// APCER at the lowest threshold where BPCER reaches `target`, i.e. the
/// first operating point met when raising the threshold from `-inf`.
pub fn apcer_at_bpcer(s: &ScoreSet, target: f64) -> Result<f64> {
    check_target(target)?;
    Ok(apcer_at_bpcer_curve(&roc(s), target))
}

fn apcer_at_bpcer_curve(c: &RocCurve, target: f64) -> f64 {
    c.points
        .iter()
        .find(|p| p.bpcer >= target)
        .map(|p| p.apcer)
        .expect("BPCER is 1 at +inf")
}

/// BPCER at the highest threshold where APCER reaches `target`, i.e. the
/// first operating point met when lowering the threshold from `+inf`.
pub fn bpcer_at_apcer(s: &ScoreSet, target: f64) -> Result<f64> {
    check_target(target)?;
    Ok(bpcer_at_apcer_curve(&roc(s), target))
}

fn bpcer_at_apcer_curve(c: &RocCurve, target: f64) -> f64 {
    c.points
        .iter()
        .rev()
        .find(|p| p.apcer >= target)
        .map(|p| p.bpcer)
        .expect("APCER is 1 at -inf")
}

/// Operating targets reported in [`MetricReport`].
pub const REPORT_TARGETS: [f64; 3] = [0.05, 0.10, 0.30];

/// Summary figures for one score set. All rates are fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricReport {
    pub auc: f64,
    pub eer: f64,
    /// May be ±∞ when the classes overlap completely; serialized as the
    /// strings `"inf"` / `"-inf"` in that case.
    #[serde(serialize_with = "ser_threshold", deserialize_with = "de_threshold")]
    pub eer_threshold: f64,
    pub apcer_at_bpcer_5: f64,
    pub apcer_at_bpcer_10: f64,
    pub apcer_at_bpcer_30: f64,
    pub bpcer_at_apcer_5: f64,
    pub bpcer_at_apcer_10: f64,
    pub bpcer_at_apcer_30: f64,
}

fn ser_threshold<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    }
}

fn de_threshold<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }
    match Repr::deserialize(d)? {
        Repr::Num(v) => Ok(v),
        Repr::Str(s) => match s.as_str() {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            other => Err(serde::de::Error::custom(format!("bad threshold {other:?}"))),
        },
    }
}

impl MetricReport {
    pub fn from_scores(s: &ScoreSet) -> Self {
        let curve = roc(s);
        let (eer, eer_threshold) = eer_from_curve(&curve);
        let [a5, a10, a30] = REPORT_TARGETS.map(|t| apcer_at_bpcer_curve(&curve, t));
        let [b5, b10, b30] = REPORT_TARGETS.map(|t| bpcer_at_apcer_curve(&curve, t));
        Self {
            auc: auc(&curve).expect("roc() builds valid curves"),
            eer,
            eer_threshold,
            apcer_at_bpcer_5: a5,
            apcer_at_bpcer_10: a10,
            apcer_at_bpcer_30: a30,
            bpcer_at_apcer_5: b5,
            bpcer_at_apcer_10: b10,
            bpcer_at_apcer_30: b30,
        }
    }

    /// All rate fields (everything but the threshold).
    pub fn rates(&self) -> [f64; 8] {
        [
            self.auc,
            self.eer,
            self.apcer_at_bpcer_5,
            self.apcer_at_bpcer_10,
            self.apcer_at_bpcer_30,
            self.bpcer_at_apcer_5,
            self.bpcer_at_apcer_10,
            self.bpcer_at_apcer_30,
        ]
    }
}

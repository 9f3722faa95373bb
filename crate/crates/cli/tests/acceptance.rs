//! Acceptance criteria 1-9. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use wavemorph_core::diffusion::{
    ddim_decode, ddim_step, loss_and_gradient, make_schedule, train_denoiser, CountingDenoiser,
    DenoiserLayout, NoiseSchedule, ScheduleParams, TrainConfig, TrainOutcome, TrainSample,
    TrainableDenoiser, ZeroDenoiser,
};
use wavemorph_core::io::{parse_roc_csv, read_report};
use wavemorph_core::latent::{preprocess, slerp, Encoder, LearnedEncoder, PoolPyramidEncoder};
use wavemorph_core::metrics::{apcer_at_bpcer, auc, bpcer_at_apcer, eer, roc, ssim, ScoreSet};
use wavemorph_core::pipeline::{make_toy_dataset, morph_with_stats, reconstruct};
use wavemorph_core::{
    dwt_haar, iwt_haar, morph, Band, ImageBuffer, ModelBundle, MorphMode, MorphRequest,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || {
        format!("{what}: got {got}, want {want} (tol {tol})")
    })
}

fn c1_wavelet() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut worst_energy) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let (h, w) = (2 * rng.random_range(1..=32), 2 * rng.random_range(1..=32));
        let img = ImageBuffer::from_fn(h, w, 1, |_, _, _| rng.random());
        let bands = dwt_haar(&img).map_err(|e| e.to_string())?;
        worst = worst.max(
            iwt_haar(&bands)
                .map_err(|e| e.to_string())?
                .max_abs_diff(&img),
        );
        let e0 = img.sum_of_squares();
        worst_energy = worst_energy.max((e0 - bands.energy()).abs() / e0);
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-10, || format!("reconstruction error {worst:e}"))?;
    ensure(worst_energy <= 1e-9, || {
        format!("energy error {worst_energy:e}")
    })?;
    ensure(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "max err {worst:.1e}, energy {worst_energy:.1e}, {elapsed:.2?}"
    ))
}

// The golden values are the rounded literals, not the library constants.
#[allow(clippy::approx_constant)]
fn c2_golden() -> Outcome {
    let e = |x: wavemorph_core::Error| x.to_string();
    let tol = 1e-6;
    let b =
        dwt_haar(&ImageBuffer::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).map_err(e)?).map_err(e)?;
    for (band, want) in [
        (Band::LL, 5.0),
        (Band::LH, -1.0),
        (Band::HL, -2.0),
        (Band::HH, 0.0),
    ] {
        within(&format!("{band:?}"), b.get(band).data()[0], want, tol)?;
    }
    let sched = make_schedule(2, 0.1, 0.2).map_err(e)?;
    let scalar = |v| ImageBuffer::filled(1, 1, 1, v);
    let step = ddim_step(&scalar(3.0), 2, &ZeroDenoiser, None, &sched).map_err(e)?;
    within("ddim step", step.data()[0], 3.3541020, tol)?;
    let decoded = ddim_decode(&scalar(1.0), None, &ZeroDenoiser, &sched, 2).map_err(e)?;
    within("ddim decode", decoded.data()[0], 1.1785113, tol)?;
    for v in slerp(&[1.0, 0.0], &[0.0, 1.0], 0.5).map_err(e)? {
        within("slerp", v, 0.7071068, tol)?;
    }
    let s = ssim(
        &ImageBuffer::filled(16, 16, 1, 0.5),
        &ImageBuffer::filled(16, 16, 1, 0.25),
    )
    .map_err(e)?;
    within("ssim", s, 0.8000640, tol)?;
    let (rate, _) = eer(&ScoreSet::new(vec![0.9, 0.8, 0.4], vec![0.7, 0.3, 0.2]).map_err(e)?);
    within("eer", rate, 1.0 / 3.0, tol)?;
    Ok("dwt, ddim step/decode, slerp, ssim, eer".into())
}

fn zero_bundle(io: usize) -> ModelBundle {
    ModelBundle::new(
        make_schedule(100, 1e-4, 0.02).unwrap(),
        Arc::new(ZeroDenoiser),
        Arc::new(PoolPyramidEncoder::new(io / 2, io / 2, 32).unwrap()),
        (io, io),
        100,
    )
    .unwrap()
}

fn c3_identity() -> Outcome {
    let m = zero_bundle(32);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (h, w) = (rng.random_range(16..=64), rng.random_range(16..=64));
        let a = ImageBuffer::from_fn(h, w, 1, |_, _, _| rng.random());
        let pre = preprocess(&a, (32, 32)).map_err(|e| e.to_string())?.image;
        for gamma in [0.0, 0.25, 0.5, 1.0] {
            let out = morph(&MorphRequest::new(a.clone(), a.clone()).gamma(gamma), &m)
                .map_err(|e| e.to_string())?;
            worst = worst.max(out.max_abs_diff(&pre));
        }
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

/// Brute-force metrics over every score, its float neighbours and ±∞.
struct Sweep {
    bonafide: Vec<f64>,
    attack: Vec<f64>,
    taus: Vec<f64>,
}

impl Sweep {
    fn new(bonafide: Vec<f64>, attack: Vec<f64>) -> Self {
        let mut taus = vec![f64::NEG_INFINITY, f64::INFINITY];
        for &x in bonafide.iter().chain(&attack) {
            taus.extend([x.next_down(), x, x.next_up()]);
        }
        taus.sort_by(f64::total_cmp);
        taus.dedup();
        Self {
            bonafide,
            attack,
            taus,
        }
    }

    /// Attacks accepted and bona fide rejected at `tau`.
    fn counts(&self, tau: f64) -> (usize, usize) {
        let a = self.attack.iter().filter(|&&x| x >= tau).count();
        let r = self.bonafide.iter().filter(|&&x| x < tau).count();
        (a, r)
    }

    fn rates(&self, tau: f64) -> (f64, f64) {
        let (a, r) = self.counts(tau);
        (
            a as f64 / self.attack.len() as f64,
            r as f64 / self.bonafide.len() as f64,
        )
    }

    fn auc(&self) -> f64 {
        let mut wins = 0.0;
        for b in &self.bonafide {
            for a in &self.attack {
                wins += if b > a {
                    1.0
                } else if b == a {
                    0.5
                } else {
                    0.0
                };
            }
        }
        wins / (self.bonafide.len() * self.attack.len()) as f64
    }

    fn eer(&self) -> f64 {
        // Cross-multiplied counts keep the gap comparison exact.
        let (na, nb) = (self.attack.len() as i64, self.bonafide.len() as i64);
        let gap = |t: f64| {
            let (a, r) = self.counts(t);
            (a as i64 * nb - r as i64 * na).abs()
        };
        let best = self.taus.iter().map(|&t| gap(t)).min().unwrap();
        let tau = *self.taus.iter().find(|&&t| gap(t) == best).unwrap();
        let (a, b) = self.rates(tau);
        0.5 * (a + b)
    }

    fn apcer_at_bpcer(&self, target: f64) -> f64 {
        let tau = *self
            .taus
            .iter()
            .find(|&&t| self.rates(t).1 >= target)
            .unwrap();
        self.rates(tau).0
    }

    fn bpcer_at_apcer(&self, target: f64) -> f64 {
        let tau = *self
            .taus
            .iter()
            .rev()
            .find(|&&t| self.rates(t).0 >= target)
            .unwrap();
        self.rates(tau).1
    }
}

fn c4_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let coarse = rng.random_bool(0.4);
        let shift = rng.random_range(-0.5..1.5);
        let (nb, na) = (rng.random_range(1..=50), rng.random_range(1..=50));
        let mut draw = |offset: f64, n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let x = rng.random::<f64>() + offset;
                    if coarse {
                        (x * 10.0).round() / 10.0
                    } else {
                        x
                    }
                })
                .collect()
        };
        let bonafide = draw(shift, nb);
        let attack = draw(0.0, na);
        let s = ScoreSet::new(bonafide.clone(), attack.clone()).map_err(|e| e.to_string())?;
        let sweep = Sweep::new(bonafide, attack);
        let curve = roc(&s);
        curve
            .validate()
            .map_err(|e| format!("roc invariants: {e}"))?;
        for w in curve.points.windows(2) {
            ensure(w[1].apcer <= w[0].apcer && w[1].bpcer >= w[0].bpcer, || {
                "roc not monotone".into()
            })?;
        }
        let mut diffs = vec![
            (auc(&curve).map_err(|e| e.to_string())?, sweep.auc()),
            (eer(&s).0, sweep.eer()),
        ];
        for t in [0.05, 0.1, 0.3, rng.random_range(0.001..0.999)] {
            diffs.push((
                apcer_at_bpcer(&s, t).map_err(|e| e.to_string())?,
                sweep.apcer_at_bpcer(t),
            ));
            diffs.push((
                bpcer_at_apcer(&s, t).map_err(|e| e.to_string())?,
                sweep.bpcer_at_apcer(t),
            ));
        }
        for (got, want) in diffs {
            worst = worst.max((got - want).abs());
        }
    }
    ensure(worst <= 1e-12, || {
        format!("max deviation from sweep {worst:e}")
    })?;
    Ok(format!("200 sets, max deviation {worst:.1e}"))
}

fn c5_gradients() -> Outcome {
    let start = Instant::now();
    let h = 1e-5;
    let sched = make_schedule(20, 1e-3, 0.1).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let layout = DenoiserLayout {
            height: 4,
            width: 4,
            semantic_dim: 3,
            hidden: 8,
        };
        let mut den = TrainableDenoiser::new(layout, seed).map_err(|e| e.to_string())?;
        let mut enc = LearnedEncoder::new(4, 4, 3, seed + 10).map_err(|e| e.to_string())?;
        let batch: Vec<TrainSample> = (0..3)
            .map(|_| TrainSample {
                image: ImageBuffer::from_fn(4, 4, 1, |_, _, _| rng.random()),
                t: rng.random_range(1..=20),
                eps: ImageBuffer::from_fn(4, 4, 1, |_, _, _| rng.sample(StandardNormal)),
            })
            .collect();
        let loss = |d: &TrainableDenoiser, e: &LearnedEncoder| {
            loss_and_gradient(d, &Encoder::Learned(e.clone()), &sched, &batch)
                .unwrap()
                .0
        };
        let (_, grad) = loss_and_gradient(&den, &Encoder::Learned(enc.clone()), &sched, &batch)
            .map_err(|e| e.to_string())?;
        let mut compare = |analytic: f64, numeric: f64| {
            checked += 1;
            // Both below 1e-10: indistinguishable from zero at this step size.
            if analytic.abs() >= 1e-10 || numeric.abs() >= 1e-10 {
                worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()));
            }
        };
        let p = den.parameters();
        for i in 0..p.len() {
            let mut q = p.clone();
            q[i] = p[i] + h;
            den.set_parameters(&q).unwrap();
            let up = loss(&den, &enc);
            q[i] = p[i] - h;
            den.set_parameters(&q).unwrap();
            let down = loss(&den, &enc);
            compare(grad.denoiser[i], (up - down) / (2.0 * h));
        }
        den.set_parameters(&p).unwrap();
        let p = enc.parameters();
        for i in 0..p.len() {
            let mut q = p.clone();
            q[i] = p[i] + h;
            enc.set_parameters(&q).unwrap();
            let up = loss(&den, &enc);
            q[i] = p[i] - h;
            enc.set_parameters(&q).unwrap();
            let down = loss(&den, &enc);
            compare(grad.encoder[i], (up - down) / (2.0 * h));
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-4, || format!("max relative error {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{checked} parameters, max rel err {worst:.1e}, {elapsed:.2?}"
    ))
}

/// Loss fixtures of the reference run, recorded from its first run.
const FIRST_EPOCH_LOSS: f64 = 0.996136409956954;
const FINAL_EPOCH_LOSS: f64 = 0.7372563158522578;

struct Reference {
    faces: Vec<ImageBuffer>,
    planes: Vec<ImageBuffer>,
    outcome: TrainOutcome,
    bundle: ModelBundle,
    elapsed: Duration,
}

/// Seed 7, 64 toy faces of 5 identities preprocessed to 32x32, trained on
/// their 16x16 LL planes with the default configuration.
fn reference_run() -> Reference {
    let start = Instant::now();
    let faces: Vec<ImageBuffer> = make_toy_dataset(64, 32, 5, 7)
        .unwrap()
        .into_iter()
        .map(|f| f.image)
        .collect();
    let planes: Vec<ImageBuffer> = faces
        .iter()
        .map(|f| {
            let pre = preprocess(f, (32, 32)).unwrap().image;
            dwt_haar(&pre).unwrap().get(Band::LL).map(|v| 0.5 * v)
        })
        .collect();
    let cfg = TrainConfig::default();
    let encoder = Encoder::Pool(PoolPyramidEncoder::new(16, 16, 32).unwrap());
    let outcome = train_denoiser(&planes, &encoder, &cfg).unwrap();
    let bundle = ModelBundle::new(
        NoiseSchedule::new(ScheduleParams::default()).unwrap(),
        Arc::new(outcome.denoiser.clone()),
        Arc::new(outcome.encoder.clone()),
        (32, 32),
        100,
    )
    .unwrap();
    Reference {
        faces,
        planes,
        outcome,
        bundle,
        elapsed: start.elapsed(),
    }
}

fn c6_training(r: &Reference) -> Outcome {
    let e = |x: wavemorph_core::Error| x.to_string();
    let (first, last) = (r.outcome.losses[0], *r.outcome.losses.last().unwrap());
    ensure(r.outcome.losses.len() == 200, || {
        "expected 200 epochs".into()
    })?;
    ensure(last < first, || {
        format!("loss {first} -> {last} did not decrease")
    })?;
    within(
        "first-epoch fixture",
        first,
        FIRST_EPOCH_LOSS,
        1e-9 * FIRST_EPOCH_LOSS,
    )?;
    within(
        "final-epoch fixture",
        last,
        FINAL_EPOCH_LOSS,
        1e-9 * FINAL_EPOCH_LOSS,
    )?;

    let n = 16;
    let mut roundtrip = 0.0;
    let mut recon = 0.0;
    for (face, plane) in r.faces.iter().zip(&r.planes).take(n) {
        let back = r
            .bundle
            .decode_latents(&r.bundle.encode_latents(plane).map_err(e)?)
            .map_err(e)?;
        roundtrip += back.mean_abs_diff(plane) / n as f64;
        let pre = preprocess(face, (32, 32)).map_err(e)?.image;
        recon += reconstruct(face, &r.bundle).map_err(e)?.mean_abs_diff(&pre) / n as f64;
    }
    ensure(roundtrip < 0.05, || format!("round-trip error {roundtrip}"))?;
    ensure(recon < 0.05, || format!("reconstruct error {recon}"))?;
    ensure(r.elapsed < Duration::from_secs(600), || {
        format!("took {:?}", r.elapsed)
    })?;
    Ok(format!(
        "loss {first:.6} -> {last:.6}, round-trip {roundtrip:.2e}, reconstruct {recon:.2e}, train {:.2?}",
        r.elapsed
    ))
}

fn counting_bundle(r: &Reference) -> (Arc<CountingDenoiser<TrainableDenoiser>>, ModelBundle) {
    let counting = Arc::new(CountingDenoiser::new(r.outcome.denoiser.clone()));
    let m = r.bundle.with_denoiser(counting.clone());
    (counting, m)
}

fn c7_resolution(r: &Reference) -> Outcome {
    let (counting, m) = counting_bundle(r);
    let req = MorphRequest::new(r.faces[0].clone(), r.faces[1].clone());
    ensure(r.faces[0].shape() == (32, 32, 1), || {
        "inputs are not 32x32".into()
    })?;
    let out = morph_with_stats(&req, &m).map_err(|e| e.to_string())?;
    ensure(out.image.shape() == (32, 32, 1), || {
        format!("morph shape {:?}", out.image.shape())
    })?;
    let shapes = counting.shapes();
    ensure(shapes == vec![(16, 16, 1)], || {
        format!("denoiser saw {shapes:?}")
    })?;
    ensure(out.stats.operating_shape == (16, 16), || {
        format!("{:?}", out.stats.operating_shape)
    })?;
    Ok(format!("32x32 -> 32x32, denoiser inputs {shapes:?}"))
}

fn c8_ablation(r: &Reference) -> Outcome {
    let (counting, m) = counting_bundle(r);
    let req = MorphRequest::new(r.faces[2].clone(), r.faces[3].clone());
    let mut evals = Vec::new();
    for mode in [MorphMode::LlOnly, MorphMode::AllSubbands] {
        counting.reset();
        let out = morph_with_stats(&req.clone().mode(mode), &m).map_err(|e| e.to_string())?;
        ensure(out.image.shape() == (32, 32, 1), || {
            format!("{mode:?} shape {:?}", out.image.shape())
        })?;
        ensure(out.image.data().iter().all(|v| v.is_finite()), || {
            format!("{mode:?} not finite")
        })?;
        evals.push(counting.calls());
    }
    let ratio = evals[1] as f64 / evals[0] as f64;
    ensure(ratio >= 3.5, || format!("ratio {ratio}"))?;
    Ok(format!(
        "ll {} evals, all {} evals, ratio {ratio:.2}",
        evals[0], evals[1]
    ))
}

fn c9_vulnerability() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name);
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(env!("CARGO_BIN_EXE_wavemorph"))
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
        })
    };
    let s = |path: &Path| path.to_str().unwrap().to_string();
    let (data, bundle, report) = (s(&p("data")), s(&p("bundle")), s(&p("report.json")));
    run(&[
        "make-dataset",
        "--n",
        "64",
        "--size",
        "32",
        "--identities",
        "5",
        "--seed",
        "7",
        "--out",
        &data,
    ])?;
    run(&["train", "--data", &data, "--out", &bundle])?;
    run(&[
        "vulnerability",
        "--bundle",
        &bundle,
        "--data",
        &data,
        "--out",
        &report,
    ])?;

    let r = read_report(&report).map_err(|e| e.to_string())?;
    let rates = r.rates();
    ensure(rates.iter().all(|v| (0.0..=1.0).contains(v)), || {
        format!("rates {rates:?}")
    })?;
    let csv = fs::read_to_string(p("report.json.roc.csv")).map_err(|e| e.to_string())?;
    let rows = parse_roc_csv(&csv).map_err(|e| e.to_string())?;
    for w in rows.windows(2) {
        ensure(
            w[0].0 < w[1].0 && w[1].1 <= w[0].1 && w[1].2 >= w[0].2,
            || format!("ROC not monotone at {:?} -> {:?}", w[0], w[1]),
        )?;
    }
    let groups: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(p("report.json.groups.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let same = groups["same_identity"]["eer"]
        .as_f64()
        .ok_or("missing same_identity eer")?;
    let distant = groups["distant_identity"]["eer"]
        .as_f64()
        .ok_or("missing distant_identity eer")?;
    ensure(same > distant, || {
        format!("same-identity EER {same} <= distant-identity EER {distant}")
    })?;
    Ok(format!(
        "AUC {:.3}, EER {:.3}; same-identity EER {same:.3} > distant-identity EER {distant:.3}",
        r.auc, r.eer
    ))
}

fn report(id: u32, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match result {
        Ok(detail) => {
            println!("PASS {id} {name}: {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL {id} {name}: {detail}");
            false
        }
    }
}

fn main() {
    let mut ok = true;
    ok &= report(1, "wavelet exactness", c1_wavelet);
    ok &= report(2, "golden values", c2_golden);
    ok &= report(3, "zero-denoiser identity", c3_identity);
    ok &= report(4, "metric oracle equivalence", c4_metrics);
    ok &= report(5, "gradient check", c5_gradients);
    let reference = panic::catch_unwind(reference_run);
    match &reference {
        Ok(r) => {
            ok &= report(6, "reference training run", || c6_training(r));
            ok &= report(7, "resolution contract", || c7_resolution(r));
            ok &= report(8, "ablation evaluation count", || c8_ablation(r));
        }
        Err(_) => {
            for (id, name) in [
                (6, "reference training run"),
                (7, "resolution contract"),
                (8, "ablation evaluation count"),
            ] {
                println!("FAIL {id} {name}: reference run panicked");
            }
            ok = false;
        }
    }
    ok &= report(9, "toy vulnerability study", c9_vulnerability);
    if !ok {
        std::process::exit(1);
    }
}

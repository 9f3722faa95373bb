//! `wavemorph` command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 data or format error, 4 numeric
//! or contract violation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use serde::Serialize;

use wavemorph_core::diffusion::train_denoiser;
use wavemorph_core::io::{
    emit_curves, load_bundle, load_config, read_dataset, read_manifest, read_pgm, read_scores,
    read_subbands, read_tensor, roc_csv, roc_svg, save_bundle, write_dataset, write_json,
    write_pgm, write_report, write_run_log, write_scores, write_subbands, write_tensor,
    EncoderKind, RunConfig, RunLog, SavedBundle, DEFAULT_MAXVAL,
};
use wavemorph_core::latent::{preprocess, Encoder, LearnedEncoder, PoolPyramidEncoder};
use wavemorph_core::metrics::{roc, BaselineEmbedder, MetricReport};
use wavemorph_core::pipeline::{
    batch_morph, make_toy_dataset, morph, vulnerability_study, MorphMode, MorphRequest,
    StudyOptions,
};
use wavemorph_core::{dwt_haar, iwt_haar, Band, Error, ErrorClass, Result, SubBands};

#[derive(Parser)]
#[command(
    name = "wavemorph",
    version,
    about = "Wavelet-domain diffusion face morphing toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-level Haar decomposition of a PGM into sub-band WAFT files.
    Decompose {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inverse transform of a directory written by `decompose`.
    Reconstruct {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthetic face dataset as PGM files plus labels.csv.
    MakeDataset {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        size: usize,
        #[arg(long)]
        identities: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trains a denoiser on the LL planes of a dataset and writes a bundle.
    Train {
        /// Run configuration (or a previous run log); defaults if absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Morphs two subjects.
    Morph {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value = "ll")]
        mode: MorphMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Morphs every line `a,b,gamma,out` of a manifest.
    BatchMorph {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value = "ll")]
        mode: MorphMode,
    },
    /// Metric report (and optional ROC CSV / SVG) for a score file.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        roc: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// End-to-end toy study: morph same-identity and distant-identity pairs,
    /// score them against held-out probes and report.
    Vulnerability {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// ROC CSV of the overall score set [default: <out>.roc.csv]
        #[arg(long)]
        roc: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Per-group reports [default: <out>.groups.json]
        #[arg(long)]
        groups: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        morphs_per_identity: usize,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value = "ll")]
        mode: MorphMode,
    },
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))
}

fn log_run(path: &Path, command: &str, config: &RunConfig) -> Result<()> {
    let args = std::env::args().skip(1).collect();
    write_run_log(&RunLog::new(command, args, config), path)
}

/// Effective configuration of a stored bundle, for run logs.
fn bundle_config(b: &SavedBundle, gamma: f64, mode: MorphMode) -> RunConfig {
    let layout = b.denoiser.layout();
    RunConfig {
        io_resolution: [b.io_resolution.0, b.io_resolution.1],
        ddim_steps: b.ddim_steps,
        schedule: b.schedule,
        encoder: match b.encoder {
            Encoder::Pool(_) => EncoderKind::Pool,
            Encoder::Learned(_) => EncoderKind::Learned,
        },
        semantic_dim: layout.semantic_dim,
        seed: b.seed,
        gamma,
        mode,
        ..RunConfig::default()
    }
}

const BAND_FILES: [(Band, &str); 4] = [
    (Band::LL, "ll.waft"),
    (Band::LH, "lh.waft"),
    (Band::HL, "hl.waft"),
    (Band::HH, "hh.waft"),
];

fn decompose(input: &Path, out: &Path) -> Result<()> {
    let img = read_pgm(input)?;
    let bands = dwt_haar(&img)?;
    ensure_dir(out)?;
    for (band, name) in BAND_FILES {
        write_tensor(out.join(name), bands.get(band))?;
    }
    write_subbands(out.join("subbands.waft"), &bands)?;
    log_run(&out.join("run.json"), "decompose", &RunConfig::default())
}

fn reconstruct(dir: &Path, out: &Path) -> Result<()> {
    let bands = if dir.join("ll.waft").exists() {
        let [ll, lh, hl, hh] = BAND_FILES.map(|(_, name)| read_tensor(dir.join(name)));
        SubBands::new(ll?, lh?, hl?, hh?)?
    } else {
        read_subbands(dir.join("subbands.waft"))?
    };
    write_pgm(&iwt_haar(&bands)?, out, DEFAULT_MAXVAL)?;
    log_run(
        &with_suffix(out, ".run.json"),
        "reconstruct",
        &RunConfig::default(),
    )
}

fn make_dataset(n: usize, size: usize, identities: usize, seed: u64, out: &Path) -> Result<()> {
    let faces = make_toy_dataset(n, size, identities, seed)?;
    write_dataset(out, &faces)?;
    let cfg = RunConfig {
        seed,
        ..RunConfig::default()
    };
    log_run(&out.join("run.json"), "make-dataset", &cfg)
}

fn train(config: Option<&Path>, data: &Path, out: &Path) -> Result<()> {
    let cfg = match config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let faces = read_dataset(data)?;
    let (oh, ow) = cfg.operating_resolution();
    let planes = faces
        .iter()
        .map(|f| {
            let img = preprocess(&f.image, cfg.io_resolution())?.image;
            Ok(dwt_haar(&img)?.ll.map(|v| 0.5 * v))
        })
        .collect::<Result<Vec<_>>>()?;
    let encoder = match cfg.encoder {
        EncoderKind::Pool => Encoder::Pool(PoolPyramidEncoder::new(oh, ow, cfg.semantic_dim)?),
        EncoderKind::Learned => {
            Encoder::Learned(LearnedEncoder::new(oh, ow, cfg.semantic_dim, cfg.seed)?)
        }
    };
    info!("training on {} planes of {oh}x{ow}", planes.len());
    let outcome = train_denoiser(&planes, &encoder, &cfg.train_config())?;
    let saved = SavedBundle {
        schedule: cfg.schedule,
        ddim_steps: cfg.ddim_steps,
        io_resolution: cfg.io_resolution(),
        denoiser: outcome.denoiser,
        seed: cfg.seed,
        encoder: outcome.encoder,
    };
    save_bundle(out, &saved)?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in outcome.losses.iter().enumerate() {
        csv.push_str(&format!("{},{l}\n", i + 1));
    }
    let path = out.join("loss.csv");
    fs::write(&path, csv).map_err(|e| Error::file(&path, e))?;
    if let (Some(first), Some(last)) = (outcome.losses.first(), outcome.losses.last()) {
        info!("loss {first} -> {last}");
    }
    log_run(&out.join("run.json"), "train", &cfg)
}

fn run_morph(
    a: &Path,
    b: &Path,
    bundle: &Path,
    gamma: f64,
    mode: MorphMode,
    out: &Path,
) -> Result<()> {
    let saved = load_bundle(bundle)?;
    let m = saved.model_bundle()?;
    let req = MorphRequest::new(read_pgm(a)?, read_pgm(b)?)
        .gamma(gamma)
        .mode(mode);
    write_pgm(&morph(&req, &m)?, out, DEFAULT_MAXVAL)?;
    log_run(
        &with_suffix(out, ".run.json"),
        "morph",
        &bundle_config(&saved, gamma, mode),
    )
}

fn run_batch(manifest: &Path, bundle: &Path, mode: MorphMode) -> Result<()> {
    let saved = load_bundle(bundle)?;
    let m = saved.model_bundle()?;
    let entries = read_manifest(manifest)?;
    let reqs = entries
        .iter()
        .map(|e| {
            Ok(
                MorphRequest::new(read_pgm(&e.subject_a)?, read_pgm(&e.subject_b)?)
                    .gamma(e.gamma)
                    .mode(mode),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let images = batch_morph(&reqs, &m)?;
    for (img, e) in images.iter().zip(&entries) {
        write_pgm(img, &e.output, DEFAULT_MAXVAL)?;
    }
    info!("wrote {} morphs", images.len());
    log_run(
        &with_suffix(manifest, ".run.json"),
        "batch-morph",
        &bundle_config(&saved, 0.5, mode),
    )
}

fn evaluate(scores: &Path, out: &Path, roc_path: Option<&Path>, svg: Option<&Path>) -> Result<()> {
    let s = read_scores(scores)?;
    write_report(&MetricReport::from_scores(&s), out)?;
    let curve = roc(&s);
    match roc_path {
        Some(csv) => emit_curves(&curve, csv, svg, "scores")?,
        None => {
            if let Some(svg) = svg {
                fs::write(svg, roc_svg(&[("scores", &curve)])).map_err(|e| Error::file(svg, e))?;
            }
        }
    }
    log_run(
        &with_suffix(out, ".run.json"),
        "evaluate",
        &RunConfig::default(),
    )
}

#[derive(Serialize)]
struct GroupReports {
    same_identity: MetricReport,
    distant_identity: MetricReport,
    /// For each identity, the identity its distant morphs were paired with.
    distant_partner: Vec<usize>,
}

#[allow(clippy::too_many_arguments)]
fn vulnerability(
    bundle: &Path,
    data: &Path,
    out: &Path,
    roc_path: Option<&Path>,
    svg: Option<&Path>,
    groups: Option<&Path>,
    opts: StudyOptions,
) -> Result<()> {
    let saved = load_bundle(bundle)?;
    let m = saved.model_bundle()?;
    let faces = read_dataset(data)?;
    let study = vulnerability_study(&faces, &m, &BaselineEmbedder::default(), &opts)?;
    write_report(&MetricReport::from_scores(&study.overall), out)?;
    write_scores(&study.overall, with_suffix(out, ".scores.csv"))?;

    let roc_path = roc_path.map_or_else(|| with_suffix(out, ".roc.csv"), Path::to_path_buf);
    let overall = roc(&study.overall);
    fs::write(&roc_path, roc_csv(&overall)).map_err(|e| Error::file(&roc_path, e))?;
    if let Some(svg) = svg {
        let (same, distant) = (roc(&study.same_identity), roc(&study.distant_identity));
        let text = roc_svg(&[
            ("all morphs", &overall),
            ("same identity", &same),
            ("distant identity", &distant),
        ]);
        fs::write(svg, text).map_err(|e| Error::file(svg, e))?;
    }
    let groups = groups.map_or_else(|| with_suffix(out, ".groups.json"), Path::to_path_buf);
    write_json(
        &GroupReports {
            same_identity: MetricReport::from_scores(&study.same_identity),
            distant_identity: MetricReport::from_scores(&study.distant_identity),
            distant_partner: study.distant_partner,
        },
        &groups,
    )?;
    log_run(
        &with_suffix(out, ".run.json"),
        "vulnerability",
        &bundle_config(&saved, opts.gamma, opts.mode),
    )
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Decompose { input, out } => decompose(&input, &out),
        Command::Reconstruct { dir, out } => reconstruct(&dir, &out),
        Command::MakeDataset {
            n,
            size,
            identities,
            seed,
            out,
        } => make_dataset(n, size, identities, seed, &out),
        Command::Train { config, data, out } => train(config.as_deref(), &data, &out),
        Command::Morph {
            a,
            b,
            bundle,
            gamma,
            mode,
            out,
        } => run_morph(&a, &b, &bundle, gamma, mode, &out),
        Command::BatchMorph {
            manifest,
            bundle,
            mode,
        } => run_batch(&manifest, &bundle, mode),
        Command::Evaluate {
            scores,
            out,
            roc,
            svg,
        } => evaluate(&scores, &out, roc.as_deref(), svg.as_deref()),
        Command::Vulnerability {
            bundle,
            data,
            out,
            roc,
            svg,
            groups,
            morphs_per_identity,
            gamma,
            mode,
        } => vulnerability(
            &bundle,
            &data,
            &out,
            roc.as_deref(),
            svg.as_deref(),
            groups.as_deref(),
            StudyOptions {
                morphs_per_identity,
                gamma,
                mode,
                ..StudyOptions::default()
            },
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Data => 3,
                ErrorClass::Contract => 4,
            })
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use wavemorph_core::io::{parse_roc_csv, read_pgm, read_report};

fn wm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavemorph"))
        .args(args)
        .output()
        .expect("spawn wavemorph")
}

fn ok(args: &[&str]) {
    let out = wm(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_CONFIG: &str = r#"{
  "io_resolution": [16, 16],
  "ddim_steps": 10,
  "schedule": {"T": 20},
  "semantic_dim": 8,
  "train": {"epochs": 3, "hidden": 16, "batch_size": 4}
}"#;

/// Dataset of 16x16 faces and a bundle trained briefly on it.
struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let f = Self { dir };
        ok(&[
            "make-dataset",
            "--n",
            "16",
            "--size",
            "16",
            "--identities",
            "4",
            "--seed",
            "3",
            "--out",
            s(&f.data()),
        ]);
        fs::write(f.path("config.json"), SMALL_CONFIG).unwrap();
        ok(&[
            "train",
            "--config",
            s(&f.path("config.json")),
            "--data",
            s(&f.data()),
            "--out",
            s(&f.bundle()),
        ]);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn data(&self) -> PathBuf {
        self.path("data")
    }

    fn bundle(&self) -> PathBuf {
        self.path("bundle")
    }

    fn face(&self, i: usize) -> PathBuf {
        self.data().join(format!("face_{i:04}.pgm"))
    }
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    assert_eq!(wm(&[]).status.code(), Some(2));
    assert_eq!(wm(&["morph", "--no-such-flag"]).status.code(), Some(2));
    let missing = f.path("missing.pgm");
    let out = f.path("m.pgm");
    let (a, b, bundle) = (f.face(0), f.face(1), f.bundle());
    let code = |args: &[&str]| wm(args).status.code();
    assert_eq!(
        code(&[
            "morph",
            s(&missing),
            s(&b),
            "--bundle",
            s(&bundle),
            "--out",
            s(&out)
        ]),
        Some(3)
    );
    assert_eq!(
        code(&[
            "morph",
            s(&a),
            s(&b),
            "--bundle",
            s(&bundle),
            "--gamma",
            "2",
            "--out",
            s(&out)
        ]),
        Some(4)
    );
    assert!(!out.exists());
    let err = wm(&[
        "morph",
        s(&a),
        s(&b),
        "--bundle",
        s(&bundle),
        "--gamma",
        "2",
        "--out",
        s(&out),
    ]);
    assert!(!err.stderr.is_empty());
}

#[test]
fn rerun_from_run_log_is_bit_identical() {
    let f = Fixture::new();
    let again = f.path("again");
    let log = f.bundle().join("run.json");
    ok(&[
        "train",
        "--config",
        s(&log),
        "--data",
        s(&f.data()),
        "--out",
        s(&again),
    ]);
    for name in [
        "schedule.json",
        "denoiser.waft",
        "denoiser.json",
        "encoder.waft",
        "encoder.json",
        "loss.csv",
    ] {
        let (x, y) = (
            fs::read(f.bundle().join(name)).unwrap(),
            fs::read(again.join(name)).unwrap(),
        );
        assert!(x == y, "{name} differs");
    }

    let (a, b) = (f.face(0), f.face(5));
    let (m1, m2) = (f.path("m1.pgm"), f.path("m2.pgm"));
    ok(&[
        "morph",
        s(&a),
        s(&b),
        "--bundle",
        s(&f.bundle()),
        "--gamma",
        "0.3",
        "--out",
        s(&m1),
    ]);
    ok(&[
        "morph",
        s(&a),
        s(&b),
        "--bundle",
        s(&again),
        "--gamma",
        "0.3",
        "--out",
        s(&m2),
    ]);
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());
    assert_eq!(read_pgm(&m1).unwrap().shape(), (16, 16, 1));
}

#[test]
fn decompose_reconstruct_round_trip() {
    let f = Fixture::new();
    let bands = f.path("bands");
    let back = f.path("back.pgm");
    ok(&["decompose", s(&f.face(2)), "--out", s(&bands)]);
    for name in [
        "ll.waft",
        "lh.waft",
        "hl.waft",
        "hh.waft",
        "subbands.waft",
        "run.json",
    ] {
        assert!(bands.join(name).exists(), "{name}");
    }
    ok(&["reconstruct", s(&bands), "--out", s(&back)]);
    let (x, y) = (read_pgm(f.face(2)).unwrap(), read_pgm(&back).unwrap());
    assert!(x.max_abs_diff(&y) <= 1e-12);
}

#[test]
fn batch_morph_matches_single_morphs() {
    let f = Fixture::new();
    let out = f.path("out");
    fs::create_dir(&out).unwrap();
    let manifest = "subject_a,subject_b,gamma,output\n\
                    data/face_0000.pgm,data/face_0001.pgm,0.5,out/x.pgm\n\
                    data/face_0002.pgm,data/face_0003.pgm,0.25,out/y.pgm\n";
    fs::write(f.path("manifest.csv"), manifest).unwrap();
    ok(&[
        "batch-morph",
        "--manifest",
        s(&f.path("manifest.csv")),
        "--bundle",
        s(&f.bundle()),
    ]);
    for (a, b, g, name) in [(0, 1, "0.5", "x"), (2, 3, "0.25", "y")] {
        let single = f.path(&format!("{name}_single.pgm"));
        ok(&[
            "morph",
            s(&f.face(a)),
            s(&f.face(b)),
            "--bundle",
            s(&f.bundle()),
            "--gamma",
            g,
            "--out",
            s(&single),
        ]);
        let batch = out.join(format!("{name}.pgm"));
        assert_eq!(fs::read(batch).unwrap(), fs::read(single).unwrap());
    }
}

#[test]
fn evaluate_writes_report_and_curves() {
    let dir = TempDir::new().unwrap();
    let scores = dir.path().join("scores.csv");
    fs::write(&scores, "label,score\nbonafide,0.9\nbonafide,0.8\nbonafide,0.4\nattack,0.7\nattack,0.3\nattack,0.2\n").unwrap();
    let (report, roc, svg) = (
        dir.path().join("r.json"),
        dir.path().join("r.csv"),
        dir.path().join("r.svg"),
    );
    ok(&[
        "evaluate",
        "--scores",
        s(&scores),
        "--out",
        s(&report),
        "--roc",
        s(&roc),
        "--svg",
        s(&svg),
    ]);
    let r = read_report(&report).unwrap();
    assert!((r.eer - 1.0 / 3.0).abs() < 1e-12);
    let rows = parse_roc_csv(&fs::read_to_string(&roc).unwrap()).unwrap();
    assert_eq!(rows.len(), 7);
    for w in rows.windows(2) {
        assert!(w[0].0 < w[1].0 && w[1].1 <= w[0].1 && w[1].2 >= w[0].2);
    }
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn vulnerability_writes_all_outputs() {
    let f = Fixture::new();
    let report = f.path("vuln.json");
    ok(&[
        "vulnerability",
        "--bundle",
        s(&f.bundle()),
        "--data",
        s(&f.data()),
        "--out",
        s(&report),
        "--morphs-per-identity",
        "1",
    ]);
    for suffix in ["", ".roc.csv", ".groups.json", ".scores.csv", ".run.json"] {
        assert!(f.path(&format!("vuln.json{suffix}")).exists(), "{suffix}");
    }
    let r = read_report(&report).unwrap();
    assert!((0.0..=1.0).contains(&r.auc));
}

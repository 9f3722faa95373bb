//! Score CSV (`label,score`) and JSON reports.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{MetricReport, ScoreSet};

pub const SCORES_HEADER: &str = "label,score";

/// Line numbers in errors are 1-based and count the header.
pub fn parse_scores(text: &str) -> Result<ScoreSet> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SCORES_HEADER => {}
        Some((_, h)) => {
            return Err(Error::Line {
                line: 1,
                reason: format!("expected header {SCORES_HEADER:?}, found {h:?}"),
            })
        }
        None => return Err(Error::EmptyInput("score file is empty".into())),
    }
    let (mut bonafide, mut attack) = (Vec::new(), Vec::new());
    for (i, raw) in lines {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let Some((label, score)) = raw.split_once(',') else {
            return Err(Error::Line {
                line,
                reason: format!("expected label,score, found {raw:?}"),
            });
        };
        let score: f64 = score.trim().parse().map_err(|_| Error::Line {
            line,
            reason: format!("score {:?} is not a number", score.trim()),
        })?;
        if !score.is_finite() {
            return Err(Error::Line {
                line,
                reason: format!("score {score} is not finite"),
            });
        }
        match label.trim() {
            "bonafide" => bonafide.push(score),
            "attack" => attack.push(score),
            other => {
                return Err(Error::Line {
                    line,
                    reason: format!("unknown label {other:?}, expected bonafide or attack"),
                })
            }
        }
    }
    ScoreSet::new(bonafide, attack)
}

pub fn format_scores(s: &ScoreSet) -> String {
    let mut out = format!("{SCORES_HEADER}\n");
    for v in s.bonafide() {
        out.push_str(&format!("bonafide,{v}\n"));
    }
    for v in s.attack() {
        out.push_str(&format!("attack,{v}\n"));
    }
    out
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<ScoreSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_scores(&text)
}

pub fn write_scores(s: &ScoreSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_scores(s)).map_err(|e| Error::file(path, e))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

pub fn write_report(report: &MetricReport, path: impl AsRef<Path>) -> Result<()> {
    write_json(report, path)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<MetricReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

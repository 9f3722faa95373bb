//! ROC emission: `threshold,apcer,bpcer` CSV and a standalone SVG plot.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::RocCurve;

pub const ROC_HEADER: &str = "threshold,apcer,bpcer";

/// One row per operating point, sentinels included (`-inf` first).
pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = format!("{ROC_HEADER}\n");
    for p in &curve.points {
        writeln!(out, "{},{},{}", p.threshold, p.apcer, p.bpcer).expect("write to string");
    }
    out
}

/// Parses [`roc_csv`] output back into `(threshold, apcer, bpcer)` rows.
pub fn parse_roc_csv(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some(ROC_HEADER) {
        return Err(Error::Line {
            line: 1,
            reason: format!("expected header {ROC_HEADER:?}"),
        });
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = |reason: String| Error::Line {
                line: i + 1,
                reason,
            };
            let f: Vec<f64> = l
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| bad(format!("bad number {x:?}")))
                })
                .collect::<Result<_>>()?;
            match f[..] {
                [t, a, b] => Ok((t, a, b)),
                _ => Err(bad(format!("expected 3 fields, found {}", f.len()))),
            }
        })
        .collect()
}

const W: f64 = 480.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// APCER against BPCER for each named curve, both axes in `[0, 1]`.
pub fn roc_svg(series: &[(&str, &RocCurve)]) -> String {
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let x = |v: f64| LEFT + v * pw;
    let y = |v: f64| TOP + (1.0 - v) * ph;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#ddd"/>"##,
            x(v),
            y(0.0),
            x(v),
            y(1.0)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#ddd"/>"##,
            x(0.0),
            y(v),
            x(1.0),
            y(v)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v:.2}</text>"#,
            x(v),
            y(0.0) + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
            x(0.0) - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">BPCER</text>"#,
        x(0.5),
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">APCER</text>"#,
        y(0.5),
        y(0.5)
    );
    for (i, (name, curve)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.bpcer), y(p.apcer)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the CSV and, if asked, an SVG with the single series `label`.
pub fn emit_curves(
    curve: &RocCurve,
    path_csv: impl AsRef<Path>,
    path_svg: Option<&Path>,
    label: &str,
) -> Result<()> {
    let path_csv = path_csv.as_ref();
    fs::write(path_csv, roc_csv(curve)).map_err(|e| Error::file(path_csv, e))?;
    if let Some(svg) = path_svg {
        fs::write(svg, roc_svg(&[(label, curve)])).map_err(|e| Error::file(svg, e))?;
    }
    Ok(())
}

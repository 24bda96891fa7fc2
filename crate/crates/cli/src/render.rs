//! Static SVG renderings of the three panels of a run: Kaplan-Meier curves
//! (A), cumulative gain/loss (B) and conditional gain intervals (C).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};
use crate::output::{read_to_string, write_file};
use crate::run::{SummaryFile, CONDITIONAL, GAIN_CURVE, KM_CONTROL, KM_TEST, SUMMARY};

pub const PANEL_A: &str = "panel_a_km.svg";
pub const PANEL_B: &str = "panel_b_gain.svg";
pub const PANEL_C: &str = "panel_c_conditional.svg";

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 52.0;
const CONTROL_COLOUR: &str = "#1f77b4";
const TEST_COLOUR: &str = "#d62728";

/// Reads a numeric CSV written by `pie run`; non-numeric cells come back as
/// NaN and the raw text is kept alongside.
fn read_table(path: &Path) -> Result<Vec<(Vec<f64>, Vec<String>)>> {
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().is_none() {
        return Err(CliError::InvalidConfig(format!(
            "{} is empty",
            path.display()
        )));
    }
    Ok(lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let raw: Vec<String> = l.split(',').map(|s| s.trim().to_string()).collect();
            (
                raw.iter().map(|s| s.parse().unwrap_or(f64::NAN)).collect(),
                raw,
            )
        })
        .collect())
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 1.0, hi + 1.0)
            }
        };
        Self {
            x: pad(x),
            y: pad(y),
        }
    }

    fn sx(&self, v: f64) -> f64 {
        LEFT + (v - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn sy(&self, v: f64) -> f64 {
        H - BOTTOM - (v - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (f.sx(f.x.0), f.sx(f.x.1), f.sy(f.y.0), f.sy(f.y.1));
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.1}" y="{y1:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for t in ticks(f.x.0, f.x.1) {
        let x = f.sx(t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#,
            y0 + 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            label(t)
        );
    }
    for t in ticks(f.y.0, f.y.1) {
        let y = f.sy(t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = writeln!(
            out,
            r##"<line x1="{x0:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="#dddddd"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            y + 4.0,
            label(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 14.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn polyline(out: &mut String, f: &Frame, pts: &[(f64, f64)], colour: &str) {
    if pts.is_empty() {
        return;
    }
    let coords: Vec<String> = pts
        .iter()
        .map(|&(x, y)| format!("{:.1},{:.1}", f.sx(x), f.sy(y)))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.6"/>"#,
        coords.join(" ")
    );
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    for (i, (name, colour)) in entries.iter().enumerate() {
        let y = TOP + 16.0 + 16.0 * i as f64;
        let x = W - RIGHT - 150.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{colour}" stroke-width="2"/>"#,
            x + 20.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            x + 26.0,
            y + 4.0,
            escape(name)
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn km_steps(rows: &[(Vec<f64>, Vec<String>)]) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    let mut prev = 1.0;
    for (v, _) in rows {
        let (t, s) = (v[0], v[1]);
        pts.push((t, prev));
        pts.push((t, s));
        prev = s;
    }
    pts
}

fn panel_a(dir: &Path, labels: (&str, &str)) -> Result<String> {
    let control = km_steps(&read_table(&dir.join(KM_CONTROL))?);
    let test = km_steps(&read_table(&dir.join(KM_TEST))?);
    let xmax = control.iter().chain(&test).map(|p| p.0).fold(0.0, f64::max);
    let f = Frame::new((0.0, xmax), (0.0, 1.0));
    let mut out = String::new();
    header(&mut out, "A. Kaplan-Meier survival");
    axes(&mut out, &f, "Time (months)", "Survival probability");
    polyline(&mut out, &f, &control, CONTROL_COLOUR);
    polyline(&mut out, &f, &test, TEST_COLOUR);
    legend(
        &mut out,
        &[(labels.0, CONTROL_COLOUR), (labels.1, TEST_COLOUR)],
    );
    out.push_str("</svg>\n");
    Ok(out)
}

fn panel_b(dir: &Path) -> Result<String> {
    let rows = read_table(&dir.join(GAIN_CURVE))?;
    let side = |name: &str| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|(_, raw)| raw.get(2).map(String::as_str) == Some(name))
            .map(|(v, _)| (v[0], v[1]))
            .collect()
    };
    let (loss, gain) = (side("loss"), side("gain"));
    let xs = rows.iter().map(|(v, _)| v[0]);
    let (xmin, xmax) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    let f = Frame::new((xmin, xmax), (0.0, 1.0));
    let mut out = String::new();
    header(&mut out, "B. Cumulative survival gain / loss");
    axes(
        &mut out,
        &f,
        "d (months)",
        "pr(Y-X<d) for d<0, pr(Y-X>d) for d>=0",
    );
    let zero = f.sx(0.0);
    let _ = writeln!(
        out,
        r##"<line x1="{zero:.1}" y1="{:.1}" x2="{zero:.1}" y2="{:.1}" stroke="#888888" stroke-dasharray="4 3"/>"##,
        f.sy(0.0),
        f.sy(1.0)
    );
    polyline(&mut out, &f, &loss, CONTROL_COLOUR);
    polyline(&mut out, &f, &gain, TEST_COLOUR);
    legend(&mut out, &[("loss", CONTROL_COLOUR), ("gain", TEST_COLOUR)]);
    out.push_str("</svg>\n");
    Ok(out)
}

fn panel_c(dir: &Path) -> Result<String> {
    let rows = read_table(&dir.join(CONDITIONAL))?;
    let xmax = rows.iter().map(|(v, _)| v[0]).fold(0.0, f64::max);
    let lo = rows.iter().map(|(v, _)| v[2]).fold(0.0, f64::min);
    let hi = rows.iter().map(|(v, _)| v[3]).fold(0.0, f64::max);
    let f = Frame::new((0.0, xmax + 1.0), (lo, hi));
    let mut out = String::new();
    header(&mut out, "C. Survival gain given control survival time");
    axes(
        &mut out,
        &f,
        "Control survival time c (months)",
        "Gain Y-X given X=c (months)",
    );
    let _ = writeln!(
        out,
        r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#888888" stroke-dasharray="4 3"/>"##,
        f.sx(f.x.0),
        f.sx(f.x.1),
        y = f.sy(0.0)
    );
    for (v, _) in &rows {
        let x = f.sx(v[0]);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="{TEST_COLOUR}" stroke-width="1.4"/>"#,
            f.sy(v[2]),
            f.sy(v[3])
        );
        let _ = writeln!(
            out,
            r#"<circle cx="{x:.1}" cy="{:.1}" r="3" fill="{TEST_COLOUR}"/>"#,
            f.sy(v[1])
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Writes the three panel SVGs into `dir`; returns their paths.
pub fn render_panels(dir: &Path) -> Result<Vec<PathBuf>> {
    let labels = read_to_string(&dir.join(SUMMARY))
        .ok()
        .and_then(|t| serde_json::from_str::<SummaryFile>(&t).ok())
        .map(|s| (s.control_label, s.test_label))
        .unwrap_or_else(|| ("control".into(), "test".into()));
    let panels = [
        (PANEL_A, panel_a(dir, (&labels.0, &labels.1))?),
        (PANEL_B, panel_b(dir)?),
        (PANEL_C, panel_c(dir)?),
    ];
    let mut paths = Vec::new();
    for (name, svg) in panels {
        let p = dir.join(name);
        write_file(&p, &svg)?;
        paths.push(p);
    }
    Ok(paths)
}

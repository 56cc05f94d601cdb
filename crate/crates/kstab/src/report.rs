//! Artifact writers: `report.json`, CSV traces and SVG convergence plots.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use kstab_core::functionals::write_trace_csv;
use kstab_core::slope::Verdict;
use serde::Serialize;

use crate::run::{ScenarioResult, TaskResult};
use crate::{CliError, SCHEMA_VERSION};

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    timestamp: u64,
    generator: &'static str,
    #[serde(flatten)]
    result: &'a ScenarioResult,
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(CliError::io(path))
}

/// Point traces for slope tasks without functional samples.
fn verdict_csv(verdicts: &[Verdict]) -> String {
    let mut s = String::from("tau");
    for v in verdicts {
        let _ = write!(s, ",{}", v.theorem);
    }
    s.push('\n');
    for (i, row) in verdicts[0].trace.iter().enumerate() {
        let _ = write!(s, "{}", row.0);
        for v in verdicts {
            let _ = write!(s, ",{:.12e}", v.trace[i].1);
        }
        s.push('\n');
    }
    s
}

/// Writes every artifact into `dir`.
///
/// Each slope task yields one CSV and one SVG per verdict.
pub fn emit_outputs(res: &ScenarioResult, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir.join("traces")).map_err(CliError::io(dir))?;
    for (i, t) in res.tasks.iter().enumerate() {
        let TaskResult::Slopes { verdicts, samples, gamma, .. } = t else {
            continue;
        };
        let csv = dir.join("traces").join(format!("task{i}_slopes.csv"));
        if samples.is_empty() {
            write_file(&csv, verdict_csv(verdicts).as_bytes())?;
        } else {
            let mut buf = Vec::new();
            write_trace_csv(samples, *gamma, &mut buf).map_err(CliError::io(&csv))?;
            write_file(&csv, &buf)?;
        }
        fs::create_dir_all(dir.join("plots")).map_err(CliError::io(dir))?;
        for v in verdicts {
            let svg = dir.join("plots").join(format!("task{i}_{}.svg", slug(&v.theorem)));
            let mut f = fs::File::create(&svg).map_err(CliError::io(&svg))?;
            write_svg_plot(v, &mut f).map_err(CliError::io(&svg))?;
        }
    }
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let report = Report {
        schema_version: SCHEMA_VERSION,
        timestamp,
        generator: concat!("kstab ", env!("CARGO_PKG_VERSION")),
        result: res,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write_file(&dir.join("report.json"), json.as_bytes())
}

/// Line plot of the difference quotients of `F` against τ, with the exact
/// value drawn as a dashed horizontal rule.
pub fn write_svg_plot(v: &Verdict, w: &mut impl Write) -> std::io::Result<()> {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 56.0;
    let pts = v.derivative_trace();
    let (mut lo, mut hi) = (v.exact_value, v.exact_value);
    for p in &pts {
        if p.1.is_finite() {
            lo = lo.min(p.1);
            hi = hi.max(p.1);
        }
    }
    let span = (hi - lo).max(1e-3 * (1.0 + v.exact_value.abs()));
    let (lo, hi) = (lo - 0.1 * span, hi + 0.1 * span);
    let t_max = pts.last().map(|p| p.0).unwrap_or(1.0).max(1e-9);
    let sx = |t: f64| PAD + t / t_max * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - lo) / (hi - lo) * (H - 2.0 * PAD);
    let poly: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
    let ye = sy(v.exact_value);
    writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#)?;
    writeln!(w, r#"<rect width="{W}" height="{H}" fill="white"/>"#)?;
    writeln!(
        w,
        r#"<path d="M{PAD},{PAD} V{b} H{r}" fill="none" stroke="black" stroke-width="1"/>"#,
        b = H - PAD,
        r = W - PAD
    )?;
    writeln!(
        w,
        r##"<line x1="{PAD}" y1="{ye:.2}" x2="{x2}" y2="{ye:.2}" stroke="#c0392b" stroke-dasharray="6 4"/>"##,
        x2 = W - PAD
    )?;
    writeln!(w, r##"<polyline points="{}" fill="none" stroke="#2c3e50" stroke-width="2"/>"##, poly.join(" "))?;
    for p in &pts {
        writeln!(w, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#2c3e50"/>"##, sx(p.0), sy(p.1))?;
    }
    writeln!(
        w,
        r#"<text x="{PAD}" y="24" font-family="sans-serif" font-size="14">{} d/dtau F, exact {} ({})</text>"#,
        v.theorem,
        v.exact,
        if v.pass { "pass" } else { "fail" }
    )?;
    writeln!(w, r#"<text x="{PAD}" y="{}" font-family="sans-serif" font-size="11">{:.4e}</text>"#, H - PAD + 16.0, lo)?;
    writeln!(
        w,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">tau = {t_max}</text>"#,
        W - PAD - 60.0,
        H - PAD + 16.0
    )?;
    writeln!(w, r#"<text x="4" y="{PAD}" font-family="sans-serif" font-size="11">{hi:.4e}</text>"#)?;
    writeln!(w, "</svg>")
}

//! Experiment artifacts: CSV schemas, minimal SVG plots, and the hash
//! manifest that makes reruns verifiable.
//!
//! Every experiment writes its outputs through [`write_artifact`], which
//! records a sha256 per file. Numeric CSV fields are printed with fixed
//! formatting, so identical runs produce byte-identical artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{IsacError, Result};

/// One row of a communication / sensing / security tradeoff curve.
#[derive(Debug, Clone)]
pub struct TradeoffPoint {
    pub rho: f64,
    pub comm_metric: f64,
    pub sensing_metric: f64,
    pub security_metric: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// CSV with header `rho,comm_metric,sensing_metric,security_metric,iterations,converged`.
///
/// The security column is empty for two-way tradeoffs.
pub fn tradeoff_to_csv(points: &[TradeoffPoint]) -> String {
    let mut out = String::from("rho,comm_metric,sensing_metric,security_metric,iterations,converged\n");
    for p in points {
        let security = p
            .security_metric
            .map(|s| format!("{s:.12e}"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{:.6},{:.12e},{:.12e},{},{},{}",
            p.rho, p.comm_metric, p.sensing_metric, security, p.iterations, p.converged
        );
    }
    out
}

/// Hash record for one written artifact.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub rows: usize,
}

/// Embedded acceptance probe: a named check the experiment ran on its own
/// artifacts, with a human-readable account of the comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Probe {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Probe {
    /// Probe asserting `|value - expected| <= tolerance`.
    pub fn close(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Probe {
        let err = (value - expected).abs();
        Probe {
            name: name.into(),
            pass: err <= tolerance,
            detail: format!("value={value:.6e} expected={expected:.6e} (|err|={err:.3e}, tol={tolerance:.3e})"),
        }
    }

    /// Probe asserting `value <= bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Probe {
        Probe {
            name: name.into(),
            pass: value <= bound,
            detail: format!("value={value:.6e} <= bound={bound:.6e}"),
        }
    }

    /// Probe asserting `value >= bound`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Probe {
        Probe {
            name: name.into(),
            pass: value >= bound,
            detail: format!("value={value:.6e} >= bound={bound:.6e}"),
        }
    }

    /// Probe asserting a stated condition.
    pub fn holds(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Probe {
        Probe {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

/// Manifest of one experiment run: artifact hashes plus embedded probes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub files: Vec<ManifestEntry>,
    pub probes: Vec<Probe>,
}

impl Manifest {
    pub fn new(experiment: impl Into<String>) -> Manifest {
        Manifest {
            experiment: experiment.into(),
            files: Vec::new(),
            probes: Vec::new(),
        }
    }

    pub fn all_probes_pass(&self) -> bool {
        self.probes.iter().all(|p| p.pass)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Hex sha256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Write `contents` under `dir/name` and return its manifest entry.
///
/// Row counts exclude the header line for `.csv` files and count lines
/// otherwise.
pub fn write_artifact(dir: impl AsRef<Path>, name: &str, contents: &str) -> Result<ManifestEntry> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let path: PathBuf = dir.join(name);
    std::fs::write(&path, contents)?;
    let lines = contents.lines().count();
    let rows = if name.ends_with(".csv") {
        lines.saturating_sub(1)
    } else {
        lines
    };
    Ok(ManifestEntry {
        file: name.to_string(),
        sha256: sha256_hex(contents.as_bytes()),
        rows,
    })
}

/// Minimal SVG line/scatter plot, enough for the figure-style artifacts.
pub struct SvgPlot {
    title: String,
    x_label: String,
    y_label: String,
    series: Vec<Series>,
}

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
    scatter: bool,
}

const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

impl SvgPlot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> SvgPlot {
        SvgPlot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
        }
    }

    pub fn add_line(&mut self, name: impl Into<String>, points: Vec<(f64, f64)>) -> &mut Self {
        self.series.push(Series {
            name: name.into(),
            points,
            scatter: false,
        });
        self
    }

    pub fn add_scatter(&mut self, name: impl Into<String>, points: Vec<(f64, f64)>) -> &mut Self {
        self.series.push(Series {
            name: name.into(),
            points,
            scatter: true,
        });
        self
    }

    /// Render to an SVG document string.
    pub fn render(&self) -> Result<String> {
        let (w, h) = (720.0, 480.0);
        let (left, right, top, bottom) = (70.0, 20.0, 40.0, 55.0);
        let all: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().copied())
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        if all.is_empty() {
            return Err(IsacError::domain("plot has no finite points"));
        }
        let (mut x0, mut x1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, p| {
            (acc.0.min(p.0), acc.1.max(p.0))
        });
        let (mut y0, mut y1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, p| {
            (acc.0.min(p.1), acc.1.max(p.1))
        });
        if x1 - x0 < 1e-12 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad_y = 0.05 * (y1 - y0);
        y0 -= pad_y;
        y1 += pad_y;

        let sx = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
        let sy = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
            w / 2.0,
            xml_escape(&self.title)
        );

        // Axes with 5 ticks per side.
        let _ = writeln!(
            svg,
            r##"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            w - left - right,
            h - top - bottom
        );
        for i in 0..=5 {
            let fx = x0 + (x1 - x0) * i as f64 / 5.0;
            let fy = y0 + (y1 - y0) * i as f64 / 5.0;
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
                sx(fx),
                h - bottom + 16.0,
                tick_label(fx)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
                left - 6.0,
                sy(fy) + 4.0,
                tick_label(fy)
            );
            let _ = writeln!(
                svg,
                r##"<line x1="{:.1}" y1="{top}" x2="{:.1}" y2="{:.1}" stroke="#ddd"/>"##,
                sx(fx),
                sx(fx),
                h - bottom
            );
            let _ = writeln!(
                svg,
                r##"<line x1="{left}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#ddd"/>"##,
                sy(fy),
                w - right,
                sy(fy)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
            w / 2.0,
            h - 14.0,
            xml_escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            xml_escape(&self.y_label)
        );

        for (si, series) in self.series.iter().enumerate() {
            let color = PALETTE[si % PALETTE.len()];
            if series.scatter {
                for &(x, y) in &series.points {
                    if x.is_finite() && y.is_finite() {
                        let _ = writeln!(
                            svg,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}" fill-opacity="0.7"/>"#,
                            sx(x),
                            sy(y)
                        );
                    }
                }
            } else {
                let path: Vec<String> = series
                    .points
                    .iter()
                    .filter(|(x, y)| x.is_finite() && y.is_finite())
                    .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
                    path.join(" ")
                );
            }
            // Legend swatch.
            let ly = top + 16.0 + 16.0 * si as f64;
            let _ = writeln!(
                svg,
                r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/>"#,
                left + 8.0,
                ly - 9.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11">{}</text>"#,
                left + 22.0,
                ly,
                xml_escape(&series.name)
            );
        }
        let _ = writeln!(svg, "</svg>");
        Ok(svg)
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        format!("{v:.3}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn test_write_artifact_counts_csv_rows() {
        let dir = std::env::temp_dir().join("isac-io-test");
        let entry = write_artifact(&dir, "t.csv", "a,b\n1,2\n3,4\n").unwrap();
        assert_eq!(entry.rows, 2);
        assert_eq!(entry.file, "t.csv");
        let again = write_artifact(&dir, "t.csv", "a,b\n1,2\n3,4\n").unwrap();
        assert_eq!(entry.sha256, again.sha256);
    }

    #[test]
    fn test_tradeoff_csv_header_and_empty_security() {
        let pts = vec![TradeoffPoint {
            rho: 0.5,
            comm_metric: 1.0,
            sensing_metric: 2.0,
            security_metric: None,
            iterations: 10,
            converged: true,
        }];
        let csv = tradeoff_to_csv(&pts);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "rho,comm_metric,sensing_metric,security_metric,iterations,converged"
        );
        let row = lines.next().unwrap();
        assert!(row.contains(",,"), "security column should be empty: {row}");
    }

    #[test]
    fn test_manifest_round_trip() {
        let mut m = Manifest::new("demo");
        m.files.push(ManifestEntry {
            file: "x.csv".into(),
            sha256: "00".into(),
            rows: 3,
        });
        m.probes.push(Probe::close("peak", 1.0, 1.0, 0.1));
        let dir = std::env::temp_dir().join("isac-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("manifest.json");
        m.save(&path).unwrap();
        let back = Manifest::load(&path).unwrap();
        assert_eq!(back.experiment, "demo");
        assert_eq!(back.files, m.files);
        assert!(back.all_probes_pass());
    }

    #[test]
    fn test_svg_renders_document() {
        let mut plot = SvgPlot::new("test", "x", "y");
        plot.add_line("series", vec![(0.0, 0.0), (1.0, 1.0)]);
        plot.add_scatter("dots", vec![(0.5, 0.25)]);
        let svg = plot.render().unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("circle"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}

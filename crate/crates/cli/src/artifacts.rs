//! Artifact emission: CSV tables with shortest round-trip numerals, minimal
//! SVG line plots, and a manifest tying every written file to its content
//! hash. Identical configs produce byte-identical artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Shortest decimal that round-trips to the same f64 (Rust's default float
/// formatting guarantees this).
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        write!(out, "{b:02x}").unwrap();
    }
    out
}

pub struct CsvTable {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "ragged CSV row");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    sha256: String,
}

/// Accumulates artifacts for one run and writes the manifest last.
pub struct ArtifactSink {
    dir: PathBuf,
    config_hash: String,
    seed: u64,
    entries: Vec<ManifestEntry>,
}

#[derive(Serialize)]
struct ManifestBody<'a> {
    config_sha256: &'a str,
    seed: u64,
    artifacts: &'a [ManifestEntry],
}

impl ArtifactSink {
    pub fn new(dir: &Path, config_hash: String, seed: u64) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create output dir: {e}")))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config_hash,
            seed,
            entries: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, content)
            .map_err(|e| CliError::Config(format!("cannot write {name}: {e}")))?;
        self.entries.push(ManifestEntry {
            file: name.to_string(),
            sha256: sha256_hex(content.as_bytes()),
        });
        Ok(())
    }

    pub fn finish(self) -> Result<(), CliError> {
        let body = ManifestBody {
            config_sha256: &self.config_hash,
            seed: self.seed,
            artifacts: &self.entries,
        };
        let text = serde_json::to_string_pretty(&body)
            .expect("manifest serialization cannot fail")
            + "\n";
        fs::write(self.dir.join("manifest.json"), text)
            .map_err(|e| CliError::Config(format!("cannot write manifest: {e}")))
    }
}

/// Minimal line plot: one polyline over labelled axes, no dependencies.
pub fn svg_line_plot(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let finite: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (x_min, x_max) = span(finite.iter().map(|p| p.0));
    let (y_min, y_max) = span(finite.iter().map(|p| p.1));
    let sx = |x: f64| left + (x - x_min) / (x_max - x_min) * (w - left - right);
    let sy = |y: f64| h - bottom - (y - y_min) / (y_max - y_min) * (h - top - bottom);

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    svg.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="22" font-family="monospace" font-size="14" text-anchor="middle">{title}</text>"#,
        w / 2.0
    );
    // axes
    let _ = write!(
        svg,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.1}" stroke="black"/>"#,
        h - bottom
    );
    let _ = write!(
        svg,
        r#"<line x1="{left}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        h - bottom,
        w - right,
        h - bottom
    );
    // ticks
    for k in 0..=4 {
        let fx = x_min + (x_max - x_min) * k as f64 / 4.0;
        let fy = y_min + (y_max - y_min) * k as f64 / 4.0;
        let _ = write!(
            svg,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="middle">{:.3}</text>"#,
            sx(fx),
            h - bottom,
            sx(fx),
            h - bottom + 5.0,
            sx(fx),
            h - bottom + 18.0,
            fx
        );
        let _ = write!(
            svg,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="end">{:.3}</text>"#,
            left - 5.0,
            sy(fy),
            left,
            sy(fy),
            left - 8.0,
            sy(fy) + 4.0,
            fy
        );
    }
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="12" text-anchor="middle">{x_label}</text>"#,
        (left + w - right) / 2.0,
        h - 12.0
    );
    let _ = write!(
        svg,
        r#"<text x="16" y="{:.1}" font-family="monospace" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{y_label}</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0
    );
    if !finite.is_empty() {
        let coords: Vec<String> = finite
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = write!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.1, 1.0 / 3.0, 0.3819660112501051, 1e-300, -2.5e17] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn csv_render_is_stable() {
        let mut t = CsvTable::new(vec!["a", "b"]);
        t.push(vec!["1".into(), "2".into()]);
        assert_eq!(t.render(), "a,b\n1,2\n");
    }

    #[test]
    fn svg_contains_polyline_and_labels() {
        let svg = svg_line_plot("t vs err", "t", "log10 err", &[(1.0, -2.0), (2.0, -3.0)]);
        assert!(svg.contains("polyline"));
        assert!(svg.contains("log10 err"));
        assert!(svg.starts_with("<svg"));
    }
}

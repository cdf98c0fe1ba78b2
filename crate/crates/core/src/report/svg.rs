//! Minimal SVG line plots with optional shaded bands.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub band: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Draw a dashed horizontal line at y = 0 when it is in range.
    pub zero_line: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Roughly `n` round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

impl LinePlot {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
        let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.series {
            for &x in &s.x {
                xs = (xs.0.min(x), xs.1.max(x));
            }
            let band = s.band.iter().flat_map(|(lo, hi)| lo.iter().chain(hi));
            for &y in s.y.iter().chain(band) {
                ys = (ys.0.min(y), ys.1.max(y));
            }
        }
        if !xs.0.is_finite() {
            xs = (0.0, 1.0);
        }
        if !ys.0.is_finite() {
            ys = (0.0, 1.0);
        }
        if xs.1 - xs.0 < 1e-12 {
            xs = (xs.0 - 0.5, xs.1 + 0.5);
        }
        if ys.1 - ys.0 < 1e-12 {
            ys = (ys.0 - 0.5, ys.1 + 0.5);
        }
        let pad = 0.05 * (ys.1 - ys.0);
        (xs.0, xs.1, ys.0 - pad, ys.1 + pad)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let pw = WIDTH - MARGIN_L - MARGIN_R;
        let ph = HEIGHT - MARGIN_T - MARGIN_B;
        let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            MARGIN_L + pw / 2.0,
            escape(&self.title)
        );
        for t in ticks(x0, x1, 6) {
            let _ = writeln!(
                out,
                r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#eee"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle">{4}</text>"##,
                sx(t),
                MARGIN_T,
                MARGIN_T + ph,
                MARGIN_T + ph + 16.0,
                fmt_tick(t)
            );
        }
        for t in ticks(y0, y1, 6) {
            let _ = writeln!(
                out,
                r##"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="#eee"/><text x="{3:.2}" y="{4:.2}" text-anchor="end">{5}</text>"##,
                MARGIN_L,
                sy(t),
                MARGIN_L + pw,
                MARGIN_L - 6.0,
                sy(t) + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        if self.zero_line && y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(
                out,
                r##"<line x1="{MARGIN_L}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#555" stroke-dasharray="4 3"/>"##,
                sy(0.0),
                MARGIN_L + pw
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            MARGIN_L + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
            MARGIN_T + ph / 2.0,
            escape(&self.y_label)
        );

        for (si, s) in self.series.iter().enumerate() {
            let color = PALETTE[si % PALETTE.len()];
            if let Some((lo, hi)) = &s.band {
                let mut pts: Vec<String> =
                    s.x.iter()
                        .zip(hi)
                        .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                        .collect();
                pts.extend(
                    s.x.iter()
                        .zip(lo)
                        .rev()
                        .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y))),
                );
                let _ = writeln!(
                    out,
                    r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
                    pts.join(" ")
                );
            }
            let pts: Vec<String> =
                s.x.iter()
                    .zip(&s.y)
                    .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                pts.join(" ")
            );
            let ly = MARGIN_T + 10.0 + 20.0 * si as f64;
            let lx = MARGIN_L + pw + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

//! Minimal static SVG plots: line charts and phase-space heatmaps.
//!
//! All coordinates are printed with fixed precision so identical data gives
//! identical bytes.

use std::fmt::Write;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 32.0;
const MARGIN_B: f64 = 48.0;

const PALETTE: [&str; 6] = ["#1f4e9c", "#c0392b", "#27ae60", "#8e44ad", "#d68910", "#17202a"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points }
    }
}

#[derive(Clone, Copy, Default)]
pub struct Axes {
    pub log_x: bool,
    /// Joins the last point back to the first.
    pub closed: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn open(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(out, "<rect width=\"{w:.0}\" height=\"{h:.0}\" fill=\"white\"/>");
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{}</text>", w / 2.0, escape(title));
}

/// Line chart of one or more series.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series], axes: Axes) -> String {
    let tx = |x: f64| if axes.log_x { x.log10() } else { x };
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| tx(p.0))));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (tx(x) - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_T + (y1 - y) / (y1 - y0) * ph;

    let mut out = String::new();
    open(&mut out, WIDTH, HEIGHT, title);
    let _ = writeln!(
        out,
        "<rect x=\"{MARGIN_L:.1}\" y=\"{MARGIN_T:.1}\" width=\"{pw:.1}\" height=\"{ph:.1}\" fill=\"none\" stroke=\"black\"/>"
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let px = MARGIN_L + f * pw;
        let py = MARGIN_T + (1.0 - f) * ph;
        let xl = if axes.log_x { format!("1e{xv:.1}") } else { tick_label(xv) };
        let _ = writeln!(out, "<line x1=\"{px:.1}\" y1=\"{:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"black\"/>", MARGIN_T + ph, MARGIN_T + ph + 4.0);
        let _ = writeln!(out, "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{xl}</text>", MARGIN_T + ph + 16.0);
        let _ = writeln!(out, "<line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{MARGIN_L:.1}\" y2=\"{py:.1}\" stroke=\"black\"/>", MARGIN_L - 4.0);
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", MARGIN_L - 6.0, py + 4.0, tick_label(yv));
    }
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", MARGIN_L + pw / 2.0, HEIGHT - 10.0, escape(x_label));
    let _ = writeln!(
        out,
        "<text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">{}</text>",
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite() && (!axes.log_x || p.0 > 0.0))
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if axes.closed && pts.len() > 1 {
            pts.push(pts[0].clone());
        }
        if pts.len() == 1 {
            let (x, y) = pts[0].split_once(',').expect("formatted pair");
            let _ = writeln!(out, "<circle cx=\"{x}\" cy=\"{y}\" r=\"3\" fill=\"{color}\"/>");
        } else if !pts.is_empty() {
            let _ = writeln!(out, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>", pts.join(" "));
        }
        let ly = MARGIN_T + 14.0 + 14.0 * i as f64;
        let lx = MARGIN_L + pw - 120.0;
        let _ = writeln!(out, "<line x1=\"{lx:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>", ly - 4.0, lx + 16.0, ly - 4.0);
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{ly:.1}\">{}</text>", lx + 20.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

/// One heatmap panel: `values[i][j]` at `(x_axis[i], y_axis[j])`.
pub struct Panel<'a> {
    pub title: String,
    pub x_axis: &'a [f64],
    pub y_axis: &'a [f64],
    pub values: &'a [Vec<f64>],
}

fn shade(v: f64, lo: f64, hi: f64) -> String {
    // white to dark blue, negative values in red
    if v < 0.0 && lo < 0.0 {
        let f = (v / lo).clamp(0.0, 1.0);
        let c = (255.0 * (1.0 - f)).round() as u8;
        return format!("#ff{c:02x}{c:02x}");
    }
    let f = if hi > 0.0 { (v / hi).clamp(0.0, 1.0) } else { 0.0 };
    let r = (255.0 * (1.0 - 0.9 * f)).round() as u8;
    let g = (255.0 * (1.0 - 0.75 * f)).round() as u8;
    let b = (255.0 * (1.0 - 0.4 * f)).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Side-by-side heatmaps sharing one colour scale.
pub fn heatmaps(title: &str, x_label: &str, y_label: &str, panels: &[Panel]) -> String {
    let size = 220.0;
    let gap = 56.0;
    let w = gap + panels.len().max(1) as f64 * (size + gap);
    let h = size + 96.0;
    let lo = panels.iter().flat_map(|p| p.values.iter().flatten()).copied().fold(0.0, f64::min);
    let hi = panels.iter().flat_map(|p| p.values.iter().flatten()).copied().fold(0.0, f64::max);
    let mut out = String::new();
    open(&mut out, w, h, title);
    for (k, p) in panels.iter().enumerate() {
        let ox = gap + k as f64 * (size + gap);
        let oy = 48.0;
        let nx = p.x_axis.len().max(1);
        let ny = p.y_axis.len().max(1);
        let cw = size / nx as f64;
        let ch = size / ny as f64;
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", ox + size / 2.0, oy - 8.0, escape(&p.title));
        for (i, row) in p.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                    ox + i as f64 * cw,
                    oy + (ny - 1 - j) as f64 * ch,
                    cw + 0.05,
                    ch + 0.05,
                    shade(v, lo, hi)
                );
            }
        }
        let _ = writeln!(out, "<rect x=\"{ox:.1}\" y=\"{oy:.1}\" width=\"{size:.1}\" height=\"{size:.1}\" fill=\"none\" stroke=\"black\"/>");
        if let (Some(a), Some(b)) = (p.x_axis.first(), p.x_axis.last()) {
            let _ = writeln!(out, "<text x=\"{ox:.1}\" y=\"{:.1}\" text-anchor=\"start\">{}</text>", oy + size + 14.0, tick_label(*a));
            let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", ox + size, oy + size + 14.0, tick_label(*b));
        }
        if let (Some(a), Some(b)) = (p.y_axis.first(), p.y_axis.last()) {
            let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", ox - 4.0, oy + size, tick_label(*a));
            let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", ox - 4.0, oy + 10.0, tick_label(*b));
        }
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", ox + size / 2.0, oy + size + 30.0, escape(x_label));
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 {:.1} {:.1})\">{}</text>",
            ox - 30.0,
            oy + size / 2.0,
            ox - 30.0,
            oy + size / 2.0,
            escape(y_label)
        );
    }
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">colour scale: white = 0, dark = {}</text>", w / 2.0, h - 8.0, tick_label(hi));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_is_well_formed_and_deterministic() {
        let s = vec![Series::new("a<b", vec![(0.0, 1.0), (1.0, 2.0), (2.0, 0.5)])];
        let a = line_plot("t", "x", "y", &s, Axes::default());
        let b = line_plot("t", "x", "y", &s, Axes::default());
        assert_eq!(a, b);
        assert!(a.starts_with("<svg "));
        assert!(a.trim_end().ends_with("</svg>"));
        assert!(a.contains("a&lt;b"));
        assert_eq!(a.matches("<polyline").count(), 1);
    }

    #[test]
    fn degenerate_data_does_not_produce_nan() {
        let s = vec![Series::new("flat", vec![(1.0, 3.0), (1.0, 3.0)])];
        let a = line_plot("t", "x", "y", &s, Axes { log_x: true, closed: true });
        assert!(!a.contains("NaN"));
        let grid = vec![vec![0.0; 3]; 3];
        let ax = [-1.0, 0.0, 1.0];
        let h = heatmaps("w", "q", "p", &[Panel { title: "t=0".into(), x_axis: &ax, y_axis: &ax, values: &grid }]);
        assert!(!h.contains("NaN"));
        assert_eq!(h.matches("<rect ").count(), 1 + 9 + 1);
    }
}

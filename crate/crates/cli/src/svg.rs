//! Minimal SVG line, scatter and heatmap plots.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Style {
    Line,
    Points,
    /// Points with symmetric error bars of the given half-widths.
    ErrorBars(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

/// Axis-aligned filled cell of a heatmap.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub color: &'static str,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Plot {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub series: Vec<Series>,
    pub cells: Vec<Cell>,
    /// Legend entries for cell colours.
    pub legend: Vec<(&'static str, String)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 1000.0).round() / 1000.0)
    }
}

impl Plot {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut b = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        let mut add = |x: f64, y: f64| {
            if x.is_finite() && y.is_finite() {
                b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
            }
        };
        for s in &self.series {
            for (i, &(x, y)) in s.points.iter().enumerate() {
                let e = match &s.style {
                    Style::ErrorBars(err) => err.get(i).copied().unwrap_or(0.0),
                    _ => 0.0,
                };
                add(x, y - e);
                add(x, y + e);
            }
        }
        for c in &self.cells {
            add(c.x0, c.y0);
            add(c.x1, c.y1);
        }
        if !b.0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| {
            if hi > lo {
                (hi - lo) * 0.04
            } else {
                lo.abs().max(1.0) * 0.5
            }
        };
        let (px, py) = (pad(b.0, b.1), pad(b.2, b.3));
        if self.cells.is_empty() {
            (b.0 - px, b.1 + px, b.2 - py, b.3 + py)
        } else {
            (b.0, b.1, b.2, b.3)
        }
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
        let sy = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);
        let mut o = String::new();
        let _ = writeln!(o, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">");
        let _ = writeln!(o, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
        for c in &self.cells {
            let (a, b) = (sx(c.x0), sx(c.x1));
            let (t, u) = (sy(c.y1), sy(c.y0));
            let _ = writeln!(
                o,
                "<rect x=\"{a:.2}\" y=\"{t:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                b - a,
                u - t,
                c.color
            );
        }
        let _ = writeln!(
            o,
            "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
            W - LEFT - RIGHT,
            H - TOP - BOTTOM
        );
        for i in 0..=5 {
            let fx = x0 + (x1 - x0) * i as f64 / 5.0;
            let fy = y0 + (y1 - y0) * i as f64 / 5.0;
            let _ = writeln!(
                o,
                "<line x1=\"{0:.2}\" y1=\"{1}\" x2=\"{0:.2}\" y2=\"{2}\" stroke=\"black\"/>",
                sx(fx),
                H - BOTTOM,
                H - BOTTOM + 5.0
            );
            let _ = writeln!(
                o,
                "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
                sx(fx),
                H - BOTTOM + 18.0,
                tick_label(fx)
            );
            let _ = writeln!(
                o,
                "<line x1=\"{0}\" y1=\"{1:.2}\" x2=\"{2}\" y2=\"{1:.2}\" stroke=\"black\"/>",
                LEFT - 5.0,
                sy(fy),
                LEFT
            );
            let _ = writeln!(
                o,
                "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
                LEFT - 8.0,
                sy(fy) + 4.0,
                tick_label(fy)
            );
        }
        let _ = writeln!(
            o,
            "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
            W / 2.0,
            esc(&self.title)
        );
        let _ = writeln!(
            o,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            (LEFT + W - RIGHT) / 2.0,
            H - 12.0,
            esc(&self.xlabel)
        );
        let _ = writeln!(
            o,
            "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>",
            (TOP + H - BOTTOM) / 2.0,
            esc(&self.ylabel)
        );
        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .copied()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .collect();
            match &s.style {
                Style::Line => {
                    let d: Vec<String> = pts
                        .iter()
                        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                        .collect();
                    let _ = writeln!(o, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>", d.join(" "));
                }
                Style::Points => {
                    for &(x, y) in &pts {
                        let _ = writeln!(
                            o,
                            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                            sx(x),
                            sy(y)
                        );
                    }
                }
                Style::ErrorBars(err) => {
                    for (i, &(x, y)) in s.points.iter().enumerate() {
                        if !(x.is_finite() && y.is_finite()) {
                            continue;
                        }
                        let e = err.get(i).copied().unwrap_or(0.0);
                        let _ = writeln!(
                            o,
                            "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"{color}\"/>",
                            sx(x),
                            sy(y - e),
                            sy(y + e)
                        );
                        let _ = writeln!(
                            o,
                            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                            sx(x),
                            sy(y)
                        );
                    }
                }
            }
            let ly = TOP + 16.0 + 16.0 * k as f64;
            let _ = writeln!(
                o,
                "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\"/>",
                W - RIGHT - 150.0,
                ly - 9.0
            );
            let _ = writeln!(
                o,
                "<text x=\"{}\" y=\"{ly}\">{}</text>",
                W - RIGHT - 135.0,
                esc(&s.label)
            );
        }
        for (k, (color, label)) in self.legend.iter().enumerate() {
            let ly = TOP + 16.0 + 16.0 * (self.series.len() + k) as f64;
            let _ = writeln!(o, "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\" stroke=\"black\"/>", W - RIGHT - 150.0, ly - 9.0);
            let _ = writeln!(
                o,
                "<text x=\"{}\" y=\"{ly}\">{}</text>",
                W - RIGHT - 135.0,
                esc(label)
            );
        }
        o.push_str("</svg>\n");
        o
    }
}

//! Minimal line-and-band SVG charts.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

pub struct Series {
    pub name: String,
    /// `(x, (y, lower, upper))`
    pub points: Vec<(f64, (f64, f64, f64))>,
}

impl Series {
    pub fn new(name: impl Into<String>) -> Self {
        Series { name: name.into(), points: Vec::new() }
    }

    pub fn push(&mut self, x: f64, y: (f64, f64, f64)) {
        self.points.push((x, y));
    }
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Chart { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), log_y: false, series: Vec::new() }
    }

    fn y(&self, v: f64) -> Option<f64> {
        let v = if self.log_y { v.log10() } else { v };
        v.is_finite().then_some(v)
    }

    pub fn render(&self) -> String {
        let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
        let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.series {
            for &(x, (m, lo, hi)) in &s.points {
                for v in [m, lo, hi].into_iter().filter_map(|v| self.y(v)) {
                    ys = (ys.0.min(v), ys.1.max(v));
                }
                if x.is_finite() {
                    xs = (xs.0.min(x), xs.1.max(x));
                }
            }
        }
        if !(xs.0 < xs.1) {
            xs = if xs.0.is_finite() { (xs.0 - 1.0, xs.0 + 1.0) } else { (0.0, 1.0) };
        }
        if !(ys.0 < ys.1) {
            ys = if ys.0.is_finite() { (ys.0 - 1.0, ys.0 + 1.0) } else { (0.0, 1.0) };
        }
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let px = |x: f64| LEFT + (x - xs.0) / (xs.1 - xs.0) * plot_w;
        let py = |y: f64| TOP + plot_h - (y - ys.0) / (ys.1 - ys.0) * plot_h;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(&self.title));
        let _ = writeln!(
            out,
            r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (x, y) = (xs.0 + f * (xs.1 - xs.0), ys.0 + f * (ys.1 - ys.0));
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#, px(x), TOP + plot_h + 18.0, x);
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3e}</text>"#, LEFT - 6.0, py(y) + 4.0, y);
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + plot_w / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
            TOP + plot_h / 2.0,
            TOP + plot_h / 2.0,
            escape(&self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<(f64, f64, f64, f64)> = s
                .points
                .iter()
                .filter_map(|&(x, (m, lo, hi))| Some((px(x), py(self.y(m)?), py(self.y(lo)?), py(self.y(hi)?))))
                .collect();
            if pts.is_empty() {
                continue;
            }
            if pts.iter().any(|p| (p.2 - p.3).abs() > 1e-9) {
                let mut d = String::new();
                for (j, p) in pts.iter().enumerate() {
                    let _ = write!(d, "{}{:.2},{:.2} ", if j == 0 { "M" } else { "L" }, p.0, p.3);
                }
                for p in pts.iter().rev() {
                    let _ = write!(d, "L{:.2},{:.2} ", p.0, p.2);
                }
                let _ = writeln!(out, r#"<path d="{}Z" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, d);
            }
            let line: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", p.0, p.1)).collect();
            let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" "));
            let ly = TOP + 10.0 + 16.0 * i as f64;
            let lx = WIDTH - RIGHT + 12.0;
            let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 18.0);
            let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 24.0, ly + 4.0, escape(&s.name));
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series_and_band() {
        let mut c = Chart::new("t", "x", "y");
        let mut s = Series::new("a<b");
        s.push(0.0, (1.0, 0.5, 1.5));
        s.push(1.0, (2.0, 1.5, 2.5));
        c.series.push(s);
        let svg = c.render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("<polyline") && svg.contains("fill-opacity"));
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn empty_chart_is_valid() {
        let svg = Chart::new("t", "x", "y").render();
        assert!(svg.contains("</svg>") && !svg.contains("NaN"));
    }
}

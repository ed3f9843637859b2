//! Minimal static SVG plots: axes, polylines, shaded cells and tick marks.

use std::fmt::Write as _;

use phasesync::numfmt::sig;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 45.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Rect {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub fill: &'static str,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub rects: Vec<Rect>,
    /// Vertical tick marks `(x, row)` drawn as a raster; rows are 1-based from the bottom.
    pub marks: Vec<(f64, usize)>,
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            rects: Vec::new(),
            marks: Vec::new(),
            x_range: None,
            y_range: None,
        }
    }

    fn ranges(&self) -> ((f64, f64), (f64, f64)) {
        let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
        let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
        let mut add = |x: f64, y: f64| {
            xs = (xs.0.min(x), xs.1.max(x));
            ys = (ys.0.min(y), ys.1.max(y));
        };
        self.series.iter().flat_map(|s| &s.points).for_each(|&(x, y)| add(x, y));
        self.marks.iter().for_each(|&(x, r)| add(x, r as f64));
        let pad = |(a, b): (f64, f64)| {
            if !a.is_finite() {
                (0.0, 1.0)
            } else if b - a < 1e-12 {
                (a - 0.5, b + 0.5)
            } else {
                (a, b)
            }
        };
        let x = self.x_range.unwrap_or_else(|| pad(xs));
        let y = self.y_range.unwrap_or_else(|| {
            let (a, b) = pad(ys);
            let m = 0.05 * (b - a);
            (a - m, b + m)
        });
        (x, y)
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.ranges();
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;
        let mut out = String::new();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
        for r in &self.rects {
            let (a, b) = (sx(r.x.0), sx(r.x.1));
            let (c, d) = (sy(r.y.1), sy(r.y.0));
            writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}" stroke="none"/>"#,
                a,
                c,
                (b - a).max(0.0),
                (d - c).max(0.0),
                r.fill
            )
            .unwrap();
        }
        writeln!(
            out,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        )
        .unwrap();
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let (px, py) = (sx(fx), sy(fy));
            writeln!(out, r#"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0).unwrap();
            writeln!(out, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, sig(fx, 3)).unwrap();
            writeln!(out, r#"<line x1="{}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/>"#, LEFT - 5.0).unwrap();
            writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, py + 4.0, sig(fy, 3)).unwrap();
        }
        writeln!(out, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&self.title)).unwrap();
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 8.0, escape(&self.x_label)).unwrap();
        writeln!(
            out,
            r#"<text x="14" y="{0:.2}" text-anchor="middle" transform="rotate(-90 14 {0:.2})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        )
        .unwrap();
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" ")).unwrap();
            let ly = TOP + 14.0 + 14.0 * i as f64;
            writeln!(
                out,
                r#"<text x="{:.2}" y="{ly:.2}" fill="{color}" text-anchor="end">{}</text>"#,
                LEFT + pw - 6.0,
                escape(&s.label)
            )
            .unwrap();
        }
        for &(x, row) in &self.marks {
            let (px, py) = (sx(x), sy(row as f64));
            writeln!(out, r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black" stroke-width="1.5"/>"#, py - 8.0, py + 8.0).unwrap();
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_document() {
        let mut p = Plot::new("a < b", "t", "u");
        p.series.push(Series {
            label: "u".into(),
            points: vec![(0.0, 0.0), (1.0, 1.0)],
        });
        p.rects.push(Rect {
            x: (0.0, 0.5),
            y: (0.0, 0.5),
            fill: "#eee",
        });
        p.marks.push((0.5, 1));
        let s = p.render();
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a &lt; b"));
        assert_eq!(s.matches("<polyline").count(), 1);
    }

    #[test]
    fn degenerate_ranges_do_not_divide_by_zero() {
        let mut p = Plot::new("flat", "t", "u");
        p.series.push(Series {
            label: "c".into(),
            points: vec![(0.0, 1.0), (1.0, 1.0)],
        });
        assert!(!p.render().contains("NaN"));
        assert!(!Plot::new("empty", "", "").render().contains("NaN"));
    }
}

//! Minimal SVG line plots: one series, optional error bars and log-scaled x.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    /// Half-length of the error bar, zero for none.
    pub err: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y, err: 0.0 }
    }

    pub fn with_err(x: f64, y: f64, err: f64) -> Self {
        Point { x, y, err }
    }
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub points: Vec<Point>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo > 1e-12 {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

impl Plot {
    pub fn to_svg(&self) -> String {
        let fx = |x: f64| if self.log_x { x.log10() } else { x };
        let pts: Vec<&Point> = self
            .points
            .iter()
            .filter(|p| p.y.is_finite() && fx(p.x).is_finite())
            .collect();
        let (x0, x1) = span(
            pts.iter().map(|p| fx(p.x)).fold(f64::INFINITY, f64::min),
            pts.iter().map(|p| fx(p.x)).fold(f64::NEG_INFINITY, f64::max),
        );
        let (y0, y1) = span(
            pts.iter().map(|p| p.y - p.err).fold(f64::INFINITY, f64::min),
            pts.iter().map(|p| p.y + p.err).fold(f64::NEG_INFINITY, f64::max),
        );
        let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
        let sx = |x: f64| LEFT + (fx(x) - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );

        // ticks: decades on a log axis, five even steps otherwise
        let xticks: Vec<f64> = if self.log_x && pts.len() > 0 {
            (x0.ceil() as i32..=x1.floor() as i32).map(|e| 10f64.powi(e)).collect()
        } else {
            (0..=4).map(|k| x0 + (x1 - x0) * k as f64 / 4.0).collect()
        };
        for x in xticks {
            let px = sx(x);
            let label = if self.log_x { format!("1e{}", x.log10().round()) } else { format!("{x:.3}") };
            let _ = writeln!(
                s,
                r#"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#,
                TOP + ph,
                TOP + ph + 5.0,
                TOP + ph + 19.0
            );
        }
        for k in 0..=4 {
            let y = y0 + (y1 - y0) * k as f64 / 4.0;
            let py = sy(y);
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{py:.1}" x2="{LEFT}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{y:.3}</text>"#,
                LEFT - 5.0,
                LEFT - 8.0,
                py + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        let path: Vec<String> = pts.iter().map(|p| format!("{:.1},{:.1}", sx(p.x), sy(p.y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        for p in &pts {
            let (px, py) = (sx(p.x), sy(p.y));
            if p.err > 0.0 {
                let _ = writeln!(
                    s,
                    r#"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="steelblue"/>"#,
                    sy(p.y - p.err),
                    sy(p.y + p.err)
                );
            }
            let _ = writeln!(s, r#"<circle cx="{px:.1}" cy="{py:.1}" r="3" fill="steelblue"/>"#);
        }
        s.push_str("</svg>\n");
        s
    }
}

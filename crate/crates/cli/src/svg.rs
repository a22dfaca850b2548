//! Minimal static SVG output: line plots, pole plots on the unit circle and
//! colored parameter grids.

use std::fmt::Write;

use num_complex::Complex64;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;

pub const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e"];

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    let m = 0.05 * (hi - lo);
    (lo - m, hi + m)
}

pub struct Series<'a> {
    pub label: &'a str,
    pub y: &'a [f64],
}

/// Series share the x values.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, x: &[f64], series: &[Series]) -> String {
    let (x0, x1) = range(x.iter().copied());
    let (y0, y1) = range(series.iter().flat_map(|s| s.y.iter().copied()));
    let sx = |v: f64| PAD + (v - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - (v - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut out = String::new();
    header(&mut out, W, H);
    let _ = writeln!(
        out,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for k in 0..=4 {
        let xv = x0 + (x1 - x0) * k as f64 / 4.0;
        let yv = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, sx(xv), H - PAD + 16.0, tick(xv));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, PAD - 4.0, sy(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(s.y)
            .filter(|(_, y)| y.is_finite())
            .map(|(&xv, &yv)| format!("{:.2},{:.2}", sx(xv), sy(yv)))
            .collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD - 110.0,
            PAD + 16.0 + 14.0 * i as f64,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

pub struct PoleSet<'a> {
    pub label: &'a str,
    pub poles: &'a [Complex64],
    /// Filled circles when true, open rings otherwise.
    pub filled: bool,
}

pub fn unit_circle(title: &str, sets: &[PoleSet]) -> String {
    let side = 480.0;
    let r = (side - 2.0 * PAD) / 2.2;
    let c = side / 2.0;
    let mut out = String::new();
    header(&mut out, side, side);
    let _ = writeln!(out, r#"<text x="{c}" y="22" text-anchor="middle" font-size="14">{}</text>"#, escape(title));
    let _ = writeln!(out, r#"<circle cx="{c}" cy="{c}" r="{r:.2}" fill="none" stroke="gray"/>"#);
    let _ = writeln!(out, r#"<line x1="{}" y1="{c}" x2="{}" y2="{c}" stroke="lightgray"/>"#, c - 1.1 * r, c + 1.1 * r);
    let _ = writeln!(out, r#"<line x1="{c}" y1="{}" x2="{c}" y2="{}" stroke="lightgray"/>"#, c - 1.1 * r, c + 1.1 * r);
    for (i, s) in sets.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        for z in s.poles {
            let (x, y) = (c + r * z.re, c - r * z.im);
            if s.filled {
                let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/>"#);
            } else {
                let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="6" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
            }
        }
        let _ = writeln!(out, r#"<text x="12" y="{}" fill="{color}">{}</text>"#, side - 12.0 - 14.0 * i as f64, escape(s.label));
    }
    out.push_str("</svg>\n");
    out
}

/// Cells colored by `class[i][j]` (index into COLORS) over a mu (x) by nu
/// (y) grid.
pub fn grid(title: &str, xs: &[f64], ys: &[f64], class: &[Vec<usize>], legend: &[&str]) -> String {
    let mut out = String::new();
    header(&mut out, W, H);
    let (pw, ph) = (W - 2.0 * PAD - 150.0, H - 2.0 * PAD);
    let cw = pw / xs.len().max(1) as f64;
    let chh = ph / ys.len().max(1) as f64;
    for (j, row) in class.iter().enumerate() {
        for (i, &k) in row.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                PAD + cw * i as f64,
                H - PAD - chh * (j + 1) as f64,
                cw + 0.3,
                chh + 0.3,
                COLORS[k % COLORS.len()]
            );
        }
    }
    let _ = writeln!(out, r#"<rect x="{PAD}" y="{PAD}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, PAD + pw / 2.0, escape(title));
    if let (Some(a), Some(b)) = (xs.first(), xs.last()) {
        let _ = writeln!(out, r#"<text x="{PAD}" y="{}">mu {}</text>"#, H - PAD + 16.0, tick(*a));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD + pw, H - PAD + 16.0, tick(*b));
    }
    if let (Some(a), Some(b)) = (ys.first(), ys.last()) {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">nu {}</text>"#, PAD - 4.0, H - PAD, tick(*a));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD - 4.0, PAD + 10.0, tick(*b));
    }
    for (k, name) in legend.iter().enumerate() {
        let y = PAD + 20.0 * k as f64;
        let _ = writeln!(out, r#"<rect x="{}" y="{y}" width="12" height="12" fill="{}"/>"#, W - PAD - 140.0, COLORS[k % COLORS.len()]);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, W - PAD - 122.0, y + 10.0, escape(name));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_are_well_formed() {
        let x = [1.0, 2.0, 3.0];
        let s = line_plot("t", "m", "f", &x, &[Series { label: "f_1", y: &[0.5, 0.4, 0.45] }]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<polyline").count(), 1);
        let p = [Complex64::new(0.5, 0.5)];
        let u = unit_circle("poles", &[PoleSet { label: "a<b", poles: &p, filled: true }]);
        assert!(u.contains("a&lt;b"));
        let g = grid("g", &[0.1, 0.2], &[0.3], &[vec![0, 1]], &["x", "y"]);
        assert_eq!(g.matches("<rect").count(), 1 + 2 + 1 + 2);
    }

    #[test]
    fn flat_series_get_a_range() {
        let s = line_plot("t", "m", "f", &[1.0, 2.0], &[Series { label: "c", y: &[0.5, 0.5] }]);
        assert!(!s.contains("NaN"));
    }
}

//! Minimal self-contained SVG charts: line plots, heat maps and box plots.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scale {
    Linear,
    Log10,
}

impl Scale {
    fn fwd(self, v: f64) -> f64 {
        match self {
            Scale::Linear => v,
            Scale::Log10 => v.max(1e-300).log10(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Axis {
    pub label: String,
    pub scale: Scale,
    pub lo: f64,
    pub hi: f64,
}

impl Axis {
    /// Axis spanning the finite (and, for log scale, positive) values.
    pub fn fit<'a>(label: &str, scale: Scale, values: impl IntoIterator<Item = &'a f64>) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in values {
            if v.is_finite() && (scale == Scale::Linear || v > 0.0) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if lo == hi {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            lo -= pad;
            hi += pad;
            if scale == Scale::Log10 && lo <= 0.0 {
                lo = hi / 10.0;
            }
        }
        Self { label: label.into(), scale, lo, hi }
    }

    pub fn fixed(label: &str, scale: Scale, lo: f64, hi: f64) -> Self {
        Self { label: label.into(), scale, lo, hi }
    }

    fn frac(&self, v: f64) -> f64 {
        let (a, b) = (self.scale.fwd(self.lo), self.scale.fwd(self.hi));
        (self.scale.fwd(v) - a) / (b - a)
    }

    fn ticks(&self) -> Vec<f64> {
        match self.scale {
            Scale::Linear => (0..=5).map(|i| self.lo + (self.hi - self.lo) * i as f64 / 5.0).collect(),
            Scale::Log10 => {
                let (a, b) = (self.lo.log10().floor() as i32, self.hi.log10().ceil() as i32);
                let step = ((b - a) / 8).max(1);
                (a..=b)
                    .step_by(step as usize)
                    .map(|e| 10f64.powi(e))
                    .filter(|&t| t >= self.lo * 0.999 && t <= self.hi * 1.001)
                    .collect()
            }
        }
    }
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Canvas {
    body: String,
    x: Axis,
    y: Axis,
}

impl Canvas {
    fn new(title: &str, x: Axis, y: Axis) -> Self {
        let mut body = String::new();
        let _ = write!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = write!(body, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = write!(
            body,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + (W - LEFT - RIGHT) / 2.0,
            escape(title)
        );
        Self { body, x, y }
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + self.x.frac(v) * (W - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        H - BOTTOM - self.y.frac(v) * (H - TOP - BOTTOM)
    }

    fn frame(&mut self) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = write!(
            self.body,
            r#"<rect x="{x0}" y="{y0}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y1 - y0
        );
        for t in self.x.ticks() {
            let px = self.px(t);
            let _ = write!(
                self.body,
                r#"<line x1="{px:.1}" y1="{y1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                y1 + 4.0,
                y1 + 16.0,
                tick_label(t)
            );
        }
        for t in self.y.ticks() {
            let py = self.py(t);
            let _ = write!(
                self.body,
                r#"<line x1="{:.1}" y1="{py:.1}" x2="{x0}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                x0 - 6.0,
                py + 4.0,
                tick_label(t)
            );
        }
        let _ = write!(
            self.body,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            H - 15.0,
            escape(&self.x.label)
        );
        let _ = write!(
            self.body,
            r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(&self.y.label)
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dashed: bool, markers: bool) {
        let coords: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", self.px(x), self.py(y)))
            .collect();
        if coords.is_empty() {
            return;
        }
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = write!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#,
            coords.join(" ")
        );
        if markers {
            for c in coords {
                let (x, y) = c.split_once(',').expect("formatted pair");
                let _ = write!(self.body, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>"#);
            }
        }
    }

    fn legend(&mut self, entries: &[(String, String, bool)]) {
        for (i, (name, color, dashed)) in entries.iter().enumerate() {
            let y = TOP + 12.0 + 18.0 * i as f64;
            let x = W - RIGHT + 12.0;
            let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = write!(
                self.body,
                r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
                x + 22.0,
                x + 27.0,
                y + 4.0,
                escape(name)
            );
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: &str, points: Vec<(f64, f64)>) -> Self {
        Self { name: name.into(), points, dashed: false }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

pub fn line_plot(title: &str, x: Axis, y: Axis, series: &[Series]) -> String {
    let mut c = Canvas::new(title, x, y);
    c.frame();
    let mut legend = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        c.polyline(&s.points, color, s.dashed, !s.dashed);
        legend.push((s.name.clone(), color.to_string(), s.dashed));
    }
    c.legend(&legend);
    c.finish()
}

/// Gray-scale heat map: `values[i][j]` at `(xs[i], ys[j])`, white = 1,
/// black = 0. Curves are overlaid in color.
pub fn heatmap(title: &str, x: (&str, &[f64]), y: (&str, &[f64]), values: &[Vec<f64>], curves: &[Series]) -> String {
    let (xs, ys) = (x.1, y.1);
    let half = |v: &[f64]| if v.len() > 1 { (v[1] - v[0]) / 2.0 } else { 0.5 };
    let (hx, hy) = (half(xs), half(ys));
    let xa = Axis::fixed(x.0, Scale::Linear, xs[0] - hx, xs[xs.len() - 1] + hx);
    let ya = Axis::fixed(y.0, Scale::Linear, ys[0] - hy, ys[ys.len() - 1] + hy);
    let mut c = Canvas::new(title, xa, ya);
    for (i, &xv) in xs.iter().enumerate() {
        for (j, &yv) in ys.iter().enumerate() {
            let v = values[i][j];
            let fill = if v.is_finite() {
                let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
                format!("rgb({g},{g},{g})")
            } else {
                "#f0c0c0".to_string()
            };
            let (x0, x1) = (c.px(xv - hx), c.px(xv + hx));
            let (y0, y1) = (c.py(yv + hy), c.py(yv - hy));
            let _ = write!(
                c.body,
                r#"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="{fill}"/>"#,
                x1 - x0 + 0.3,
                y1 - y0 + 0.3
            );
        }
    }
    c.frame();
    let mut legend = Vec::new();
    for (i, s) in curves.iter().enumerate() {
        let color = ["#d62728", "#1f77b4", "#2ca02c"][i % 3];
        c.polyline(&s.points, color, s.dashed, false);
        legend.push((s.name.clone(), color.to_string(), s.dashed));
    }
    c.legend(&legend);
    c.finish()
}

/// Five-number summary `(min, q1, median, q3, max)` by linear interpolation.
pub fn five_numbers(values: &[f64]) -> Option<[f64; 5]> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Some([v[0], q(0.25), q(0.5), q(0.75), v[v.len() - 1]])
}

/// Box plots at numeric positions, optionally with overlay curves.
pub fn box_plot(title: &str, x: Axis, y: Axis, groups: &[(f64, Vec<f64>)], overlays: &[Series]) -> String {
    let width = if groups.len() > 1 {
        (W - LEFT - RIGHT) / groups.len() as f64 * 0.5
    } else {
        30.0
    };
    let mut c = Canvas::new(title, x, y);
    c.frame();
    for (pos, vals) in groups {
        let Some([lo, q1, med, q3, hi]) = five_numbers(vals) else { continue };
        let px = c.px(*pos);
        let (ylo, yq1, ymed, yq3, yhi) = (c.py(lo), c.py(q1), c.py(med), c.py(q3), c.py(hi));
        let _ = write!(
            c.body,
            r##"<line x1="{px:.1}" y1="{ylo:.1}" x2="{px:.1}" y2="{yhi:.1}" stroke="#444"/><rect x="{:.1}" y="{yq3:.1}" width="{width:.1}" height="{:.1}" fill="#c6dbef" stroke="#1f77b4"/><line x1="{:.1}" y1="{ymed:.1}" x2="{:.1}" y2="{ymed:.1}" stroke="black" stroke-width="2"/>"##,
            px - width / 2.0,
            (yq1 - yq3).max(0.5),
            px - width / 2.0,
            px + width / 2.0
        );
    }
    let mut legend = Vec::new();
    for (i, s) in overlays.iter().enumerate() {
        let color = ["#d62728", "#2ca02c"][i % 2];
        c.polyline(&s.points, color, s.dashed, false);
        legend.push((s.name.clone(), color.to_string(), s.dashed));
    }
    c.legend(&legend);
    c.finish()
}

/// Box plots for categorical groups placed at 1, 2, ...; labels go in the
/// legend column.
pub fn categorical_box_plot(title: &str, ylabel: &str, groups: &[(String, Vec<f64>)]) -> String {
    let all: Vec<f64> = groups.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    let x = Axis::fixed("group", Scale::Linear, 0.5, groups.len() as f64 + 0.5);
    let y = Axis::fit(ylabel, Scale::Linear, all.iter());
    let numbered: Vec<(f64, Vec<f64>)> =
        groups.iter().enumerate().map(|(i, (_, v))| ((i + 1) as f64, v.clone())).collect();
    let mut svg = box_plot(title, x, y, &numbered, &[]);
    let mut labels = String::new();
    for (i, (name, _)) in groups.iter().enumerate() {
        let _ = write!(
            labels,
            r#"<text x="{:.1}" y="{:.1}">{}: {}</text>"#,
            W - RIGHT + 12.0,
            TOP + 12.0 + 18.0 * i as f64,
            i + 1,
            escape(name)
        );
    }
    svg.truncate(svg.len() - "</svg>\n".len());
    svg.push_str(&labels);
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_number_summary() {
        assert_eq!(five_numbers(&[3.0, 1.0, 2.0, 4.0, 5.0]).unwrap(), [1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(five_numbers(&[1.0, 2.0]).unwrap()[2], 1.5);
        assert!(five_numbers(&[f64::NAN]).is_none());
    }

    #[test]
    fn documents_are_well_formed_enough() {
        let s = line_plot(
            "t<1>",
            Axis::fit("x", Scale::Log10, [1.0, 1000.0].iter()),
            Axis::fit("y", Scale::Linear, [0.0, 1.0].iter()),
            &[Series::new("a", vec![(1.0, 0.0), (1000.0, 1.0)]), Series::new("b", vec![]).dashed()],
        );
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("t&lt;1&gt;"));
        let h = heatmap("h", ("x", &[1.0, 2.0]), ("y", &[0.5]), &[vec![1.0], vec![f64::NAN]], &[]);
        assert_eq!(h.matches("<rect").count(), 2 + 2);
        let b = categorical_box_plot("b", "w2", &[("ballot".into(), vec![0.1, 0.2, 0.3])]);
        assert!(b.ends_with("</svg>\n") && b.contains("1: ballot"));
    }
}

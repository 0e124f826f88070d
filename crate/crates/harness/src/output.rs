//! CSV tables and SVG line charts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::HarnessError;

/// Channels sharing one time grid; written as `t,<name>,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTable {
    pub name: String,
    pub times: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl ChannelTable {
    pub fn new(name: &str, times: Vec<f64>) -> Self {
        ChannelTable { name: name.into(), times, columns: Vec::new() }
    }

    pub fn column(mut self, name: &str, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.times.len(), "channel '{name}' is not aligned with the grid");
        self.columns.push((name.into(), values));
        self
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Keeps every `stride`-th row and always the last one.
    pub fn decimate(&self, stride: usize) -> ChannelTable {
        let stride = stride.max(1);
        let n = self.times.len();
        let keep: Vec<usize> = (0..n).filter(|i| i % stride == 0 || *i + 1 == n).collect();
        ChannelTable {
            name: self.name.clone(),
            times: keep.iter().map(|&i| self.times[i]).collect(),
            columns: self
                .columns
                .iter()
                .map(|(c, v)| (c.clone(), keep.iter().map(|&i| v[i]).collect()))
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for (name, _) in &self.columns {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            s.push_str(&fmt17(*t));
            for (_, v) in &self.columns {
                s.push(',');
                s.push_str(&fmt17(v[i]));
            }
            s.push('\n');
        }
        s
    }
}

/// Free-form table for non time-series results.
#[derive(Debug, Clone, PartialEq)]
pub struct TextTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl TextTable {
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Seventeen significant digits: round-trips every `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<(String, Vec<f64>, Vec<f64>)>,
    pub log_y: bool,
}

impl Chart {
    pub fn new(name: &str, title: &str, x_label: &str, y_label: &str) -> Self {
        Chart {
            name: name.into(),
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            log_y: false,
        }
    }

    pub fn line(mut self, label: &str, x: &[f64], y: &[f64]) -> Self {
        self.series.push((label.into(), x.to_vec(), y.to_vec()));
        self
    }

    pub fn log_scale(mut self) -> Self {
        self.log_y = true;
        self
    }

    pub fn to_svg(&self) -> String {
        const W: f64 = 760.0;
        const H: f64 = 440.0;
        const LEFT: f64 = 80.0;
        const RIGHT: f64 = 170.0;
        const TOP: f64 = 40.0;
        const BOTTOM: f64 = 60.0;
        const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#17becf"];

        let ty = |y: f64| if self.log_y { y.abs().max(1e-300).log10() } else { y };
        let pts: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|(_, x, y)| x.iter().zip(y).map(|(a, b)| (*a, ty(*b))))
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .collect();
        let (mut x0, mut x1) = bounds(pts.iter().map(|p| p.0));
        let (mut y0, mut y1) = bounds(pts.iter().map(|p| p.1));
        if x1 <= x0 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 <= y0 {
            let pad = if y0 == 0.0 { 1.0 } else { y0.abs() * 0.1 };
            y0 -= pad;
            y1 += pad;
        }
        let xt = ticks(x0, x1, 6);
        let yt = ticks(y0, y1, 6);
        let (x0, x1) = (x0.min(xt[0]), x1.max(*xt.last().unwrap()));
        let (y0, y1) = (y0.min(yt[0]), y1.max(*yt.last().unwrap()));
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for &t in &xt {
            let x = sx(t);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{}" stroke="lightgray"/>"#, TOP + ph);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 19.0, tick_label(t));
        }
        for &t in &yt {
            let y = sy(t);
            let label = if self.log_y { format!("1e{}", tick_label(t)) } else { tick_label(t) };
            let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
            let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="lightgray"/>"#, LEFT + pw);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, LEFT - 8.0, y + 4.0);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 15.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, (label, x, y)) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let mut path = String::new();
            for (a, b) in x.iter().zip(y) {
                let b = ty(*b);
                if a.is_finite() && b.is_finite() {
                    let _ = write!(path, "{:.2},{:.2} ", sx(*a), sy(b));
                }
            }
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.trim_end());
            let ly = TOP + 14.0 + 20.0 * i as f64;
            let lx = LEFT + pw + 12.0;
            let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 22.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 28.0, ly + 4.0, escape(label));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

/// Round tick positions covering `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).floor() as i64;
    let end = (hi / step).ceil() as i64;
    (start..=end).map(|i| i as f64 * step).collect()
}

fn tick_label(t: f64) -> String {
    if t == 0.0 {
        return "0".into();
    }
    let a = t.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{t:.6}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{t:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), content)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_doubles() {
        let vals = vec![0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23];
        let table = ChannelTable::new("x", vec![0.0, 1.0, 2.0, 3.0]).column("v", vals.clone());
        let csv = table.to_csv();
        let parsed: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert_eq!(parsed, vals);
        assert!(csv.starts_with("t,v\n"));
    }

    #[test]
    fn decimation_keeps_the_last_row() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let d = ChannelTable::new("x", t.clone()).column("v", t).decimate(4);
        assert_eq!(d.times, vec![0.0, 4.0, 8.0, 9.0]);
    }

    #[test]
    fn ticks_cover_the_range() {
        let t = ticks(0.13, 9.7, 5);
        assert!(t[0] <= 0.13 && *t.last().unwrap() >= 9.7);
        assert_eq!(t[1] - t[0], 2.0);
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = Chart::new("c", "a < b", "t", "y")
            .line("one", &[0.0, 1.0, 2.0], &[1.0, 2.0, 1.5])
            .line("two", &[0.0, 2.0], &[0.5, 0.5])
            .to_svg();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a &lt; b"));
    }
}

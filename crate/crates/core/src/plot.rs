//! Minimal SVG renderers for traces, heatmaps and ensemble bands.

use std::fmt::Write;

const MARGIN: f64 = 48.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Plot area in pixels and the data window it shows.
struct Frame {
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(width: u32, height: u32, x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        Self {
            width: width as f64,
            height: height as f64,
            x: pad(x),
            y: pad(y),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (self.width - 1.5 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        self.height - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (self.height - 1.5 * MARGIN)
    }

    fn open(&self, out: &mut String, x_label: &str, y_label: &str) {
        let (w, h) = (self.width, self.height);
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let (x0, x1, y0, y1) = (
            self.px(self.x.0),
            self.px(self.x.1),
            self.py(self.y.0),
            self.py(self.y.1),
        );
        let _ = writeln!(
            out,
            r#"<path d="M{x0:.1},{y1:.1} V{y0:.1} H{x1:.1}" stroke="black" fill="none"/>"#
        );
        for (v, anchor_x) in [(self.x.0, x0), (self.x.1, x1)] {
            let _ = writeln!(
                out,
                r#"<text x="{anchor_x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                y0 + 14.0,
                tick(v)
            );
        }
        for (v, anchor_y) in [(self.y.0, y0), (self.y.1, y1)] {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                anchor_y + 4.0,
                tick(v)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x_label}</text>"#,
            0.5 * (x0 + x1),
            h - 8.0
        );
        let _ = writeln!(
            out,
            r#"<text transform="translate(12,{:.1}) rotate(-90)" text-anchor="middle">{y_label}</text>"#,
            0.5 * (y0 + y1)
        );
    }

    fn polyline(&self, xs: &[f64], ys: &[f64]) -> String {
        let mut d = String::new();
        for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
            let _ = write!(
                d,
                "{}{:.2},{:.2}",
                if i == 0 { "M" } else { " L" },
                self.px(x),
                self.py(y)
            );
        }
        d
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.filter(|v| v.is_finite())
        .fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)))
}

/// Named series sharing one time axis.
pub fn lines_svg(
    times: &[f64],
    series: &[(String, Vec<f64>)],
    y_label: &str,
    width: u32,
    height: u32,
) -> String {
    let x = range(times.iter().copied());
    let y = range(series.iter().flat_map(|(_, s)| s.iter().copied()));
    let frame = Frame::new(width, height, x, (y.0.min(0.0), y.1.max(1.0)));
    let mut out = String::new();
    frame.open(&mut out, "t (t0)", y_label);
    for (i, (name, s)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<path d="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#,
            frame.polyline(times, s)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{name}</text>"#,
            frame.width - MARGIN * 0.5 - 40.0,
            MARGIN * 0.5 + 14.0 * i as f64
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Ensemble means with shaded confidence bands.
pub fn band_svg(
    times: &[f64],
    means: &[Vec<f64>],
    half_widths: &[Vec<f64>],
    width: u32,
    height: u32,
) -> String {
    let frame = Frame::new(width, height, range(times.iter().copied()), (0.0, 1.0));
    let mut out = String::new();
    frame.open(&mut out, "t (t0)", "probability");
    for (i, (m, h)) in means.iter().zip(half_widths).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper: Vec<f64> = m.iter().zip(h).map(|(m, h)| (m + h).min(1.0)).collect();
        let lower: Vec<f64> = m.iter().zip(h).map(|(m, h)| (m - h).max(0.0)).collect();
        let mut d = frame.polyline(times, &upper);
        for (&t, &l) in times.iter().zip(&lower).rev() {
            let _ = write!(d, " L{:.2},{:.2}", frame.px(t), frame.py(l));
        }
        let _ = writeln!(
            out,
            r#"<path d="{d} Z" fill="{color}" fill-opacity="0.25" stroke="none"/>"#
        );
        let _ = writeln!(
            out,
            r#"<path d="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#,
            frame.polyline(times, m)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">p{}</text>"#,
            frame.width - MARGIN * 0.5 - 40.0,
            MARGIN * 0.5 + 14.0 * i as f64,
            i + 1
        );
    }
    out.push_str("</svg>\n");
    out
}

fn color_map(v: f64) -> String {
    // Dark blue through teal to yellow.
    let stops = [
        (0.0, [13, 8, 135]),
        (0.5, [33, 145, 140]),
        (1.0, [253, 231, 37]),
    ];
    let v = v.clamp(0.0, 1.0);
    let i = if v < 0.5 { 0 } else { 1 };
    let (a, ca) = stops[i];
    let (b, cb) = stops[i + 1];
    let f = (v - a) / (b - a);
    let c: Vec<u8> = (0..3)
        .map(|k| (ca[k] as f64 + f * (cb[k] as f64 - ca[k] as f64)).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// `rows[i][j]` is the density at `times[i]`, `xs[j]`; time runs upward.
/// At most `max_cells` columns and rows are drawn.
pub fn heatmap_svg(
    times: &[f64],
    xs: &[f64],
    rows: &[Vec<f64>],
    width: u32,
    height: u32,
    max_cells: usize,
) -> String {
    let frame = Frame::new(
        width,
        height,
        range(xs.iter().copied()),
        range(times.iter().copied()),
    );
    let mut out = String::new();
    frame.open(&mut out, "x (x0)", "t (t0)");
    let peak = rows.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let max_cells = max_cells.max(1);
    let row_step = rows.len().div_ceil(max_cells).max(1);
    let col_step = xs.len().div_ceil(max_cells).max(1);
    let cell_w = (frame.px(frame.x.1) - frame.px(frame.x.0)) / xs.len().div_ceil(col_step) as f64;
    let cell_h = (frame.py(frame.y.0) - frame.py(frame.y.1)) / rows.len().div_ceil(row_step) as f64;
    for (ri, row) in rows.chunks(row_step).enumerate() {
        for ci in 0..xs.len().div_ceil(col_step) {
            let cols = ci * col_step..((ci + 1) * col_step).min(xs.len());
            let n = (cols.len() * row.len()) as f64;
            let v: f64 = row.iter().flat_map(|r| &r[cols.clone()]).sum::<f64>() / n;
            let x = frame.px(frame.x.0) + ci as f64 * cell_w;
            let y = frame.py(frame.y.0) - (ri + 1) as f64 * cell_h;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                cell_w + 0.05,
                cell_h + 0.05,
                color_map(if peak > 0.0 { v / peak } else { 0.0 })
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Bars with one label each.
pub fn histogram_svg(labels: &[String], values: &[f64], width: u32, height: u32) -> String {
    let n = values.len().max(1) as f64;
    let frame = Frame::new(width, height, (0.0, n), (0.0, 1.0));
    let mut out = String::new();
    frame.open(&mut out, "", "probability");
    for (i, (l, &v)) in labels.iter().zip(values).enumerate() {
        let x0 = frame.px(i as f64 + 0.15);
        let x1 = frame.px(i as f64 + 0.85);
        let y = frame.py(v.clamp(0.0, 1.0));
        let _ = writeln!(
            out,
            r#"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            x1 - x0,
            frame.py(0.0) - y,
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{l}</text>"#,
            0.5 * (x0 + x1),
            frame.py(0.0) + 26.0
        );
    }
    out.push_str("</svg>\n");
    out
}

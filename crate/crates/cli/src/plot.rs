//! Minimal SVG plotter for the batch reports: line charts and histograms
//! rendered straight from the CSV data, no interactivity.

use std::fmt::Write as _;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;

const SERIES_COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn axis_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn sx(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B
            - (y - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" \
         text-anchor=\"middle\">{title}</text>\n",
        WIDTH / 2.0
    )
}

fn svg_axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    let _ = writeln!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>"
    );
    for i in 0..=4 {
        let fx = frame.x_lo + (frame.x_hi - frame.x_lo) * i as f64 / 4.0;
        let fy = frame.y_lo + (frame.y_hi - frame.y_lo) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{:.3}</text>",
            frame.sx(fx),
            y0 + 16.0,
            fx
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{:.3}</text>",
            x0 - 6.0,
            frame.sy(fy) + 4.0,
            fy
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\">{x_label}</text>",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{y_label}</text>",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0
    );
}

/// Multi-series line chart.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(&str, &[(f64, f64)])],
) -> String {
    let frame = Frame {
        x_lo: axis_bounds(series.iter().flat_map(|(_, s)| s.iter().map(|p| p.0))).0,
        x_hi: axis_bounds(series.iter().flat_map(|(_, s)| s.iter().map(|p| p.0))).1,
        y_lo: axis_bounds(series.iter().flat_map(|(_, s)| s.iter().map(|p| p.1))).0,
        y_hi: axis_bounds(series.iter().flat_map(|(_, s)| s.iter().map(|p| p.1))).1,
    };
    let mut out = svg_header(title);
    svg_axes(&mut out, &frame, x_label, y_label);
    for (i, (label, points)) in series.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let mut path = String::new();
        for (j, (x, y)) in points.iter().enumerate() {
            let _ = write!(
                path,
                "{}{:.2},{:.2} ",
                if j == 0 { "M" } else { "L" },
                frame.sx(*x),
                frame.sy(*y)
            );
        }
        let _ = writeln!(
            out,
            "<path d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>"
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"{color}\">{label}</text>",
            WIDTH - MARGIN_R - 150.0,
            MARGIN_T + 16.0 * i as f64
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Fixed-bin histogram.
pub fn histogram(title: &str, x_label: &str, values: &[f64], bins: usize) -> String {
    let (lo, hi) = axis_bounds(values.iter().copied());
    let mut counts = vec![0usize; bins.max(1)];
    for v in values {
        if v.is_finite() {
            let k = (((v - lo) / (hi - lo)) * bins as f64).floor() as isize;
            let k = k.clamp(0, bins as isize - 1) as usize;
            counts[k] += 1;
        }
    }
    let max_count = counts.iter().copied().max().unwrap_or(1).max(1);
    let frame = Frame {
        x_lo: lo,
        x_hi: hi,
        y_lo: 0.0,
        y_hi: max_count as f64 * 1.05,
    };
    let mut out = svg_header(title);
    svg_axes(&mut out, &frame, x_label, "count");
    let bin_w = (hi - lo) / bins as f64;
    for (k, count) in counts.iter().enumerate() {
        if *count == 0 {
            continue;
        }
        let x = frame.sx(lo + k as f64 * bin_w);
        let x2 = frame.sx(lo + (k + 1) as f64 * bin_w);
        let y = frame.sy(*count as f64);
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
             fill=\"#1f77b4\" fill-opacity=\"0.75\" stroke=\"white\" stroke-width=\"0.5\"/>",
            x,
            y,
            (x2 - x).max(0.5),
            (HEIGHT - MARGIN_B) - y
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_valid_ish_svg_and_deterministic() {
        let pts: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, (i as f64 * 0.3).sin())).collect();
        let a = line_chart("demo", "t", "y", &[("sin", &pts)]);
        let b = line_chart("demo", "t", "y", &[("sin", &pts)]);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
        let vals: Vec<f64> = (0..100).map(|i| (i % 13) as f64).collect();
        let h = histogram("h", "v", &vals, 20);
        assert!(h.contains("<rect"));
    }

    #[test]
    fn histogram_of_constant_values_does_not_collapse() {
        let h = histogram("h", "v", &[1.0; 10], 10);
        assert!(h.contains("<rect"));
    }
}

//! Minimal native SVG rendering: log-linear polyline plots with axes,
//! tick labels, and a legend. Output is a deterministic string.

use std::fmt::Write;

/// One labelled curve; `points` are raw `(x, y)` pairs, `y` is plotted on a
/// logarithmic scale and non-positive values are skipped.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Renders the series as a log-linear plot (linear x, log10 y).
pub fn log_linear_plot(title: &str, x_label: &str, series: &[Series]) -> String {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            if y > 0.0 && y.is_finite() && x.is_finite() {
                x_min = x_min.min(x);
                x_max = x_max.max(x);
                y_min = y_min.min(y.log10());
                y_max = y_max.max(y.log10());
            }
        }
    }
    if !x_min.is_finite() || x_max <= x_min {
        x_min = 0.0;
        x_max = 1.0;
    }
    if !y_min.is_finite() {
        y_min = -1.0;
        y_max = 0.0;
    }
    if y_max - y_min < 1e-12 {
        y_max = y_min + 1.0;
    }

    let px = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |ly: f64| {
        HEIGHT - MARGIN_B - (ly - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"monospace\" font-size=\"12\">"
    );
    let _ = writeln!(
        out,
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>",
        WIDTH / 2.0
    );

    let x0 = px(x_min);
    let x1 = px(x_max);
    let y0 = py(y_min);
    let y1 = py(y_max);
    let _ = writeln!(
        out,
        "<line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x1:.1}\" y2=\"{y0:.1}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        out,
        "<line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x0:.1}\" y2=\"{y1:.1}\" stroke=\"black\"/>"
    );

    let n_ticks = 5usize;
    for i in 0..=n_ticks {
        let fx = x_min + (x_max - x_min) * i as f64 / n_ticks as f64;
        let tx = px(fx);
        let _ = writeln!(
            out,
            "<line x1=\"{tx:.1}\" y1=\"{y0:.1}\" x2=\"{tx:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
            y0 + 5.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{tx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{fx:.3}</text>",
            y0 + 20.0
        );
        let fy = y_min + (y_max - y_min) * i as f64 / n_ticks as f64;
        let ty = py(fy);
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{ty:.1}\" x2=\"{x0:.1}\" y2=\"{ty:.1}\" stroke=\"black\"/>",
            x0 - 5.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{fy:.1}</text>",
            x0 - 8.0,
            ty + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{x_label}</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 10.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for &(x, y) in &s.points {
            if y > 0.0 && y.is_finite() && x.is_finite() {
                let _ = write!(path, "{:.2},{:.2} ", px(x), py(y.log10()));
            }
        }
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            path.trim_end()
        );
        let ly = MARGIN_T + 14.0 * i as f64;
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>",
            WIDTH - MARGIN_R - 180.0,
            WIDTH - MARGIN_R - 160.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            WIDTH - MARGIN_R - 155.0,
            ly + 4.0,
            s.label
        );
    }
    out.push_str("</svg>\n");
    out
}

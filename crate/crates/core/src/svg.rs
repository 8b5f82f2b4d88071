//! Minimal deterministic SVG rendering for diagnostic plots.
//!
//! The output contains no timestamps, random identifiers, or
//! environment-dependent content: rendering the same series twice yields
//! byte-identical files, which keeps run artifacts diffable.

use std::fmt::Write;

use crate::diagnostics::{PlotKind, PlotSeries};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

struct Bounds {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Bounds {
    fn of(series: &PlotSeries) -> Bounds {
        let mut b = Bounds {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for &(x, y) in &series.points {
            b.x_min = b.x_min.min(x);
            b.x_max = b.x_max.max(x);
            b.y_min = b.y_min.min(y);
            b.y_max = b.y_max.max(y);
        }
        // make sure the reference line is visible inside the frame
        if let Some((slope, intercept)) = series.reference {
            let at = |x: f64| slope * x + intercept;
            b.y_min = b.y_min.min(at(b.x_min)).min(at(b.x_max));
            b.y_max = b.y_max.max(at(b.x_min)).max(at(b.x_max));
        }
        if b.x_min == b.x_max {
            b.x_min -= 0.5;
            b.x_max += 0.5;
        }
        if b.y_min == b.y_max {
            b.y_min -= 0.5;
            b.y_max += 0.5;
        }
        b
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x_min) / (self.x_max - self.x_min)
            * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (y - self.y_min) / (self.y_max - self.y_min)
                * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if a >= 1e4 || a < 1e-3 {
        format!("{:.2e}", v)
    } else {
        format!("{:.3}", v)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders a series as a standalone SVG document. Scatter kinds draw
/// circles; the epoch-loss curve draws a polyline.
pub fn render_svg(series: &PlotSeries) -> String {
    let b = Bounds::of(series);
    let mut out = String::with_capacity(4096 + 64 * series.points.len());

    write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n",
        w = WIDTH,
        h = HEIGHT
    )
    .unwrap();
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // frame
    write!(
        out,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
         fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n",
        MARGIN_LEFT,
        MARGIN_TOP,
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    )
    .unwrap();

    // ticks and grid: five divisions per axis
    for k in 0..=4 {
        let fx = b.x_min + (b.x_max - b.x_min) * k as f64 / 4.0;
        let px = b.sx(fx);
        write!(
            out,
            "<line x1=\"{px:.2}\" y1=\"{y0:.2}\" x2=\"{px:.2}\" y2=\"{y1:.2}\" \
             stroke=\"#ccc\" stroke-width=\"0.5\"/>\n",
            y0 = MARGIN_TOP,
            y1 = HEIGHT - MARGIN_BOTTOM
        )
        .unwrap();
        write!(
            out,
            "<text x=\"{px:.2}\" y=\"{y:.2}\" font-size=\"11\" text-anchor=\"middle\" \
             font-family=\"monospace\">{t}</text>\n",
            y = HEIGHT - MARGIN_BOTTOM + 16.0,
            t = fmt_tick(fx)
        )
        .unwrap();

        let fy = b.y_min + (b.y_max - b.y_min) * k as f64 / 4.0;
        let py = b.sy(fy);
        write!(
            out,
            "<line x1=\"{x0:.2}\" y1=\"{py:.2}\" x2=\"{x1:.2}\" y2=\"{py:.2}\" \
             stroke=\"#ccc\" stroke-width=\"0.5\"/>\n",
            x0 = MARGIN_LEFT,
            x1 = WIDTH - MARGIN_RIGHT
        )
        .unwrap();
        write!(
            out,
            "<text x=\"{x:.2}\" y=\"{py:.2}\" font-size=\"11\" text-anchor=\"end\" \
             dominant-baseline=\"middle\" font-family=\"monospace\">{t}</text>\n",
            x = MARGIN_LEFT - 6.0,
            t = fmt_tick(fy)
        )
        .unwrap();
    }

    if let Some((slope, intercept)) = series.reference {
        write!(
            out,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
             stroke=\"#d62728\" stroke-width=\"1\" stroke-dasharray=\"5,3\"/>\n",
            b.sx(b.x_min),
            b.sy(slope * b.x_min + intercept),
            b.sx(b.x_max),
            b.sy(slope * b.x_max + intercept)
        )
        .unwrap();
    }

    if series.kind == PlotKind::EpochLoss {
        out.push_str("<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"");
        for (i, &(x, y)) in series.points.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{:.2},{:.2}", b.sx(x), b.sy(y)).unwrap();
        }
        out.push_str("\"/>\n");
    } else {
        for &(x, y) in &series.points {
            write!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"#1f77b4\" \
                 fill-opacity=\"0.6\"/>\n",
                b.sx(x),
                b.sy(y)
            )
            .unwrap();
        }
    }

    write!(
        out,
        "<text x=\"{x:.2}\" y=\"24\" font-size=\"14\" text-anchor=\"middle\" \
         font-family=\"monospace\">{t}</text>\n",
        x = WIDTH / 2.0,
        t = escape(&series.title)
    )
    .unwrap();
    write!(
        out,
        "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"12\" text-anchor=\"middle\" \
         font-family=\"monospace\">{t}</text>\n",
        x = MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / 2.0,
        y = HEIGHT - 12.0,
        t = escape(&series.x_label)
    )
    .unwrap();
    write!(
        out,
        "<text x=\"18\" y=\"{y:.2}\" font-size=\"12\" text-anchor=\"middle\" \
         font-family=\"monospace\" transform=\"rotate(-90 18 {y:.2})\">{t}</text>\n",
        y = MARGIN_TOP + (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / 2.0,
        t = escape(&series.y_label)
    )
    .unwrap();

    out.push_str("</svg>\n");
    out
}

/// Dumps the raw points with full float precision so plots can be
/// regenerated elsewhere.
pub fn series_to_csv(series: &PlotSeries) -> String {
    let mut out = String::from("x,y\n");
    for &(x, y) in &series.points {
        writeln!(out, "{},{}", x, y).unwrap();
    }
    out
}

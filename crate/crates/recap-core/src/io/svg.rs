//! Minimal hand-rolled SVG plots: ROC curves and 2-D scatters.
//!
//! The output is deliberately plain — fixed canvas, one `<polyline>` per
//! curve or one batch of circles per series, a legend, and nothing that
//! needs a stylesheet. Everything user-controlled passes through
//! [`xml_escape`] so arbitrary domain names cannot break the document.

use std::fmt::Write;

use crate::harness::RocPoint;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

/// Category palette; six suffices for three domains times two classes.
pub const PALETTE: [&str; 8] = [
    "#d62728", "#2ca02c", "#8c564b", "#9467bd", "#ff7f0e", "#1f77b4", "#e377c2", "#7f7f7f",
];

/// Escapes text for use in SVG/XML content and attributes.
pub fn xml_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// One ROC polyline plus its legend entry.
#[derive(Debug, Clone)]
pub struct RocCurve {
    pub label: String,
    pub points: Vec<RocPoint>,
    pub auc: Option<f64>,
}

/// One labelled point cloud of a scatter plot.
#[derive(Debug, Clone)]
pub struct ScatterSeries {
    pub label: String,
    pub points: Vec<[f64; 2]>,
}

fn header(title: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{cx}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{t}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        cx = WIDTH / 2.0,
        t = xml_escape(title),
    )
}

fn legend(out: &mut String, entries: &[(String, &str)]) {
    let x = MARGIN + 14.0;
    for (i, (text, color)) in entries.iter().enumerate() {
        let y = MARGIN + 16.0 + 18.0 * i as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{x}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            y - 9.0,
            x + 16.0,
            y,
            xml_escape(text),
        );
    }
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    /// Maps data coordinates to canvas pixels (y grows upward in data).
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let px = MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN);
        let py =
            HEIGHT - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN);
        (px, py)
    }

    /// Axis lines, tick marks, tick labels, and axis titles.
    fn draw_axes(&self, out: &mut String, x_label: &str, y_label: &str, ticks: usize) {
        let (x0, y0) = self.map(self.x_min, self.y_min);
        let (x1, y1) = self.map(self.x_max, self.y_max);
        let _ = writeln!(
            out,
            "<line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x1:.1}\" y2=\"{y0:.1}\" stroke=\"black\"/>\
             \n<line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x0:.1}\" y2=\"{y1:.1}\" stroke=\"black\"/>"
        );
        for i in 0..=ticks {
            let f = i as f64 / ticks as f64;
            let xv = self.x_min + f * (self.x_max - self.x_min);
            let yv = self.y_min + f * (self.y_max - self.y_min);
            let (px, _) = self.map(xv, self.y_min);
            let (_, py) = self.map(self.x_min, yv);
            let _ = writeln!(
                out,
                "<line x1=\"{px:.1}\" y1=\"{y0:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\
                 \n<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\
                 \n<line x1=\"{x0:.1}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" stroke=\"black\"/>\
                 \n<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
                y0 + 5.0,
                y0 + 20.0,
                tick_text(xv),
                x0 - 5.0,
                x0 - 8.0,
                py + 4.0,
                tick_text(yv),
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\
             \n<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" \
             transform=\"rotate(-90 16 {cy:.1})\">{}</text>",
            WIDTH / 2.0,
            HEIGHT - 12.0,
            xml_escape(x_label),
            HEIGHT / 2.0,
            xml_escape(y_label),
            cy = HEIGHT / 2.0,
        );
    }
}

fn tick_text(v: f64) -> String {
    let s = format!("{v:.2}");
    // Trim trailing zeros but keep at least one decimal ("0.25", "0.5", "1").
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() { "0".to_string() } else { s.to_string() }
}

/// Renders ROC curves on the unit square with a chance diagonal.
pub fn roc_svg(curves: &[RocCurve]) -> String {
    let frame = Frame { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 };
    let mut out = header("ROC");
    frame.draw_axes(&mut out, "false positive rate", "true positive rate", 4);
    let (dx0, dy0) = frame.map(0.0, 0.0);
    let (dx1, dy1) = frame.map(1.0, 1.0);
    let _ = writeln!(
        out,
        "<line x1=\"{dx0:.1}\" y1=\"{dy0:.1}\" x2=\"{dx1:.1}\" y2=\"{dy1:.1}\" \
         stroke=\"gray\" stroke-dasharray=\"4 4\"/>"
    );
    let mut entries = Vec::new();
    for (i, curve) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut coords = String::new();
        for p in &curve.points {
            let (px, py) = frame.map(p.fpr, p.tpr);
            let _ = write!(coords, "{px:.2},{py:.2} ");
        }
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            coords.trim_end(),
        );
        let text = match curve.auc {
            Some(auc) => format!("{} (AUC = {auc:.4})", curve.label),
            None => curve.label.clone(),
        };
        entries.push((text, color));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

/// Renders labelled point clouds with data-driven bounds.
pub fn scatter_svg(title: &str, series: &[ScatterSeries]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        x_min = x_min.min(p[0]);
        x_max = x_max.max(p[0]);
        y_min = y_min.min(p[1]);
        y_max = y_max.max(p[1]);
    }
    if !x_min.is_finite() {
        (x_min, x_max, y_min, y_max) = (0.0, 1.0, 0.0, 1.0);
    }
    // 5% padding; degenerate (single-point) extents widen to a unit box.
    let pad = |lo: &mut f64, hi: &mut f64| {
        let span = *hi - *lo;
        if span == 0.0 {
            *lo -= 0.5;
            *hi += 0.5;
        } else {
            *lo -= 0.05 * span;
            *hi += 0.05 * span;
        }
    };
    pad(&mut x_min, &mut x_max);
    pad(&mut y_min, &mut y_max);
    let frame = Frame { x_min, x_max, y_min, y_max };
    let mut out = header(title);
    frame.draw_axes(&mut out, "", "", 4);
    let mut entries = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for p in &s.points {
            let (px, py) = frame.map(p[0], p[1]);
            let _ = writeln!(
                out,
                "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3\" fill=\"{color}\" fill-opacity=\"0.7\"/>"
            );
        }
        entries.push((s.label.clone(), color));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

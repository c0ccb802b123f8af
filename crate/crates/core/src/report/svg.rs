//! Minimal SVG emission: axes, polylines, reference lines and shaded bands.
//! Output is a pure function of the inputs.

use std::fmt::Write;

use crate::calibration::ReliabilityBin;
use crate::curves::{CurveKind, CurveSeries};
use crate::dca::NetBenefitCurve;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

pub const MODEL_COLOR: &str = "#1f77b4";
const REFERENCE_COLOR: &str = "#7f7f7f";
const TREAT_ALL_COLOR: &str = "#d62728";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    x_range: (f64, f64),
    y_range: (f64, f64),
    body: String,
    legend: Vec<(String, String, bool)>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Plot {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            x_range: (0.0, 1.0),
            y_range: (0.0, 1.0),
            body: String::new(),
            legend: Vec::new(),
        }
    }

    pub fn x_range(mut self, lo: f64, hi: f64) -> Self {
        self.x_range = (lo, hi);
        self
    }

    pub fn y_range(mut self, lo: f64, hi: f64) -> Self {
        self.y_range = (lo, hi);
        self
    }

    fn px(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        LEFT + (x.clamp(lo, hi) - lo) / (hi - lo) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        HEIGHT - BOTTOM - (y.clamp(lo, hi) - lo) / (hi - lo) * (HEIGHT - TOP - BOTTOM)
    }

    fn coords(&self, points: &[(f64, f64)]) -> String {
        points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], color: &str, dashed: bool, label: Option<&str>) {
        let dash = if dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"/>"#,
            self.coords(points)
        );
        if let Some(l) = label {
            self.legend.push((l.to_string(), color.to_string(), dashed));
        }
    }

    /// Filled region between `lower` and `upper`, which share x values.
    pub fn band(&mut self, lower: &[(f64, f64)], upper: &[(f64, f64)], color: &str) {
        let mut outline: Vec<(f64, f64)> = upper.to_vec();
        outline.extend(lower.iter().rev());
        let _ = writeln!(
            self.body,
            r#"<polygon fill="{color}" fill-opacity="0.2" stroke="none" points="{}"/>"#,
            self.coords(&outline)
        );
    }

    pub fn markers(&mut self, points: &[(f64, f64)], color: &str) {
        for &(x, y) in points {
            let _ = writeln!(
                self.body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                self.px(x),
                self.py(y)
            );
        }
    }

    fn ticks(range: (f64, f64)) -> Vec<f64> {
        let (lo, hi) = range;
        (0..=5).map(|i| lo + (hi - lo) * i as f64 / 5.0).collect()
    }

    /// Render the document. `metadata`, when given, is embedded as a comment.
    pub fn render(&self, metadata: Option<&str>) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        if let Some(m) = metadata {
            let _ = writeln!(s, "<!-- {} -->", m.replace("--", "- -"));
        }
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let (x0, x1) = (self.px(self.x_range.0), self.px(self.x_range.1));
        let (y0, y1) = (self.py(self.y_range.0), self.py(self.y_range.1));
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        for t in Self::ticks(self.x_range) {
            let x = self.px(t);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t:.2}</text>"#, y0 + 18.0);
        }
        for t in Self::ticks(self.y_range) {
            let y = self.py(t);
            let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{t:.2}</text>"#, x0 - 8.0, y + 4.0);
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 14.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(&self.y_label)
        );
        s.push_str(&self.body);
        for (i, (label, color, dashed)) in self.legend.iter().enumerate() {
            let y = y1 + 16.0 + 16.0 * i as f64;
            let dash = if *dashed { r#" stroke-dasharray="6,4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"{dash}/>"#,
                x1 - 150.0,
                x1 - 126.0
            );
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x1 - 120.0, y + 4.0, escape(label));
        }
        s.push_str("</svg>\n");
        s
    }
}

pub fn curve_svg(curve: &CurveSeries, title: &str, prevalence: f64, metadata: Option<&str>) -> String {
    let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.x, p.y)).collect();
    match curve.kind {
        CurveKind::Roc => {
            let mut plot = Plot::new(title, "False positive rate", "True positive rate");
            plot.polyline(&[(0.0, 0.0), (1.0, 1.0)], REFERENCE_COLOR, true, Some("chance"));
            plot.polyline(&pts, MODEL_COLOR, false, Some(&format!("AUC {:.3}", curve.area)));
            plot.render(metadata)
        }
        CurveKind::Pr => {
            let mut plot = Plot::new(title, "Recall", "Precision");
            plot.polyline(&[(0.0, prevalence), (1.0, prevalence)], REFERENCE_COLOR, true, Some("prevalence"));
            // Average precision is a step integral; draw it as steps.
            let mut steps = Vec::with_capacity(2 * pts.len());
            let mut prev_x = 0.0;
            for &(x, y) in &pts {
                steps.push((prev_x, y));
                steps.push((x, y));
                prev_x = x;
            }
            plot.polyline(&steps, MODEL_COLOR, false, Some(&format!("AP {:.3}", curve.area)));
            plot.render(metadata)
        }
    }
}

pub fn calibration_svg(bins: &[ReliabilityBin], title: &str, metadata: Option<&str>) -> String {
    let mut plot = Plot::new(title, "Mean predicted probability", "Observed frequency");
    plot.polyline(&[(0.0, 0.0), (1.0, 1.0)], REFERENCE_COLOR, true, Some("perfect calibration"));
    let pts: Vec<(f64, f64)> = bins
        .iter()
        .filter_map(|b| Some((b.mean_predicted?, b.observed_frequency?)))
        .collect();
    plot.polyline(&pts, MODEL_COLOR, false, Some("model"));
    plot.markers(&pts, MODEL_COLOR);
    plot.render(metadata)
}

pub fn dca_svg(curve: &NetBenefitCurve, title: &str, metadata: Option<&str>) -> String {
    let x_hi = curve.thresholds.last().copied().unwrap_or(1.0);
    let mut y_hi = curve.prevalence.max(0.01);
    for v in curve.model_nb.iter().chain(curve.bands.iter().flatten().map(|b| &b.hi)) {
        y_hi = y_hi.max(*v);
    }
    y_hi *= 1.1;
    let mut plot = Plot::new(title, "Threshold probability", "Net benefit")
        .x_range(0.0, x_hi)
        .y_range(-0.25 * y_hi, y_hi);
    let series = |v: &[f64]| -> Vec<(f64, f64)> { curve.thresholds.iter().copied().zip(v.iter().copied()).collect() };
    if let Some(bands) = &curve.bands {
        let lo: Vec<f64> = bands.iter().map(|b| b.lo).collect();
        let hi: Vec<f64> = bands.iter().map(|b| b.hi).collect();
        plot.band(&series(&lo), &series(&hi), MODEL_COLOR);
    }
    plot.polyline(&series(&curve.treat_none_nb), REFERENCE_COLOR, true, Some("treat none"));
    plot.polyline(&series(&curve.treat_all_nb), TREAT_ALL_COLOR, true, Some("treat all"));
    plot.polyline(&series(&curve.model_nb), MODEL_COLOR, false, Some("model"));
    plot.render(metadata)
}

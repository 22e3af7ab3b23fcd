//! Output records: metric reports as JSON/CSV, learning curves, and static
//! SVG plots of a deployment.
//!
//! Floats are written with Rust's shortest round-trip formatting so reruns
//! produce byte-identical files.

use std::fmt::Write as _;

use serde::Serialize;

use crate::metrics::MetricReport;
use crate::sac::CurvePoint;
use crate::scenario::{CircularTrajectory, Deployment, Point2D, Region};

pub const METRIC_CSV_HEADER: &str =
    "sum_rate,min_rate,sum_fim_det,min_fim_det,objective_value,per_ue_rate,per_sample_fim_det";

fn join(values: &[f64], sep: &str) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(sep)
}

/// One CSV row; list fields are `;`-separated inside their column.
pub fn metric_csv_row(r: &MetricReport) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        r.sum_rate,
        r.min_rate,
        r.sum_fim_det,
        r.min_fim_det,
        r.objective_value,
        join(&r.per_ue_rate, ";"),
        join(&r.per_sample_fim_det, ";"),
    )
}

pub fn metric_csv(r: &MetricReport) -> String {
    format!("{METRIC_CSV_HEADER}\n{}\n", metric_csv_row(r))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types always serialize");
    s.push('\n');
    s
}

pub const CURVE_CSV_HEADER: &str = "step,eval_reward,actor_loss,critic_loss,omega";

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = format!("{CURVE_CSV_HEADER}\n");
    for p in curve {
        writeln!(out, "{},{},{},{},{}", p.step, p.eval_reward, p.actor_loss, p.critic_loss, p.omega).unwrap();
    }
    out
}

/// Table-style statistics of one optimized deployment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryStats {
    /// `Σ_k R_k / Q`
    pub rate_per_sample: f64,
    /// `Σ_q |Φ|_q / Q`
    pub fim_per_sample: f64,
    pub min_rate: f64,
    pub min_fim_det: f64,
    pub objective_value: f64,
}

impl From<&MetricReport> for SummaryStats {
    fn from(r: &MetricReport) -> Self {
        Self {
            rate_per_sample: r.rate_per_sample(),
            fim_per_sample: r.fim_per_sample(),
            min_rate: r.min_rate,
            min_fim_det: r.min_fim_det,
            objective_value: r.objective_value,
        }
    }
}

impl SummaryStats {
    pub const CSV_HEADER: &'static str = "rate_per_sample,fim_per_sample,min_rate,min_fim_det,objective_value";

    pub fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.rate_per_sample, self.fim_per_sample, self.min_rate, self.min_fim_det, self.objective_value
        )
    }
}

const SVG_SIZE: f64 = 600.0;
const SVG_MARGIN: f64 = 50.0;

struct Canvas {
    region: Region,
    scale: f64,
}

impl Canvas {
    fn new(region: &Region) -> Self {
        let span = region.width().max(region.height());
        Self { region: *region, scale: (SVG_SIZE - 2.0 * SVG_MARGIN) / span }
    }

    fn map(&self, p: Point2D) -> (f64, f64) {
        (
            SVG_MARGIN + (p.x - self.region.x_min) * self.scale,
            SVG_SIZE - SVG_MARGIN - (p.y - self.region.y_min) * self.scale,
        )
    }
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

fn tx_glyph(x: f64, y: f64, class: &str) -> String {
    format!(
        r#"<polygon class="{class}" points="{},{} {},{} {},{}"/>"#,
        fmt2(x),
        fmt2(y - 8.0),
        fmt2(x - 7.0),
        fmt2(y + 5.0),
        fmt2(x + 7.0),
        fmt2(y + 5.0)
    )
}

fn rx_glyph(x: f64, y: f64, class: &str) -> String {
    format!(r#"<rect class="{class}" x="{}" y="{}" width="12" height="12"/>"#, fmt2(x - 6.0), fmt2(y - 6.0))
}

fn ue_glyph(x: f64, y: f64, class: &str) -> String {
    format!(
        r#"<path class="{class}" d="M{} {} L{} {} M{} {} L{} {}"/>"#,
        fmt2(x - 6.0),
        fmt2(y - 6.0),
        fmt2(x + 6.0),
        fmt2(y + 6.0),
        fmt2(x - 6.0),
        fmt2(y + 6.0),
        fmt2(x + 6.0),
        fmt2(y - 6.0)
    )
}

/// Deployment plot: region frame and ticks (`axes`), a legend, and a `data`
/// group with exactly one primitive per tx AP, rx AP, UE and trajectory
/// sample plus the trajectory circle.
pub fn deployment_svg(
    region: &Region,
    deployment: &Deployment,
    ues: &[Point2D],
    trajectory: &CircularTrajectory,
    trajectory_points: &[Point2D],
    title: &str,
) -> String {
    let c = Canvas::new(region);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#,
        size = SVG_SIZE
    )
    .unwrap();
    s.push_str(
        "<style>.frame{fill:none;stroke:#333;stroke-width:1.5}.tick{font:11px sans-serif;fill:#333}\
.traj{fill:none;stroke:#888;stroke-dasharray:4 3}.sample{fill:#888}.tx{fill:#d62728}\
.rx{fill:#1f77b4}.ue{stroke:#2ca02c;stroke-width:2.5;fill:none}.label{font:12px sans-serif}</style>\n",
    );
    writeln!(s, r#"<text class="label" x="{}" y="20">{}</text>"#, SVG_MARGIN, escape(title)).unwrap();

    s.push_str("<g id=\"axes\">\n");
    let (x0, y0) = c.map(Point2D::new(region.x_min, region.y_max));
    let (x1, y1) = c.map(Point2D::new(region.x_max, region.y_min));
    writeln!(
        s,
        r#"<rect class="frame" x="{}" y="{}" width="{}" height="{}"/>"#,
        fmt2(x0),
        fmt2(y0),
        fmt2(x1 - x0),
        fmt2(y1 - y0)
    )
    .unwrap();
    for (value, (px, _)) in [region.x_min, region.x_max].map(|v| (v, c.map(Point2D::new(v, region.y_min)))) {
        writeln!(s, r#"<text class="tick" x="{}" y="{}">{value}</text>"#, fmt2(px - 8.0), fmt2(y1 + 16.0)).unwrap();
    }
    for (value, (_, py)) in [region.y_min, region.y_max].map(|v| (v, c.map(Point2D::new(region.x_min, v)))) {
        writeln!(s, r#"<text class="tick" x="{}" y="{}">{value}</text>"#, fmt2(x0 - 40.0), fmt2(py + 4.0)).unwrap();
    }
    s.push_str("</g>\n");

    s.push_str("<g id=\"data\">\n");
    let (cx, cy) = c.map(trajectory.center);
    writeln!(
        s,
        r#"<circle class="traj" cx="{}" cy="{}" r="{}"/>"#,
        fmt2(cx),
        fmt2(cy),
        fmt2(trajectory.radius * c.scale)
    )
    .unwrap();
    for p in trajectory_points {
        let (x, y) = c.map(*p);
        writeln!(s, r#"<circle class="sample" cx="{}" cy="{}" r="2.5"/>"#, fmt2(x), fmt2(y)).unwrap();
    }
    for u in ues {
        let (x, y) = c.map(*u);
        writeln!(s, "{}", ue_glyph(x, y, "ue")).unwrap();
    }
    for t in &deployment.tx {
        let (x, y) = c.map(*t);
        writeln!(s, "{}", tx_glyph(x, y, "tx")).unwrap();
    }
    for r in &deployment.rx {
        let (x, y) = c.map(*r);
        writeln!(s, "{}", rx_glyph(x, y, "rx")).unwrap();
    }
    s.push_str("</g>\n");

    let lx = SVG_SIZE - 150.0;
    s.push_str("<g id=\"legend\">\n");
    for (i, (label, glyph)) in [
        ("transmit AP", tx_glyph(lx, 40.0, "tx")),
        ("receive AP", rx_glyph(lx, 58.0, "rx")),
        ("UE", ue_glyph(lx, 76.0, "ue")),
    ]
    .into_iter()
    .enumerate()
    {
        writeln!(s, "{glyph}").unwrap();
        writeln!(s, r#"<text class="label" x="{}" y="{}">{label}</text>"#, fmt2(lx + 14.0), 44.0 + 18.0 * i as f64)
            .unwrap();
    }
    s.push_str("</g>\n</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

//! Static SVG line charts of a trace: per-cell SoC, per-cell terminal voltage
//! and the balancer's connected cell.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::trace::SimTrace;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
/// Charts thin long series to about this many points.
const MAX_POINTS: usize = 2000;

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#ad494a",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Draw horizontal-then-vertical steps instead of straight segments.
    pub steps: bool,
}

impl LineChart {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let pts = self.series.iter().flat_map(|s| s.points.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 <= 0.0 {
            x1 = x0 + 1.0;
        }
        let pad = if y1 - y0 > 0.0 { 0.05 * (y1 - y0) } else { 0.5 * y0.abs().max(1e-3) };
        (x0, x1, y0 - pad, y1 + pad)
    }

    pub fn to_svg(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let pw = WIDTH - MARGIN_L - MARGIN_R;
        let ph = HEIGHT - MARGIN_T - MARGIN_B;
        let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| MARGIN_T + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            MARGIN_L + pw / 2.0,
            escape(&self.title)
        )
        .unwrap();

        for y in ticks(y0, y1) {
            let py = sy(y);
            writeln!(
                s,
                r##"<line x1="{MARGIN_L}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/>"##,
                MARGIN_L + pw
            )
            .unwrap();
            writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                MARGIN_L - 6.0,
                py + 4.0,
                label(y, y1 - y0)
            )
            .unwrap();
        }
        for x in ticks(x0, x1) {
            writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                sx(x),
                MARGIN_T + ph + 18.0,
                label(x, x1 - x0)
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN_L + pw / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            MARGIN_T + ph / 2.0,
            escape(&self.y_label)
        )
        .unwrap();

        for (k, series) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let mut d = String::new();
            let mut prev: Option<f64> = None;
            for (j, &(x, y)) in thin(&series.points).iter().enumerate() {
                let (px, py) = (sx(x), sy(y));
                if j == 0 {
                    write!(d, "M{px:.2},{py:.2}").unwrap();
                } else {
                    if self.steps {
                        if let Some(p) = prev {
                            write!(d, " L{px:.2},{p:.2}").unwrap();
                        }
                    }
                    write!(d, " L{px:.2},{py:.2}").unwrap();
                }
                prev = Some(py);
            }
            writeln!(
                s,
                r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.2"/>"#
            )
            .unwrap();
            let ly = MARGIN_T + 14.0 * k as f64 + 8.0;
            let lx = MARGIN_L + pw + 12.0;
            writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                lx + 18.0,
                lx + 24.0,
                ly + 4.0,
                escape(&series.name)
            )
            .unwrap();
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_svg()).map_err(|e| Error::io(path, e))
    }
}

fn thin(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(MAX_POINTS);
    let mut out: Vec<(f64, f64)> = points.iter().step_by(stride).copied().collect();
    if let Some(&last) = points.last() {
        if out.last() != Some(&last) {
            out.push(last);
        }
    }
    out
}

fn tick_step(span: f64) -> f64 {
    let raw = span / 8.0;
    let mag = 10f64.powf(raw.log10().floor());
    let unit = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .find(|u| u * mag >= raw)
        .unwrap_or(10.0);
    unit * mag
}

/// Round-number ticks inside `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = tick_step(hi - lo);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64, span: f64) -> String {
    let decimals = (-tick_step(span).log10().floor()).max(0.0) as usize;
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn per_cell(trace: &SimTrace, value: impl Fn(usize, usize) -> f64) -> Vec<Series> {
    (0..trace.n_cells())
        .map(|k| Series {
            name: trace.cell_index(k).label(trace.cells_per_string),
            points: trace
                .rows
                .iter()
                .enumerate()
                .map(|(r, row)| (row.time / 3600.0, value(r, k)))
                .collect(),
        })
        .collect()
}

pub fn soc_chart(trace: &SimTrace) -> LineChart {
    LineChart {
        title: "Cell state of charge".into(),
        x_label: "time (h)".into(),
        y_label: "SoC (%)".into(),
        series: per_cell(trace, |r, k| 100.0 * trace.rows[r].z[k]),
        steps: false,
    }
}

pub fn voltage_chart(trace: &SimTrace) -> LineChart {
    LineChart {
        title: "Cell terminal voltage".into(),
        x_label: "time (h)".into(),
        y_label: "voltage (V)".into(),
        series: per_cell(trace, |r, k| trace.rows[r].v[k]),
        steps: false,
    }
}

/// Connected cell number over time, 0 while the balancer is idle, plus the
/// capacitor voltage.
pub fn switching_chart(trace: &SimTrace) -> LineChart {
    let m = trace.cells_per_string;
    let target = trace
        .rows
        .iter()
        .map(|r| {
            let n = r.target.map_or(0.0, |c| (c.string * m + c.pos + 1) as f64);
            (r.time / 3600.0, n)
        })
        .collect();
    let v_cap = trace.rows.iter().map(|r| (r.time / 3600.0, r.v_cap)).collect();
    LineChart {
        title: "Balancer switching".into(),
        x_label: "time (h)".into(),
        y_label: "connected cell / capacitor V".into(),
        series: vec![
            Series {
                name: "cell".into(),
                points: target,
            },
            Series {
                name: "v_cap (V)".into(),
                points: v_cap,
            },
        ],
        steps: true,
    }
}

/// Writes `soc.svg`, `voltage.svg` and `switching.svg` into `dir`.
pub fn write_all(trace: &SimTrace, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    soc_chart(trace).write(dir.join("soc.svg"))?;
    voltage_chart(trace).write(dir.join("voltage.svg"))?;
    switching_chart(trace).write(dir.join("switching.svg"))
}

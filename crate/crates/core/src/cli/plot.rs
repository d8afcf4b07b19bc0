//! Self-contained SVG of a predictions file: observations, mean curve and
//! nested `Z ± {1, 2, 3}·√Var` bands.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Which column the horizontal axis shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Abscissa {
    /// The single input feature.
    Feature,
    /// The observed target; used for multi-feature data.
    Target,
}

/// Reads `x|row_id, y, z_mean, z_var` rows.
pub fn read_predictions(path: impl AsRef<Path>, abscissa: Abscissa) -> Result<Vec<PlotPoint>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Schema(format!(
                "{} lacks column '{name}'; found: {}",
                path.display(),
                headers.join(", ")
            ))
        })
    };
    let (iy, im, iv) = (col("y")?, col("z_mean")?, col("z_var")?);
    let ix = match (headers.first().map(String::as_str), abscissa) {
        (Some("x"), _) => Some(0),
        (_, Abscissa::Target) => None,
        _ => {
            return Err(Error::Schema(format!(
                "plot is 1-D only: {} has no single feature column 'x' (multi-feature data carries row ids); \
                 use --against-target to plot predictions against the observed target",
                path.display()
            )))
        }
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("").trim();
            s.parse::<f64>()
                .map_err(|_| Error::Schema(format!("non-numeric value '{s}' in {}", path.display())))
        };
        let y = num(iy)?;
        out.push(PlotPoint {
            x: match (abscissa, ix) {
                (Abscissa::Feature, Some(i)) => num(i)?,
                _ => y,
            },
            y,
            mean: num(im)?,
            variance: num(iv)?,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyData(format!("{} has no prediction rows", path.display())));
    }
    Ok(out)
}

const W: f64 = 800.0;
const H: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let y = y.clamp(self.y0, self.y1);
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = (hi - lo).abs().max(1e-9);
    (lo - 0.05 * span, hi + 0.05 * span)
}

/// Renders the plot. Points with infinite variance get a full-height band and a marker.
pub fn render_svg(points: &[PlotPoint], title: &str, x_label: &str) -> Result<String> {
    if points.is_empty() {
        return Err(Error::EmptyData("no points to plot".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));

    let (mut xlo, mut xhi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &pts {
        xlo = xlo.min(p.x);
        xhi = xhi.max(p.x);
        for v in [p.y, p.mean] {
            if v.is_finite() {
                ylo = ylo.min(v);
                yhi = yhi.max(v);
            }
        }
    }
    if !(ylo.is_finite() && xlo.is_finite()) {
        return Err(Error::EmptyData("no finite values to plot".into()));
    }
    // Bands may widen the view, but by at most one data span either way.
    let span = (yhi - ylo).max(1e-9);
    for p in &pts {
        let sd = p.variance.sqrt();
        if sd.is_finite() {
            ylo = ylo.min((p.mean - 3.0 * sd).max(ylo - span));
            yhi = yhi.max((p.mean + 3.0 * sd).min(yhi + span));
        }
    }
    let (x0, x1) = padded(xlo, xhi);
    let (y0, y1) = padded(ylo, yhi);
    let f = Frame { x0, x1, y0, y1 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        escape(title)
    );

    for (i, d) in [3.0, 2.0, 1.0].iter().enumerate() {
        let mut upper = Vec::with_capacity(pts.len());
        let mut lower = Vec::with_capacity(pts.len());
        for p in &pts {
            let sd = p.variance.sqrt();
            let (lo, hi) = if sd.is_finite() {
                (p.mean - d * sd, p.mean + d * sd)
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            };
            upper.push(format!("{:.2},{:.2}", f.px(p.x), f.py(hi)));
            lower.push(format!("{:.2},{:.2}", f.px(p.x), f.py(lo)));
        }
        lower.reverse();
        upper.extend(lower);
        let _ = writeln!(
            s,
            r#"<polygon class="band band-{}" points="{}" fill="steelblue" fill-opacity="{}" stroke="none"/>"#,
            3 - i,
            upper.join(" "),
            [0.15, 0.2, 0.3][i]
        );
    }

    let inf: Vec<&PlotPoint> = pts.iter().filter(|p| !p.variance.is_finite()).collect();
    for p in &inf {
        let x = f.px(p.x);
        let _ = writeln!(
            s,
            r#"<g class="inf-var"><line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{}" stroke="crimson" stroke-dasharray="3,3" stroke-width="0.8"/><path d="M{:.2},{} l-4,-8 h8 z" fill="crimson"/></g>"#,
            H - BOTTOM,
            x,
            TOP
        );
    }

    for p in &pts {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="black" fill-opacity="0.6"/>"#,
            f.px(p.x),
            f.py(p.y)
        );
    }
    let mean_path: Vec<String> = pts
        .iter()
        .filter(|p| p.mean.is_finite())
        .map(|p| format!("{:.2},{:.2}", f.px(p.x), f.py(p.mean)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline class="mean" points="{}" fill="none" stroke="darkorange" stroke-width="2"/>"#,
        mean_path.join(" ")
    );

    axes(&mut s, &f, x_label);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">mean Z, bands Z ± 1, 2, 3 sd; {} infinite-variance point(s)</text>"#,
        W - RIGHT,
        TOP - 6.0,
        inf.len()
    );
    s.push_str("</svg>\n");
    Ok(s)
}

fn axes(s: &mut String, f: &Frame, x_label: &str) {
    let (l, r, t, b) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        s,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    for i in 0..=5 {
        let fx = f.x0 + (f.x1 - f.x0) * i as f64 / 5.0;
        let fy = f.y0 + (f.y1 - f.y0) * i as f64 / 5.0;
        let (px, py) = (f.px(fx), f.py(fy));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            b + 5.0,
            b + 18.0,
            tick(fx)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{py:.2}" x2="{l}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            l - 5.0,
            l - 8.0,
            py + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (l + r) / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">y</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, var: f64) -> PlotPoint {
        PlotPoint {
            x,
            y: x * x,
            mean: x * x,
            variance: var,
        }
    }

    #[test]
    fn three_nested_bands() {
        let pts: Vec<_> = (0..20).map(|i| pt(i as f64 * 0.1, 0.04)).collect();
        let svg = render_svg(&pts, "t", "x").unwrap();
        for b in ["band-1", "band-2", "band-3"] {
            assert_eq!(svg.matches(b).count(), 1);
        }
        assert!(!svg.contains("inf-var"));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn infinite_variance_markers() {
        let pts = vec![pt(0.0, 0.1), pt(1.0, f64::INFINITY), pt(2.0, 0.1)];
        let svg = render_svg(&pts, "t", "x").unwrap();
        assert_eq!(svg.matches("class=\"inf-var\"").count(), 1);
        assert!(svg.contains("1 infinite-variance"));
    }

    #[test]
    fn empty_is_rejected() {
        assert!(matches!(render_svg(&[], "t", "x"), Err(Error::EmptyData(_))));
    }

    #[test]
    fn escapes_title() {
        let svg = render_svg(&[pt(0.0, 1.0), pt(1.0, 1.0)], "a<b & c", "x").unwrap();
        assert!(svg.contains("a&lt;b &amp; c"));
    }
}

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::run::read_trace;
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Seed-averaged learning curve of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub agent: String,
    /// `(step, mean j_true)` sorted by step.
    pub points: Vec<(u64, f64)>,
}

/// Groups traces by their `agent` setting and averages `j_true` per step.
pub fn average_curves(paths: &[impl AsRef<Path>]) -> Result<Vec<Curve>> {
    let mut groups: BTreeMap<String, BTreeMap<u64, (f64, usize)>> = BTreeMap::new();
    for path in paths {
        let path = path.as_ref();
        let trace = read_trace(path)?;
        let agent = trace
            .setting("agent")
            .map(str::to_string)
            .unwrap_or_else(|| path.file_stem().map_or("trace".into(), |s| s.to_string_lossy().into_owned()));
        let group = groups.entry(agent).or_default();
        for row in &trace.rows {
            let e = group.entry(row.step).or_insert((0.0, 0));
            e.0 += row.j_true;
            e.1 += 1;
        }
    }
    Ok(groups
        .into_iter()
        .map(|(agent, pts)| Curve {
            agent,
            points: pts.into_iter().map(|(step, (sum, n))| (step, sum / n as f64)).collect(),
        })
        .collect())
}

/// SVG with one polyline per curve. The y-range always contains zero, so an
/// all-zero curve sits on the bottom axis.
pub fn render_svg(curves: &[Curve]) -> String {
    let pts = curves.iter().flat_map(|c| c.points.iter());
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (u64::MAX, 0u64, 0.0f64, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        if y.is_finite() {
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
    }
    if x_lo > x_hi {
        (x_lo, x_hi) = (0, 1);
    }
    if x_hi == x_lo {
        x_hi = x_lo + 1;
    }
    if !(y_hi > y_lo) {
        y_hi = y_lo + 1.0;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: u64| LEFT + (x - x_lo) as f64 / (x_hi - x_lo) as f64 * plot_w;
    let sy = |y: f64| TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, y0, x1, y1) = (LEFT, TOP + plot_h, LEFT + plot_w, TOP);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for k in 0..=4 {
        let fx = k as f64 / 4.0;
        let xv = x_lo as f64 + fx * (x_hi - x_lo) as f64;
        let px = LEFT + fx * plot_w;
        let _ = writeln!(svg, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{xv:.0}</text>"#, y0 + 16.0);
        let yv = y_lo + fx * (y_hi - y_lo);
        let py = sy(yv);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{py:.1}" text-anchor="end" dy="4">{yv:.3}</text>"#, x0 - 6.0);
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">step</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">j_true</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for (i, curve) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = curve
            .points
            .iter()
            .filter(|(_, y)| y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline data-agent="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            curve.agent,
            points.join(" ")
        );
        let ly = TOP + 16.0 * (i as f64 + 1.0);
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{ly}" dy="4">{}</text>"#, lx + 26.0, curve.agent);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Reads trace CSVs, averages seeds per agent and writes an SVG to `out`.
pub fn emit_plot(paths: &[impl AsRef<Path>], out: &Path) -> Result<()> {
    if paths.is_empty() {
        return Err(Error::config("plot", "no trace files given"));
    }
    let svg = render_svg(&average_curves(paths)?);
    fs::write(out, svg).map_err(|e| Error::io(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polyline_points(svg: &str) -> Vec<(f64, f64)> {
        let start = svg.find("points=\"").unwrap() + 8;
        let end = start + svg[start..].find('"').unwrap();
        svg[start..end]
            .split(' ')
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect()
    }

    #[test]
    fn zero_curve_sits_on_baseline() {
        let curve = Curve {
            agent: "flat".into(),
            points: vec![(0, 0.0), (50, 0.0), (100, 0.0)],
        };
        let svg = render_svg(&[curve]);
        let baseline = TOP + (HEIGHT - TOP - BOTTOM);
        for (_, y) in polyline_points(&svg) {
            assert!((y - baseline).abs() < 1e-9);
        }
        assert!(svg.contains(">step<") && svg.contains(">j_true<"));
    }

    #[test]
    fn averages_over_seeds() {
        let dir = tempfile::tempdir().unwrap();
        let columns = super::super::run::TRACE_COLUMNS;
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        fs::write(&a, format!("# agent=x\n{columns}\n0,0.0,0,0,0\n10,1.0,0,0,0\n")).unwrap();
        fs::write(&b, format!("# agent=x\n{columns}\n0,0.5,0,0,1\n10,0.0,0,0,1\n")).unwrap();
        let curves = average_curves(&[a, b]).unwrap();
        assert_eq!(curves.len(), 1);
        assert_eq!(curves[0].points, vec![(0, 0.25), (10, 0.5)]);
    }

    #[test]
    fn one_polyline_per_agent() {
        let curves = vec![
            Curve { agent: "a".into(), points: vec![(0, 0.1), (1, 0.2)] },
            Curve { agent: "b".into(), points: vec![(0, 0.3), (1, 0.4)] },
        ];
        assert_eq!(render_svg(&curves).matches("<polyline").count(), 2);
    }
}

//! Self-contained SVG rendering of experiment results: a log-log scatter of
//! every statistic in `results.csv`, overlaid with the fitted scaling curves
//! from `fit.json` (solid) and, where a closed-form prediction exists, the
//! predicted slope through the same anchor point (dashed). Styles are
//! inline; the file has no external references.

use ksrg_core::{Error, ExperimentRow, ScalingFit};
use std::fmt::Write as _;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 540.0;
const PX0: f64 = 80.0; // plot box
const PX1: f64 = 530.0;
const PY0: f64 = 40.0;
const PY1: f64 = 480.0;

#[derive(Clone, Copy)]
enum XTransform {
    LogN,
    LogLogN,
    Pow(f64),
}

#[derive(Clone, Copy)]
enum YTransform {
    Log,
    LogNegLog,
}

fn parse_x_transform(name: &str) -> Option<XTransform> {
    match name {
        "log n" => Some(XTransform::LogN),
        "log log n" => Some(XTransform::LogLogN),
        _ => name.strip_prefix("k^").and_then(|s| s.parse::<f64>().ok()).map(XTransform::Pow),
    }
}

fn parse_y_transform(name: &str) -> Option<YTransform> {
    match name {
        "log" => Some(YTransform::Log),
        "log(-log)" => Some(YTransform::LogNegLog),
        _ => None,
    }
}

fn apply_x(t: XTransform, x: f64) -> Option<f64> {
    match t {
        XTransform::LogN => (x > 0.0).then(|| x.ln()),
        XTransform::LogLogN => (x > 1.0).then(|| x.ln().ln()),
        XTransform::Pow(p) => Some(x.powf(p)),
    }
}

fn invert_y(t: YTransform, y_transformed: f64) -> f64 {
    match t {
        YTransform::Log => y_transformed.exp(),
        YTransform::LogNegLog => (-y_transformed.exp()).exp(),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Decade label: `1e3` for integer exponents, `1e2.50` otherwise.
fn tick_label(exp10: f64) -> String {
    if (exp10 - exp10.round()).abs() < 1e-9 {
        format!("1e{}", exp10.round() as i64)
    } else {
        format!("1e{exp10:.2}")
    }
}

struct Series<'a> {
    name: &'a str,
    color: &'static str,
    /// (log10 n, log10 value) of plottable rows.
    points: Vec<(f64, f64)>,
    /// (log10 n, log10 ci_low?, log10 ci_high?) for error bars.
    bars: Vec<(f64, Option<f64>, Option<f64>)>,
    /// Raw n range, for fit-curve sampling.
    n_range: (f64, f64),
}

/// Render rows and fits to an SVG document.
pub fn render(rows: &[ExperimentRow], fits: &[ScalingFit]) -> Result<String, Error> {
    let mut series: Vec<Series> = Vec::new();
    for row in rows {
        let idx = match series.iter().position(|s| s.name == row.statistic) {
            Some(i) => i,
            None => {
                series.push(Series {
                    name: &row.statistic,
                    color: PALETTE[series.len() % PALETTE.len()],
                    points: Vec::new(),
                    bars: Vec::new(),
                    n_range: (f64::INFINITY, f64::NEG_INFINITY),
                });
                series.len() - 1
            }
        };
        let s = &mut series[idx];
        if row.n > 0.0 && row.value > 0.0 {
            s.points.push((row.n.log10(), row.value.log10()));
            s.bars.push((
                row.n.log10(),
                (row.ci_low > 0.0).then(|| row.ci_low.log10()),
                (row.ci_high > 0.0).then(|| row.ci_high.log10()),
            ));
            s.n_range.0 = s.n_range.0.min(row.n);
            s.n_range.1 = s.n_range.1.max(row.n);
        }
    }
    series.retain(|s| !s.points.is_empty());
    if series.is_empty() {
        return Err(Error::RejectDomain(
            "no rows with positive value to place on log-log axes".into(),
        ));
    }

    // Axis ranges over points and drawable error bars, padded 5%.
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in &series {
        for &(x, y) in &s.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
        for &(_, lo, hi) in &s.bars {
            if let Some(lo) = lo {
                y_min = y_min.min(lo);
            }
            if let Some(hi) = hi {
                y_max = y_max.max(hi);
            }
        }
    }
    let pad = |a: f64, b: f64| {
        let span = b - a;
        if span <= 0.0 {
            (a - 0.5, b + 0.5)
        } else {
            (a - 0.05 * span, b + 0.05 * span)
        }
    };
    let (x_min, x_max) = pad(x_min, x_max);
    let (y_min, y_max) = pad(y_min, y_max);
    let sx = |t: f64| PX0 + (t - x_min) / (x_max - x_min) * (PX1 - PX0);
    let sy = |t: f64| PY1 - (t - y_min) / (y_max - y_min) * (PY1 - PY0);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"##
    );
    let _ = writeln!(svg, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"##);

    // Gridlines and tick labels at integer decades (fallback: range ends).
    let decades = |a: f64, b: f64| -> Vec<f64> {
        let lo = a.ceil() as i64;
        let hi = b.floor() as i64;
        if lo <= hi {
            (lo..=hi).map(|k| k as f64).collect()
        } else {
            vec![a, b]
        }
    };
    for t in decades(x_min, x_max) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{PY0}" x2="{x:.2}" y2="{PY1}" stroke="#ddd" stroke-width="1"/>"##
        );
        let _ = writeln!(
            svg,
            r##"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle" fill="#333">{}</text>"##,
            PY1 + 18.0,
            tick_label(t)
        );
    }
    for t in decades(y_min, y_max) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{PX0}" y1="{y:.2}" x2="{PX1}" y2="{y:.2}" stroke="#ddd" stroke-width="1"/>"##
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end" fill="#333">{}</text>"##,
            PX0 - 6.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        svg,
        r##"<rect x="{PX0}" y="{PY0}" width="{:.2}" height="{:.2}" fill="none" stroke="#333" stroke-width="1"/>"##,
        PX1 - PX0,
        PY1 - PY0
    );
    // Axis labels.
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="14" text-anchor="middle" fill="#111">n (log scale)</text>"##,
        (PX0 + PX1) / 2.0,
        PY1 + 42.0
    );
    let _ = writeln!(
        svg,
        r##"<text x="20" y="{:.2}" font-family="sans-serif" font-size="14" text-anchor="middle" fill="#111" transform="rotate(-90 20 {:.2})">value (log scale)</text>"##,
        (PY0 + PY1) / 2.0,
        (PY0 + PY1) / 2.0
    );

    // Fit curves: solid for the fitted slope, dashed for the predicted one.
    for (fi, fit) in fits.iter().enumerate() {
        let (Some(xt), Some(yt)) =
            (parse_x_transform(&fit.x_transform), parse_y_transform(&fit.y_transform))
        else {
            continue;
        };
        let host = series.iter().find(|s| s.name == fit.statistic);
        let (n_lo, n_hi) = match host {
            Some(s) => s.n_range,
            None => continue,
        };
        let color = host.map(|s| s.color).unwrap_or(PALETTE[fi % PALETTE.len()]);
        let n_lo = match xt {
            XTransform::LogLogN => n_lo.max(1.05),
            _ => n_lo,
        };
        if !(n_hi > n_lo) {
            continue;
        }
        let curve = |slope: f64, intercept: f64| -> String {
            let mut pts = String::new();
            for i in 0..=63 {
                let frac = i as f64 / 63.0;
                // Geometric sweep across the data's n range.
                let n = n_lo * (n_hi / n_lo).powf(frac);
                let Some(u) = apply_x(xt, n) else { continue };
                let value = invert_y(yt, intercept + slope * u);
                if !(value.is_finite() && value > 0.0) {
                    continue;
                }
                let (px, py) = (sx(n.log10()), sy(value.log10()));
                if !(px.is_finite() && py.is_finite()) {
                    continue;
                }
                let _ = write!(pts, "{px:.2},{py:.2} ");
            }
            pts
        };
        let solid = curve(fit.slope, fit.intercept);
        if !solid.is_empty() {
            let _ = writeln!(
                svg,
                r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"##,
                solid.trim_end()
            );
        }
        if let Some(pred) = fit.predicted_slope {
            // Anchor the predicted-slope line to the fitted curve's midpoint.
            let n_mid = (n_lo * n_hi).sqrt();
            if let Some(u_mid) = apply_x(xt, n_mid) {
                let intercept_p = fit.intercept + (fit.slope - pred) * u_mid;
                let dashed = curve(pred, intercept_p);
                if !dashed.is_empty() {
                    let _ = writeln!(
                        svg,
                        r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5" stroke-dasharray="6 4" opacity="0.85"/>"##,
                        dashed.trim_end()
                    );
                }
            }
        }
    }

    // Data: error bars under points.
    for s in &series {
        for &(x, lo, hi) in &s.bars {
            let (Some(lo), Some(hi)) = (lo, hi) else { continue };
            let px = sx(x);
            let (y1, y2) = (sy(hi.min(y_max)), sy(lo.max(y_min)));
            let _ = writeln!(
                svg,
                r##"<line x1="{px:.2}" y1="{y1:.2}" x2="{px:.2}" y2="{y2:.2}" stroke="{}" stroke-width="1" opacity="0.6"/>"##,
                s.color
            );
        }
        for &(x, y) in &s.points {
            let _ = writeln!(
                svg,
                r##"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}"/>"##,
                sx(x),
                sy(y),
                s.color
            );
        }
    }

    // Legend: series swatches, then fit annotations.
    let mut ly = PY0 + 10.0;
    let lx = PX1 + 16.0;
    for s in &series {
        let _ = writeln!(
            svg,
            r##"<rect x="{lx:.2}" y="{:.2}" width="10" height="10" fill="{}"/>"##,
            ly - 9.0,
            s.color
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{ly:.2}" font-family="sans-serif" font-size="12" fill="#111">{}</text>"##,
            lx + 16.0,
            escape(s.name)
        );
        ly += 18.0;
    }
    for fit in fits {
        ly += 8.0;
        let lines = [
            format!("fit of {}", fit.statistic),
            format!("slope = {:.6}", fit.slope),
            match fit.predicted_slope {
                Some(p) => format!("predicted = {p:.6}"),
                None => "predicted = (none)".to_string(),
            },
            format!("r2 = {:.4}", fit.r2),
        ];
        for line in lines {
            let _ = writeln!(
                svg,
                r##"<text x="{lx:.2}" y="{ly:.2}" font-family="sans-serif" font-size="12" fill="#333">{}</text>"##,
                escape(&line)
            );
            ly += 16.0;
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: f64, stat: &str, value: f64) -> ExperimentRow {
        ExperimentRow {
            n,
            statistic: stat.to_string(),
            value,
            ci_low: value * 0.9,
            ci_high: value * 1.1,
            replicates: 50,
        }
    }

    #[test]
    fn collinear_points_render_with_annotated_slope() {
        // y = 2 * x^(-1/2): exactly collinear in log-log coordinates.
        let rows = vec![
            row(100.0, "s", 0.2),
            row(10_000.0, "s", 0.02),
            row(1_000_000.0, "s", 0.002),
        ];
        let fit = ScalingFit {
            statistic: "s".into(),
            x_transform: "log n".into(),
            y_transform: "log".into(),
            slope: -0.5,
            intercept: 2.0f64.ln(),
            r2: 1.0,
            stderr_slope: 0.0,
            predicted_slope: Some(-0.5),
            points: rows.iter().map(|r| (r.n.ln(), r.value.ln())).collect(),
        };
        let svg = render(&rows, &[fit]).unwrap();
        assert!(svg.starts_with("<svg "));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("slope = -0.500000"), "annotated fitted slope");
        assert!(svg.contains("predicted = -0.500000"), "annotated predicted slope");
        // One solid fitted line, one dashed predicted line.
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("stroke-dasharray"));
        // Decade gridlines span 1e2..1e6.
        assert!(svg.contains(">1e2<") && svg.contains(">1e6<"));
    }

    #[test]
    fn doubly_logarithmic_fits_draw_curves() {
        let rows = vec![row(4.0, "f", 0.135), row(16.0, "f", 0.018), row(64.0, "f", 0.002)];
        let fit = ScalingFit {
            statistic: "f".into(),
            x_transform: "log n".into(),
            y_transform: "log(-log)".into(),
            slope: 0.5,
            intercept: 0.0,
            r2: 0.99,
            stderr_slope: 0.01,
            predicted_slope: None,
            points: vec![],
        };
        let svg = render(&rows, &[fit]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1, "no predicted slope, no dashed line");
        assert!(svg.contains("predicted = (none)"));
    }

    #[test]
    fn power_transform_names_are_reconstructed() {
        let rows = vec![row(8.0, "c", 0.5), row(16.0, "c", 0.2), row(32.0, "c", 0.05)];
        let fit = ScalingFit {
            statistic: "c".into(),
            x_transform: "k^0.4".into(),
            y_transform: "log".into(),
            slope: -1.1,
            intercept: 0.3,
            r2: 0.98,
            stderr_slope: 0.05,
            predicted_slope: None,
            points: vec![],
        };
        let svg = render(&rows, &[fit.clone()]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);

        // Unknown transform names: fit skipped, scatter still rendered.
        let fit2 = ScalingFit { x_transform: "mystery".into(), ..fit };
        let svg = render(&rows, &[fit2]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn all_nonpositive_values_is_an_error() {
        let rows = vec![row(100.0, "s", 0.0)];
        assert!(render(&rows, &[]).is_err());
    }
}

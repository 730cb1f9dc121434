//! Plot-data artifacts: CSV tables for curve overlays, eigenvalue scatter and
//! the bootstrap histogram, plus small static SVG renderings of the same.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::fitting::{model_eval, ExponentialFit};
use crate::protocol::DecayCurve;
use crate::report::FidelityReport;

fn fitted_value(fit: &ExponentialFit, l: u32) -> f64 {
    model_eval(&fit.terms, l).unwrap_or(f64::NAN)
}

/// Observed vs fitted curve values, one row per (pair, depth).
pub fn curves_csv(
    curves: &[DecayCurve],
    fits: &[ExponentialFit],
    baseline_fits: Option<&[ExponentialFit]>,
) -> String {
    let mut out = String::new();
    out.push_str("a,b,L,p_hat,fitted");
    if baseline_fits.is_some() {
        out.push_str(",baseline_fitted");
    }
    out.push('\n');
    for (i, curve) in curves.iter().enumerate() {
        for (&l, &p) in curve.depths.iter().zip(curve.p_hat.iter()) {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                curve.a,
                curve.b,
                l,
                p,
                fitted_value(&fits[i], l)
            );
            if let Some(mp) = baseline_fits {
                let _ = write!(out, ",{}", fitted_value(&mp[i], l));
            }
            out.push('\n');
        }
    }
    out
}

/// Filtered eigenvalues in polar form, one row per fitted term.
pub fn eigenvalues_csv(report: &FidelityReport) -> String {
    let mut out = String::from(
        "a,b,radius,phase,z_re,z_im,f_abs,lambda_e_re,lambda_e_im,assigned_phase,kept,rejection\n",
    );
    for e in &report.eigenvalues {
        let z = num_complex::Complex::new(e.z[0], e.z[1]);
        let f = num_complex::Complex::new(e.f[0], e.f[1]);
        let ideal = num_complex::Complex::new(e.assigned_ideal[0], e.assigned_ideal[1]);
        let rejection = serde_json::to_value(e.rejection)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            e.a,
            e.b,
            z.norm(),
            z.arg(),
            e.z[0],
            e.z[1],
            f.norm(),
            e.lambda_e[0],
            e.lambda_e[1],
            ideal.arg(),
            e.kept,
            rejection
        );
    }
    out
}

/// Binned histogram of the bootstrap fidelity samples.
pub fn histogram_csv(samples: &[f64], bins: usize) -> String {
    let mut out = String::from("bin_low,bin_high,count\n");
    if samples.is_empty() || bins == 0 {
        return out;
    }
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(1e-12);
    let mut counts = vec![0usize; bins];
    for &s in samples {
        let idx = (((s - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    for (i, &count) in counts.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{}",
            lo + i as f64 * width,
            lo + (i + 1) as f64 * width,
            count
        );
    }
    out
}

// --- SVG rendering ---------------------------------------------------------

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 420.0;
const MARGIN: f64 = 48.0;

fn svg_open(out: &mut String) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" \
         viewBox=\"0 0 {SVG_W} {SVG_H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>\n"
    );
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str, width: f64, dashed: bool) {
    if pts.is_empty() {
        return;
    }
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let dash = if dashed { " stroke-dasharray=\"5,3\"" } else { "" };
    let _ = writeln!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"{dash}/>",
        coords.join(" ")
    );
}

fn text(out: &mut String, x: f64, y: f64, s: &str) {
    let _ = writeln!(out, "<text x=\"{x:.1}\" y=\"{y:.1}\" fill=\"#333\">{s}</text>");
}

/// Observed data and fitted model for the least and most oscillatory curves.
pub fn curves_svg(curves: &[DecayCurve], fits: &[ExponentialFit]) -> String {
    let mut out = String::new();
    svg_open(&mut out);
    if curves.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let variation = |c: &DecayCurve| -> f64 {
        c.p_hat.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>()
    };
    let smooth = (0..curves.len())
        .min_by(|&i, &j| variation(&curves[i]).partial_cmp(&variation(&curves[j])).unwrap())
        .unwrap();
    let wavy = (0..curves.len())
        .max_by(|&i, &j| variation(&curves[i]).partial_cmp(&variation(&curves[j])).unwrap())
        .unwrap();
    let l_max = curves[smooth].depths.last().copied().unwrap_or(1).max(1) as f64;
    let sx = |l: f64| MARGIN + (SVG_W - 2.0 * MARGIN) * l / l_max;
    let sy = |p: f64| SVG_H - MARGIN - (SVG_H - 2.0 * MARGIN) * p.clamp(0.0, 1.05);

    polyline(
        &mut out,
        &[(MARGIN, sy(0.0)), (SVG_W - MARGIN, sy(0.0))],
        "#999",
        1.0,
        false,
    );
    polyline(&mut out, &[(MARGIN, sy(0.0)), (MARGIN, sy(1.0))], "#999", 1.0, false);
    text(&mut out, SVG_W / 2.0 - 10.0, SVG_H - 12.0, "L");
    text(&mut out, 8.0, MARGIN, "P(L)");

    for (idx, color) in [(smooth, "#e08a2e"), (wavy, "#2e6be0")] {
        let curve = &curves[idx];
        let data: Vec<(f64, f64)> = curve
            .depths
            .iter()
            .zip(curve.p_hat.iter())
            .map(|(&l, &p)| (sx(l as f64), sy(p)))
            .collect();
        polyline(&mut out, &data, color, 1.2, false);
        let fitted: Vec<(f64, f64)> = curve
            .depths
            .iter()
            .map(|&l| (sx(l as f64), sy(fitted_value(&fits[idx], l))))
            .collect();
        polyline(&mut out, &fitted, color, 1.6, true);
        text(
            &mut out,
            SVG_W - MARGIN - 150.0,
            MARGIN + if idx == smooth { 4.0 } else { 18.0 },
            &format!("pair ({}, {}) data / fit", curve.a, curve.b),
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Polar scatter of fitted eigenvalues with the unit circle for reference.
pub fn eigenvalues_svg(report: &FidelityReport) -> String {
    let mut out = String::new();
    svg_open(&mut out);
    let cx = SVG_W / 2.0;
    let cy = SVG_H / 2.0;
    let r = (SVG_H / 2.0 - MARGIN) / 1.05;
    let _ = writeln!(
        out,
        "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"{r:.1}\" fill=\"none\" stroke=\"#999\"/>"
    );
    polyline(&mut out, &[(cx - r - 12.0, cy), (cx + r + 12.0, cy)], "#ccc", 0.8, false);
    polyline(&mut out, &[(cx, cy - r - 12.0), (cx, cy + r + 12.0)], "#ccc", 0.8, false);
    for e in &report.eigenvalues {
        let x = cx + r * e.z[0];
        let y = cy - r * e.z[1];
        let color = if e.kept { "#1d9641" } else { "#c0392b" };
        let _ = writeln!(
            out,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3.2\" fill=\"{color}\" fill-opacity=\"0.75\"/>"
        );
    }
    text(&mut out, MARGIN, SVG_H - 16.0, "green: kept, red: filtered out");
    out.push_str("</svg>\n");
    out
}

/// Bar histogram of the bootstrap fidelity samples.
pub fn histogram_svg(samples: &[f64], bins: usize) -> String {
    let mut out = String::new();
    svg_open(&mut out);
    if samples.is_empty() || bins == 0 {
        out.push_str("</svg>\n");
        return out;
    }
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(1e-12);
    let mut counts = vec![0usize; bins];
    for &s in samples {
        let idx = (((s - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let peak = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let bw = (SVG_W - 2.0 * MARGIN) / bins as f64;
    for (i, &count) in counts.iter().enumerate() {
        let h = (SVG_H - 2.0 * MARGIN) * count as f64 / peak;
        let x = MARGIN + i as f64 * bw;
        let y = SVG_H - MARGIN - h;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"#2e6be0\" fill-opacity=\"0.8\"/>",
            bw.max(1.0) - 0.5
        );
    }
    text(&mut out, MARGIN, SVG_H - 14.0, &format!("{lo:.4}"));
    text(&mut out, SVG_W - MARGIN - 44.0, SVG_H - 14.0, &format!("{hi:.4}"));
    text(&mut out, MARGIN, MARGIN - 8.0, "bootstrap fidelity estimates");
    out.push_str("</svg>\n");
    out
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::{ExponentialTerm, FitModel, FitStatus};
    use crate::linalg::cr;

    fn sample_fit(a: usize, b: usize) -> ExponentialFit {
        ExponentialFit {
            a,
            b,
            model: FitModel::SixTermOpt,
            terms: vec![ExponentialTerm { z: cr(0.95), f: cr(1.0) }],
            rms_residual: 0.0,
            status: FitStatus::Converged,
        }
    }

    fn sample_curve(a: usize, b: usize) -> DecayCurve {
        DecayCurve {
            a,
            b,
            depths: (0..15).collect(),
            p_hat: (0..15).map(|l| 0.95f64.powi(l)).collect(),
            shots: 100,
            exact: false,
        }
    }

    #[test]
    fn curves_csv_shape() {
        let curves = vec![sample_curve(0, 0), sample_curve(0, 1)];
        let fits = vec![sample_fit(0, 0), sample_fit(0, 1)];
        let csv = curves_csv(&curves, &fits, None);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 30);
        assert_eq!(lines[0], "a,b,L,p_hat,fitted");
        assert!(lines[1].starts_with("0,0,0,1,"));
    }

    #[test]
    fn histogram_counts_sum_to_samples() {
        let samples: Vec<f64> = (0..500).map(|i| 0.85 + (i % 37) as f64 * 0.001).collect();
        let csv = histogram_csv(&samples, 20);
        let total: usize = csv
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
            .sum();
        assert_eq!(total, 500);
    }

    #[test]
    fn svg_outputs_are_well_formed() {
        let curves = vec![sample_curve(0, 0), sample_curve(0, 1)];
        let fits = vec![sample_fit(0, 0), sample_fit(0, 1)];
        let svg = curves_svg(&curves, &fits);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        let hist = histogram_svg(&[0.89, 0.9, 0.91, 0.9], 10);
        assert!(hist.contains("<rect"));
    }
}

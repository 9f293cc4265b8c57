//! Static learning-curve plots.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD_L: f64 = 56.0;
const PAD_R: f64 = 160.0;
const PAD_T: f64 = 32.0;
const PAD_B: f64 = 44.0;
const MAX_POINTS: usize = 400;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

pub struct Series {
    pub label: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn stride(len: usize) -> usize {
    len.div_ceil(MAX_POINTS).max(1)
}

/// Mean curves with ±1 std bands. Output depends only on the inputs.
pub fn curves_svg(title: &str, y_label: &str, series: &[Series]) -> String {
    let x_max = series.iter().map(|s| s.mean.len()).max().unwrap_or(1).max(2) as f64 - 1.0;
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for (m, d) in s.mean.iter().zip(&s.std) {
            y_lo = y_lo.min(m - d);
            y_hi = y_hi.max(m + d);
        }
    }
    if !y_lo.is_finite() || !y_hi.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    if y_hi - y_lo < 1e-9 {
        y_hi = y_lo + 1.0;
    }
    let pw = W - PAD_L - PAD_R;
    let ph = H - PAD_T - PAD_B;
    let sx = |i: f64| PAD_L + pw * i / x_max;
    let sy = |v: f64| PAD_T + ph * (1.0 - (v - y_lo) / (y_hi - y_lo));

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="18" font-size="13">{}</text>"#, PAD_L, escape(title));
    let _ = writeln!(
        out,
        r#"<rect x="{PAD_L}" y="{PAD_T}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="0.8"/>"#
    );
    for k in 0..=4 {
        let v = y_lo + (y_hi - y_lo) * k as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.2}</text>"#, PAD_L - 4.0, y + 4.0, v);
        let _ = writeln!(out, r##"<line x1="{PAD_L}" x2="{:.1}" y1="{y:.1}" y2="{y:.1}" stroke="#ddd"/>"##, PAD_L + pw);
        let e = x_max * k as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.0}</text>"#, sx(e), PAD_T + ph + 14.0, e + 1.0);
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">episode</text>"#, PAD_L + pw / 2.0, H - 8.0);
    let _ = writeln!(
        out,
        r#"<text transform="translate(14 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        PAD_T + ph / 2.0,
        escape(y_label)
    );
    for (k, s) in series.iter().enumerate() {
        let c = PALETTE[k % PALETTE.len()];
        let st = stride(s.mean.len());
        let idx: Vec<usize> = (0..s.mean.len()).step_by(st).chain(s.mean.len().checked_sub(1)).collect();
        let mut idx = idx;
        idx.dedup();
        if !idx.is_empty() {
            let upper: Vec<String> = idx.iter().map(|&i| format!("{:.1},{:.1}", sx(i as f64), sy(s.mean[i] + s.std[i]))).collect();
            let lower: Vec<String> = idx.iter().rev().map(|&i| format!("{:.1},{:.1}", sx(i as f64), sy(s.mean[i] - s.std[i]))).collect();
            let _ = writeln!(out, r#"<polygon points="{} {}" fill="{c}" fill-opacity="0.18" stroke="none"/>"#, upper.join(" "), lower.join(" "));
            let line: Vec<String> = idx.iter().map(|&i| format!("{:.1},{:.1}", sx(i as f64), sy(s.mean[i]))).collect();
            let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#, line.join(" "));
        }
        let ly = PAD_T + 10.0 + 16.0 * k as f64;
        let lx = PAD_L + pw + 10.0;
        let _ = writeln!(out, r#"<line x1="{lx:.1}" x2="{:.1}" y1="{ly:.1}" y2="{ly:.1}" stroke="{c}" stroke-width="3"/>"#, lx + 16.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 22.0, ly + 4.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

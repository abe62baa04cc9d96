//! Aligned-text tables and a small SVG plot writer.

use std::fmt::Write;

use crate::formats::RegressionRow;

/// Columns padded to their widest cell; the first column is left-aligned,
/// the rest right-aligned.
pub fn aligned(header: &[String], rows: &[Vec<String>]) -> String {
    let n = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate().take(n) {
            let pad = widths[i] - c.chars().count();
            if i == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.trim_end().to_string()
    };
    let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * n.saturating_sub(1));
    let mut out = String::new();
    out.push_str(&line(header));
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out.push_str(&rule);
    out.push('\n');
    out
}

/// A regression table in the usual layout: models as columns, each focus
/// term as a coefficient line with stars and a standard-error line below.
pub fn regression_table(title: &str, rows: &[RegressionRow]) -> String {
    let mut models: Vec<&str> = Vec::new();
    let mut terms: Vec<&str> = Vec::new();
    for r in rows {
        if !models.contains(&r.model.as_str()) {
            models.push(&r.model);
        }
        if r.focus && r.error.is_empty() && !terms.contains(&r.term.as_str()) {
            terms.push(&r.term);
        }
    }
    let find = |m: &str, t: &str| rows.iter().find(|r| r.model == m && r.term == t);
    let header: Vec<String> = std::iter::once(String::new()).chain(models.iter().map(|m| m.to_string())).collect();
    let mut body = Vec::new();
    for t in &terms {
        let mut coef = vec![t.to_string()];
        let mut se = vec![String::new()];
        for m in &models {
            match find(m, t) {
                Some(r) => {
                    coef.push(format!("{:.4}{}", r.coef, r.stars));
                    se.push(format!("({:.4})", r.se));
                }
                None => {
                    coef.push(String::new());
                    se.push(String::new());
                }
            }
        }
        body.push(coef);
        body.push(se);
    }
    let mut n_row = vec!["N".to_string()];
    for m in &models {
        let n = rows.iter().find(|r| r.model == *m).and_then(|r| r.n);
        n_row.push(n.map(|v| v.to_string()).unwrap_or_default());
    }
    body.push(n_row);
    let mut out = format!("{title}\n");
    out.push_str(&aligned(&header, &body));
    for m in &models {
        if let Some(r) = rows.iter().find(|r| r.model == *m && !r.error.is_empty()) {
            let _ = writeln!(out, "{m}: not estimated ({})", r.error);
        }
    }
    out.push_str("*: p<0.05, **: p<0.01, ***: p<0.001\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Line,
    Points,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub mark: Mark,
    pub color: &'static str,
}

/// Scatter and line plot with labelled axes and five ticks per axis.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    let range = |f: fn(&(f64, f64)) -> f64| {
        let lo = all.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        match (lo.is_finite(), hi > lo) {
            (true, true) => (lo, hi),
            (true, false) => (lo - 1.0, lo + 1.0),
            _ => (0.0, 1.0),
        }
    };
    let (x0, x1) = range(|p| p.0);
    let (y0, y1) = range(|p| p.1);
    let pad = (y1 - y0) * 0.05;
    let (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let sy = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let (ax0, ay0, ax1, ay1) = (left, h - bottom, w - right, top);
    let _ = writeln!(s, r#"<path d="M{ax0} {ay1} L{ax0} {ay0} L{ax1} {ay0}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let f = f64::from(i) / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(s, r#"<line x1="{px:.1}" y1="{ay0}" x2="{px:.1}" y2="{}" stroke="black"/>"#, ay0 + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.1}" y="{}" text-anchor="middle">{}</text>"#, ay0 + 18.0, tick(xv));
        let _ = writeln!(s, r#"<line x1="{}" y1="{py:.1}" x2="{ax0}" y2="{py:.1}" stroke="black"/>"#, ax0 - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, ax0 - 8.0, py + 4.0, tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (ax0 + ax1) / 2.0, h - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (ay0 + ay1) / 2.0,
        escape(y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let pts: Vec<(f64, f64)> = ser.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
        match ser.mark {
            Mark::Points => {
                for (x, y) in &pts {
                    let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{}"/>"#, sx(*x), sy(*y), ser.color);
                }
            }
            Mark::Line if pts.len() > 1 => {
                let d: Vec<String> = pts
                    .iter()
                    .enumerate()
                    .map(|(i, (x, y))| format!("{}{:.1} {:.1}", if i == 0 { "M" } else { "L" }, sx(*x), sy(*y)))
                    .collect();
                let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{}" stroke-width="2"/>"#, d.join(" "), ser.color);
            }
            Mark::Line => {}
        }
        let ly = top + 14.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/>"#, ax1 - 150.0, ly, ser.color);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, ax1 - 135.0, ly + 9.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

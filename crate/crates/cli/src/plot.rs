//! Self-contained SVG bar charts.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 96.0;

/// One bar per label; `None` bars are left empty and labelled "n/a".
pub fn bar_chart(title: &str, y_label: &str, labels: &[String], values: &[Option<f64>]) -> String {
    let lo = values.iter().flatten().fold(0.0f64, |a, &v| a.min(v));
    let mut hi = values.iter().flatten().fold(0.0f64, |a, &v| a.max(v));
    if hi - lo <= 0.0 {
        hi = lo + 1.0;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let y = |v: f64| TOP + (hi - v) / (hi - lo) * plot_h;
    let slot = plot_w / labels.len().max(1) as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + plot_h / 2.0,
        escape(y_label)
    );
    for tick in 0..=4 {
        let v = lo + (hi - lo) * tick as f64 / 4.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            WIDTH - RIGHT,
            LEFT - 4.0,
            y(v) + 4.0,
            format_tick(v),
            y = y(v),
        );
    }
    for (i, (label, value)) in labels.iter().zip(values).enumerate() {
        let x = LEFT + slot * i as f64;
        if let Some(v) = value {
            let (top, bottom) = (y(v.max(0.0)), y(v.min(0.0)));
            let fill = if *v >= 0.0 { "#4a7bb7" } else { "#c0504d" };
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{fill}"><title>{}: {v}</title></rect>"#,
                x + slot * 0.15,
                slot * 0.7,
                (bottom - top).max(0.5),
                escape(label),
            );
        } else {
            let _ = writeln!(
                svg,
                r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="#888">n/a</text>"##,
                x + slot / 2.0,
                y(0.0) - 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text transform="translate({:.2} {}) rotate(45)">{}</text>"#,
            x + slot / 2.0,
            HEIGHT - BOTTOM + 14.0,
            escape(label)
        );
    }
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" x2="{}" y1="{:.2}" y2="{:.2}" stroke="black"/>"#,
        WIDTH - RIGHT,
        y(0.0),
        y(0.0)
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" x2="{LEFT}" y1="{TOP}" y2="{}" stroke="black"/>"#,
        TOP + plot_h
    );
    svg.push_str("</svg>\n");
    svg
}

fn format_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

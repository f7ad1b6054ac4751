//! Minimal SVG 1.1 line chart for barcode curves.

use std::fmt::Write;

use barcode::BarcodeCurve;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;

fn color(tag: &str) -> &'static str {
    match tag {
        "pq" => "#d62728",
        "pp" => "#1f77b4",
        _ => "#2ca02c",
    }
}

fn x_of(lambda: f64) -> f64 {
    MARGIN + lambda * (WIDTH - 2.0 * MARGIN)
}

fn y_of(frac: f64) -> f64 {
    HEIGHT - MARGIN - frac * (HEIGHT - 2.0 * MARGIN)
}

pub fn render(curves: &[(&str, BarcodeCurve)], below: bool, alive: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, x1, y0, y1) = (x_of(0.0), x_of(1.0), y_of(0.0), y_of(1.0));
    let _ = writeln!(
        s,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (x, y) = (x_of(t), y_of(t));
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{y0}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" font-size="11" text-anchor="middle">{t}</text>"#,
            y0 + 4.0,
            y0 + 18.0
        );
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/><text x="{}" y="{}" font-size="11" text-anchor="end">{t}</text>"#,
            x0 - 4.0,
            x0 - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">normalized distance threshold</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">fraction of pairs</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    let mut legend_y = y1 + 4.0;
    for (tag, curve) in curves {
        let c = color(tag);
        let mut series: Vec<(&str, Vec<(f64, f64)>)> = Vec::new();
        if alive {
            series.push(("alive", curve.points.iter().map(|p| (p.lambda, p.alive)).collect()));
        }
        if below {
            series.push(("below", curve.points.iter().map(|p| (p.lambda, p.below)).collect()));
        }
        for (kind, pts) in series {
            let d: Vec<String> = pts
                .iter()
                .map(|&(l, f)| format!("{:.2},{:.2}", x_of(l), y_of(f)))
                .collect();
            let dash = if kind == "below" { r#" stroke-dasharray="5,3""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"{dash}/>"#,
                d.join(" ")
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{legend_y}" font-size="11" fill="{c}">{tag} {kind}</text>"#,
                x1 - 70.0
            );
            legend_y += 14.0;
        }
    }
    s.push_str("</svg>\n");
    s
}

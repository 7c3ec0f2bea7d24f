use std::fmt::Write;

pub const PANEL_SIZE: f64 = 600.0;
const MARGIN: f64 = 60.0;

/// One square scatter panel over `range x range`.
#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub range: (f64, f64),
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Panels side by side, each `600 x 600`, as a standalone SVG 1.1 document.
pub fn scatter_svg(panels: &[Panel]) -> String {
    let width = PANEL_SIZE * panels.len() as f64;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{PANEL_SIZE}" viewBox="0 0 {width} {PANEL_SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{width}" height="{PANEL_SIZE}" fill="white"/>"#);
    let plot = PANEL_SIZE - 2.0 * MARGIN;
    for (p, panel) in panels.iter().enumerate() {
        let ox = p as f64 * PANEL_SIZE;
        let (lo, hi) = panel.range;
        let sx = |v: f64| ox + MARGIN + (v - lo) / (hi - lo) * plot;
        let sy = |v: f64| PANEL_SIZE - MARGIN - (v - lo) / (hi - lo) * plot;
        let _ = writeln!(s, r#"<g id="panel{}">"#, p + 1);
        let _ = writeln!(
            s,
            r#"<clipPath id="clip{}"><rect x="{}" y="{MARGIN}" width="{plot}" height="{plot}"/></clipPath>"#,
            p + 1,
            ox + MARGIN
        );
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{MARGIN}" width="{plot}" height="{plot}" fill="none" stroke="black"/>"#,
            ox + MARGIN
        );
        for t in 0..=4 {
            let v = lo + (hi - lo) * t as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
                sx(v),
                PANEL_SIZE - MARGIN + 16.0,
                fmt_tick(v)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end">{}</text>"#,
                ox + MARGIN - 6.0,
                sy(v) + 4.0,
                fmt_tick(v)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="30" font-size="16" text-anchor="middle">{}</text>"#,
            ox + PANEL_SIZE / 2.0,
            escape(&panel.title)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">{}</text>"#,
            ox + PANEL_SIZE / 2.0,
            PANEL_SIZE - 15.0,
            escape(&panel.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
            ox + 18.0,
            PANEL_SIZE / 2.0,
            ox + 18.0,
            PANEL_SIZE / 2.0,
            escape(&panel.y_label)
        );
        let _ = writeln!(s, r#"<g clip-path="url(#clip{})" fill="steelblue" fill-opacity="0.5">"#, p + 1);
        for &(x, y) in &panel.points {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2"/>"#, sx(x), sy(y));
        }
        let _ = writeln!(s, "</g>\n</g>");
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 {
        "0".to_string()
    } else {
        format!("{r}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_parses_and_counts_points() {
        let panels: Vec<Panel> = (0..3)
            .map(|i| Panel {
                title: format!("panel <{i}>"),
                x_label: "x9".into(),
                y_label: "x10".into(),
                range: (-1.0, 1.0),
                points: (0..1000).map(|k| ((k as f64 / 500.0) - 1.0, (k as f64).sin())).collect(),
            })
            .collect();
        let text = scatter_svg(&panels);
        let doc = roxmltree::Document::parse(&text).unwrap();
        let circles = doc.descendants().filter(|n| n.has_tag_name("circle")).count();
        assert_eq!(circles, 3000);
        let root = doc.root_element();
        assert_eq!(root.attribute("width"), Some("1800"));
        assert_eq!(root.attribute("height"), Some("600"));
        let groups = doc.descendants().filter(|n| n.attribute("id").is_some_and(|id| id.starts_with("panel"))).count();
        assert_eq!(groups, 3);
    }
}

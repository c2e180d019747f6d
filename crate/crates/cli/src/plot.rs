//! Static SVG plots rendered from in-repo primitives (axes, polylines, text)
//! so the pipeline needs no plotting stack. Rendering is deterministic:
//! identical inputs yield identical bytes.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 56.0;

/// Fixed palette; curves cycle through it in series order.
const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
    "#bcbd22", "#e377c2",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

fn map_x(x: f64) -> f64 {
    MARGIN_LEFT + x * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
}

fn map_y(y: f64) -> f64 {
    HEIGHT - MARGIN_BOTTOM - y * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
}

/// Render one ROC panel: unit axes, the chance diagonal, and one polyline per
/// series with a side legend.
pub fn roc_panel(title: &str, series: &[Series]) -> String {
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"Helvetica, Arial, sans-serif\">\n"
    );
    let _ = writeln!(
        svg,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"28\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        px(map_x(0.5)),
        escape(title)
    );

    // Axes with ticks every 0.2.
    let _ = writeln!(
        svg,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        px(MARGIN_LEFT),
        px(MARGIN_TOP),
        px(WIDTH - MARGIN_LEFT - MARGIN_RIGHT),
        px(HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
            px(map_x(v)),
            px(map_y(0.0)),
            px(map_x(v)),
            px(map_y(0.0) + 5.0)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{v:.1}</text>",
            px(map_x(v)),
            px(map_y(0.0) + 18.0)
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
            px(map_x(0.0) - 5.0),
            px(map_y(v)),
            px(map_x(0.0)),
            px(map_y(v))
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{v:.1}</text>",
            px(map_x(0.0) - 9.0),
            px(map_y(v) + 4.0)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">false positive rate</text>",
        px(map_x(0.5)),
        px(HEIGHT - 14.0)
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {})\">true positive rate</text>",
        px(map_y(0.5)),
        px(map_y(0.5))
    );

    // Chance diagonal.
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#aaaaaa\" stroke-dasharray=\"5,4\"/>",
        px(map_x(0.0)),
        px(map_y(0.0)),
        px(map_x(1.0)),
        px(map_y(1.0))
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", px(map_x(x)), px(map_y(y))))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>",
            coords.join(" ")
        );
        let ly = MARGIN_TOP + 16.0 + i as f64 * 18.0;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"3\"/>",
            px(lx),
            px(ly - 4.0),
            px(lx + 18.0),
            px(ly - 4.0)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>",
            px(lx + 24.0),
            px(ly),
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

//! Minimal SVG: final `u` and `v` as polylines, fronts as dashed verticals.

use std::fmt::Write as _;

use crate::simulator::SimState;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const MAX_POINTS: usize = 2000;

pub fn profile_svg(state: &SimState) -> String {
    let pad = 2.0 * state.support_radius_max();
    let x_lo = (state.g_front - pad).max(state.grid.x_min());
    let x_hi = (state.h_front + pad).min(state.grid.x_max());
    let idx: Vec<usize> = (0..state.grid.len).filter(|&i| (x_lo..=x_hi).contains(&state.grid.x(i))).collect();
    let step = idx.len().div_ceil(MAX_POINTS).max(1);
    let y_max = state.u.iter().chain(&state.v).cloned().fold(1.0, f64::max) * 1.05;

    let px = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - y / y_max * (HEIGHT - 2.0 * MARGIN);
    let polyline = |field: &[f64]| {
        let mut pts = String::new();
        for &i in idx.iter().step_by(step).chain(idx.last()) {
            let _ = write!(pts, "{:.2},{:.2} ", px(state.grid.x(i)), py(field[i]));
        }
        pts.trim_end().to_string()
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<polyline points="{x0},{y1} {x0},{y0} {x1},{y0}" fill="none" stroke="black"/>"#);
    for (x, anchor) in [(x_lo, "start"), (0.5 * (x_lo + x_hi), "middle"), (x_hi, "end")] {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="{anchor}">{x:.3}</text>"#, px(x), y0 + 18.0);
    }
    for y in [0.0, 0.5 * y_max, y_max] {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{y:.3}</text>"#, x0 - 6.0, py(y) + 4.0);
    }
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##, polyline(&state.u));
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##, polyline(&state.v));
    for front in [state.g_front, state.h_front] {
        let _ = writeln!(
            s,
            r#"<line x1="{0:.2}" y1="{y0}" x2="{0:.2}" y2="{y1}" stroke="gray" stroke-dasharray="4,3"/>"#,
            px(front)
        );
    }
    let _ = writeln!(s, r##"<text x="{:.2}" y="{:.2}" font-size="13" fill="#1f77b4">u</text>"##, x1 - 40.0, y1 + 14.0);
    let _ = writeln!(s, r##"<text x="{:.2}" y="{:.2}" font-size="13" fill="#d62728">v</text>"##, x1 - 20.0, y1 + 14.0);
    let _ = writeln!(s, r#"<text x="{:.2}" y="20" font-size="13" text-anchor="middle">t = {:.4}</text>"#, WIDTH / 2.0, state.t);
    s.push_str("</svg>\n");
    s
}

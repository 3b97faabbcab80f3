//! Minimal SVG rendering of a gain map.

use std::fmt::Write;

use nalgebra::DMatrix;

const CELL: usize = 6;
const MARGIN: usize = 40;

/// Linear blue-to-yellow ramp, `t ∈ [0, 1]`.
fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(20.0, 250.0), lerp(30.0, 220.0), lerp(110.0, 40.0))
}

/// Pixel centre of cell `(ix, iy)`; y grows upwards.
fn centre(ix: usize, iy: usize, side: usize) -> (usize, usize) {
    (MARGIN + ix * CELL + CELL / 2, MARGIN + (side - 1 - iy) * CELL + CELL / 2)
}

/// Heatmap with the trajectory drawn as a line, a circle on the final MA cell
/// and a square on the FPA cell. `header` lines go into a leading comment.
pub fn render_heatmap(gains: &DMatrix<f64>, trajectory: &[(usize, usize)], fpa: (usize, usize), header: &[String]) -> String {
    let side = gains.nrows();
    let size = side * CELL + 2 * MARGIN;
    let (lo, hi) = (gains.min(), gains.max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, "<!--\n{}\n-->", header.join("\n"));
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{}" viewBox="0 0 {size} {}">"#,
        size + 30,
        size + 30
    );
    let _ = writeln!(s, r#"<g class="heatmap" shape-rendering="crispEdges">"#);
    for ix in 0..side {
        for iy in 0..gains.ncols() {
            let (cx, cy) = centre(ix, iy, side);
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}"/>"#,
                cx - CELL / 2,
                cy - CELL / 2,
                color((gains[(ix, iy)] - lo) / span)
            );
        }
    }
    let _ = writeln!(s, "</g>");
    if trajectory.len() > 1 {
        let pts: Vec<String> = trajectory
            .iter()
            .map(|&(ix, iy)| {
                let (x, y) = centre(ix, iy, side);
                format!("{x},{y}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="trajectory" points="{}" fill="none" stroke="white" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
    }
    if let Some(&(ix, iy)) = trajectory.last() {
        let (x, y) = centre(ix, iy, side);
        let _ = writeln!(
            s,
            r#"<circle class="marker" data-role="ma" cx="{x}" cy="{y}" r="7" fill="none" stroke="red" stroke-width="2.5"/>"#
        );
    }
    let (fx, fy) = centre(fpa.0, fpa.1, side);
    let _ = writeln!(
        s,
        r#"<rect class="marker" data-role="fpa" x="{}" y="{}" width="12" height="12" fill="none" stroke="black" stroke-width="2.5"/>"#,
        fx - 6,
        fy - 6
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">Channel gain (circle: MA final position, square: FPA)</text>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="13">min {lo:.4e}   max {hi:.4e}</text>"#,
        size + 10
    );
    let _ = writeln!(s, "</svg>");
    s
}

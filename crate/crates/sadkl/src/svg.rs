//! Static SVG renderings of ROC curves and decision boundaries.

use std::fmt::Write as _;

use sadkl_core::eval::{BoundaryGrid, RocCurve};

const SIZE: f64 = 480.0;
const PAD: f64 = 40.0;
const BANDS: usize = 10;

fn header(s: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
}

pub fn roc_svg(roc: &RocCurve) -> String {
    let mut s = String::new();
    let side = SIZE + 2.0 * PAD;
    header(&mut s, side, side);
    let px = |x: f64| PAD + x * SIZE;
    let py = |y: f64| PAD + (1.0 - y) * SIZE;
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4 4"/>"#,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    let pts: Vec<String> = roc
        .points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
        pts.join(" ")
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">false positive rate</text>"#,
        PAD + SIZE / 2.0,
        side - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">true positive rate</text>"#,
        PAD + SIZE / 2.0,
        PAD + SIZE / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">AUC {:.4}</text>"#,
        PAD + SIZE - 8.0,
        PAD + SIZE - 8.0,
        roc.auc
    );
    s.push_str("</svg>\n");
    s
}

/// Light (normal) to dark (anomalous) blue.
fn band_color(band: usize) -> String {
    let t = band as f64 / (BANDS - 1) as f64;
    let r = (235.0 - 200.0 * t) as u8;
    let g = (242.0 - 170.0 * t) as u8;
    let b = (250.0 - 110.0 * t) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Filled bands of the normalized score with the contour at the grid's level
/// and, optionally, points drawn on top (`true` marks an anomaly).
pub fn boundary_svg(grid: &BoundaryGrid, points: &[(f64, f64, bool)]) -> String {
    let spec = grid.spec;
    let (x0, x1) = spec.x_range;
    let (y0, y1) = spec.y_range;
    let aspect = ((y1 - y0) / (x1 - x0)).clamp(0.25, 4.0);
    let (w, h) = (SIZE, SIZE * aspect);
    let mut s = String::new();
    header(&mut s, w + 2.0 * PAD, h + 2.0 * PAD);
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * w;
    let py = |y: f64| PAD + (y1 - y) / (y1 - y0) * h;
    let (cw, ch) = (w / (spec.nx - 1) as f64, h / (spec.ny - 1) as f64);

    // Cells colored by the band of their corner mean, merged along rows.
    for j in 0..spec.ny - 1 {
        let mut i = 0;
        while i < spec.nx - 1 {
            let band = cell_band(grid, i, j);
            let start = i;
            while i < spec.nx - 1 && cell_band(grid, i, j) == band {
                i += 1;
            }
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                px(grid.x(start)),
                py(grid.y(j + 1)),
                (i - start) as f64 * cw + 0.3,
                ch + 0.3,
                band_color(band)
            );
        }
    }

    if let Some(level) = grid.level {
        let mut d = String::new();
        for ((ax, ay), (bx, by)) in contour_segments(grid, level) {
            let _ = write!(
                d,
                "M{:.2} {:.2}L{:.2} {:.2}",
                px(ax),
                py(ay),
                px(bx),
                py(by)
            );
        }
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="crimson" stroke-width="2"/>"#
        );
    }

    for &(x, y, abnormal) in points {
        let color = if abnormal { "darkorange" } else { "black" };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="{color}"/>"#,
            px(x),
            py(y)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
    );
    s.push_str("</svg>\n");
    s
}

fn cell_band(grid: &BoundaryGrid, i: usize, j: usize) -> usize {
    let mean = 0.25
        * (grid.value(i, j)
            + grid.value(i + 1, j)
            + grid.value(i, j + 1)
            + grid.value(i + 1, j + 1));
    ((mean * BANDS as f64) as usize).min(BANDS - 1)
}

type Point = (f64, f64);

/// Marching squares over the grid in data coordinates.
pub fn contour_segments(grid: &BoundaryGrid, level: f64) -> Vec<(Point, Point)> {
    let spec = grid.spec;
    let mut out = Vec::new();
    for j in 0..spec.ny - 1 {
        for i in 0..spec.nx - 1 {
            // Corners counterclockwise from the lower left.
            let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let v = c.map(|(a, b)| grid.value(a, b));
            let p = c.map(|(a, b)| (grid.x(a), grid.y(b)));
            let inside = v.map(|x| x < level);
            let crossing = |e: usize| {
                let (a, b) = (e, (e + 1) % 4);
                let t = (level - v[a]) / (v[b] - v[a]);
                (
                    p[a].0 + t * (p[b].0 - p[a].0),
                    p[a].1 + t * (p[b].1 - p[a].1),
                )
            };
            let edges: Vec<usize> = (0..4)
                .filter(|&e| inside[e] != inside[(e + 1) % 4])
                .collect();
            match edges.len() {
                2 => out.push((crossing(edges[0]), crossing(edges[1]))),
                4 => {
                    // Saddle: the center value decides which corners connect.
                    let center_inside = v.iter().sum::<f64>() / 4.0 < level;
                    if center_inside == inside[0] {
                        out.push((crossing(0), crossing(1)));
                        out.push((crossing(2), crossing(3)));
                    } else {
                        out.push((crossing(3), crossing(0)));
                        out.push((crossing(1), crossing(2)));
                    }
                }
                _ => {}
            }
        }
    }
    out
}

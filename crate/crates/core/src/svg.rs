//! SVG export of rectangle and tangram states.
//!
//! Output is a plain string with fixed number formatting, so equal inputs
//! give byte-identical files.

use std::fmt::Write;

use crate::error::Result;
use crate::rect::{RectState, RegionGoal, CANVAS, HALF};
use crate::tangram::{TangramState, CANVAS_HALF};

const PX: f64 = 32.0;
const FILLS: [&str; 7] = ["#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6"];

fn header(out: &mut String, extent: f64) {
    let size = 2.0 * extent * PX;
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0}" height="{size:.0}" viewBox="{:.3} {:.3} {:.3} {:.3}">"#,
        -extent,
        -extent,
        2.0 * extent,
        2.0 * extent
    );
    // Flip y so the canvas reads bottom-up like the state coordinates.
    let _ = writeln!(out, r#"<g transform="scale(1,-1)">"#);
    let _ = writeln!(
        out,
        r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#ffffff" stroke="#cccccc" stroke-width="0.05"/>"##,
        -extent,
        -extent,
        2.0 * extent,
        2.0 * extent
    );
}

fn polygon(out: &mut String, points: &[(f64, f64)], fill: &str) {
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.4},{y:.4}")).collect();
    let _ = writeln!(
        out,
        r##"<polygon points="{}" fill="{fill}" fill-opacity="0.8" stroke="#000000" stroke-width="0.05"/>"##,
        pts.join(" ")
    );
}

fn footer(out: &mut String) {
    out.push_str("</g>\n</svg>\n");
}

/// Rectangle state on the 16×16 canvas; with a goal, the target region is
/// drawn as a dashed box.
pub fn rect_svg(s: &RectState, region: Option<&RegionGoal>) -> String {
    let mut out = String::new();
    header(&mut out, HALF as f64);
    for i in 0..=CANVAS {
        let v = (i - HALF) as f64;
        let h = HALF as f64;
        let _ = writeln!(
            out,
            r##"<line x1="{v:.3}" y1="{:.3}" x2="{v:.3}" y2="{h:.3}" stroke="#eeeeee" stroke-width="0.02"/><line x1="{:.3}" y1="{v:.3}" x2="{h:.3}" y2="{v:.3}" stroke="#eeeeee" stroke-width="0.02"/>"##,
            -h,
            -h
        );
    }
    for p in &s.placements {
        let pts: Vec<(f64, f64)> = p.vertices().iter().map(|v| (v[0] as f64, v[1] as f64)).collect();
        polygon(&mut out, &pts, FILLS[p.kind.index()]);
    }
    if let Some(g) = region {
        let (x0, x1, y0, y1) = g.bounds();
        let _ = writeln!(
            out,
            r##"<rect class="region" x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="#d00000" stroke-width="0.12" stroke-dasharray="0.3,0.2"/>"##,
            x1 - x0,
            y1 - y0
        );
    }
    footer(&mut out);
    out
}

/// Tangram assembly on the [−8, 8]² canvas.
pub fn tangram_svg(s: &TangramState) -> Result<String> {
    let mut out = String::new();
    header(&mut out, CANVAS_HALF);
    for (i, poly) in s.polygons()? {
        let pts: Vec<(f64, f64)> = poly.vertices().iter().map(|v| v.to_f64()).collect();
        polygon(&mut out, &pts, FILLS[i]);
    }
    footer(&mut out);
    Ok(out)
}

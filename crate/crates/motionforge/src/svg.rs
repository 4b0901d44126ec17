//! Deterministic SVG rendering of single frames: vertices as circles,
//! distance constraints as segments, optional flex arrows. Dimension 2 draws
//! the plane directly; dimension 3 uses a fixed isometric projection. All
//! coordinates are written with four decimals, so identical inputs produce
//! byte-identical files.

use nalgebra::DVector;

use crate::constraint::{ConstraintKind, ConstraintSystem};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SvgOptions {
    pub width: u32,
    pub height: u32,
    /// Draw one arrow per point vertex for the given flex.
    pub show_flexes: bool,
    /// World-space circle radius (sphere packings); vertex dots otherwise.
    pub disk_radius: Option<f64>,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            width: 800,
            height: 600,
            show_flexes: false,
            disk_radius: None,
        }
    }
}

const EDGE_COLOR: &str = "#0d9488";
const VERTEX_COLOR: &str = "#134e4a";
const FLEX_COLOR: &str = "#ff7f50";
const VERTEX_DOT_PX: f64 = 4.0;
/// Arrow length as a fraction of the drawing's larger world extent.
const FLEX_FRACTION: f64 = 0.15;

/// Isometric drop of a 3-vector; the identity (padded) below dimension 3.
fn project(dim: usize, p: &[f64]) -> (f64, f64) {
    match dim {
        3 => {
            let (x, y, z) = (p[0], p[1], p[2]);
            let s = 3f64.sqrt() / 2.0;
            (s * (x - y), 0.5 * (x + y) - z)
        }
        2 => (p[0], p[1]),
        1 => (p[0], 0.0),
        _ => unreachable!("checked by render_frame"),
    }
}

struct Viewport {
    scale: f64,
    ox: f64,
    oy: f64,
}

impl Viewport {
    /// Fits the world bounding box into the pixel canvas with a margin,
    /// preserving aspect ratio and flipping y to point up.
    fn fit(points: &[(f64, f64)], pad: f64, width: u32, height: u32) -> Viewport {
        let mut min = (f64::INFINITY, f64::INFINITY);
        let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in points {
            min.0 = min.0.min(x - pad);
            min.1 = min.1.min(y - pad);
            max.0 = max.0.max(x + pad);
            max.1 = max.1.max(y + pad);
        }
        let span_x = (max.0 - min.0).max(1e-9);
        let span_y = (max.1 - min.1).max(1e-9);
        let margin = 0.05;
        let usable_w = f64::from(width) * (1.0 - 2.0 * margin);
        let usable_h = f64::from(height) * (1.0 - 2.0 * margin);
        let scale = (usable_w / span_x).min(usable_h / span_y);
        let cx = (min.0 + max.0) / 2.0;
        let cy = (min.1 + max.1) / 2.0;
        Viewport {
            scale,
            ox: f64::from(width) / 2.0 - scale * cx,
            oy: f64::from(height) / 2.0 + scale * cy,
        }
    }

    fn map(&self, p: (f64, f64)) -> (f64, f64) {
        (self.ox + self.scale * p.0, self.oy - self.scale * p.1)
    }
}

/// Renders one realization. `flex` is drawn as one arrow per point vertex
/// when `show_flexes` is set; it must have the system's coordinate length.
pub fn render_frame(
    system: &ConstraintSystem,
    x: &DVector<f64>,
    flex: Option<&DVector<f64>>,
    opts: &SvgOptions,
) -> Result<String> {
    let d = system.dim;
    if d == 0 || d > 3 {
        return Err(Error::InvalidSystem(format!(
            "svg rendering supports dimensions 1..=3, got {d}"
        )));
    }
    if x.len() != system.n_coords() {
        return Err(Error::DimensionMismatch(format!(
            "frame has {} coordinates, system needs {}",
            x.len(),
            system.n_coords()
        )));
    }

    let block = |j: usize| -> Vec<f64> { (0..d).map(|c| x[j * d + c]).collect() };
    let positions: Vec<(f64, f64)> = (0..system.point_vertices)
        .map(|j| project(d, &block(j)))
        .collect();

    // World extent drives the flex arrow scale before pixel fitting.
    let mut span: f64 = 0.0;
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let dx = positions[i].0 - positions[j].0;
            let dy = positions[i].1 - positions[j].1;
            span = span.max(dx.hypot(dy));
        }
    }
    if span == 0.0 {
        span = 1.0;
    }

    let draw_flex = opts.show_flexes && flex.is_some();
    let mut arrows: Vec<((f64, f64), (f64, f64))> = Vec::new();
    if draw_flex {
        let v = flex.expect("checked");
        if v.len() != system.n_coords() {
            return Err(Error::DimensionMismatch(format!(
                "flex has {} coordinates, system needs {}",
                v.len(),
                system.n_coords()
            )));
        }
        let mut max_block: f64 = 0.0;
        for j in 0..system.point_vertices {
            let norm: f64 = (0..d).map(|c| v[j * d + c] * v[j * d + c]).sum::<f64>().sqrt();
            max_block = max_block.max(norm);
        }
        if max_block > 1e-12 {
            let scale = FLEX_FRACTION * span / max_block;
            for j in 0..system.point_vertices {
                let p = block(j);
                let tip: Vec<f64> = (0..d).map(|c| p[c] + scale * v[j * d + c]).collect();
                arrows.push((project(d, &p), project(d, &tip)));
            }
        }
    }

    let mut extent: Vec<(f64, f64)> = positions.clone();
    for &(_, tip) in &arrows {
        extent.push(tip);
    }
    let pad = opts.disk_radius.unwrap_or(0.0);
    let vp = Viewport::fit(&extent, pad, opts.width, opts.height);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
        w = opts.width,
        h = opts.height
    ));
    out.push_str(&format!(
        "  <rect width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        opts.width, opts.height
    ));

    for c in &system.constraints {
        if c.kind != ConstraintKind::Distance {
            continue;
        }
        let (u, v) = (c.refs[0], c.refs[1]);
        if u >= system.point_vertices || v >= system.point_vertices {
            continue;
        }
        let a = vp.map(positions[u]);
        let b = vp.map(positions[v]);
        out.push_str(&format!(
            "  <line class=\"edge\" x1=\"{:.4}\" y1=\"{:.4}\" x2=\"{:.4}\" y2=\"{:.4}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            a.0, a.1, b.0, b.1, EDGE_COLOR
        ));
    }

    for (j, &p) in positions.iter().enumerate() {
        let (px, py) = vp.map(p);
        match opts.disk_radius {
            Some(r) => out.push_str(&format!(
                "  <circle class=\"disk\" cx=\"{px:.4}\" cy=\"{py:.4}\" r=\"{:.4}\" fill=\"none\" stroke=\"{VERTEX_COLOR}\" stroke-width=\"2\"/>\n",
                r * vp.scale
            )),
            None => out.push_str(&format!(
                "  <circle class=\"vertex\" cx=\"{px:.4}\" cy=\"{py:.4}\" r=\"{VERTEX_DOT_PX}\" fill=\"{VERTEX_COLOR}\"/>\n"
            )),
        }
        let _ = j;
    }

    for &(base, tip) in &arrows {
        let a = vp.map(base);
        let b = vp.map(tip);
        // Two short strokes at the tip stand in for an arrowhead.
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len = dx.hypot(dy).max(1e-9);
        let (ux, uy) = (dx / len, dy / len);
        let head = 6.0f64.min(len / 2.0);
        let left = (b.0 - head * (ux - 0.5 * uy), b.1 - head * (uy + 0.5 * ux));
        let right = (b.0 - head * (ux + 0.5 * uy), b.1 - head * (uy - 0.5 * ux));
        out.push_str(&format!(
            "  <path class=\"flex\" d=\"M {:.4} {:.4} L {:.4} {:.4} M {:.4} {:.4} L {:.4} {:.4} L {:.4} {:.4}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            a.0, a.1, b.0, b.1, left.0, left.1, b.0, b.1, right.0, right.1, FLEX_COLOR
        ));
    }

    out.push_str("</svg>\n");
    Ok(out)
}

//! Orthographic knot diagrams as SVG, with gaps in under-strands.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::Point3;
use crate::polygon::Polygon;
use crate::scalar::Real;
use crate::verify::{project_along, project_generic, Projection, VerifyError};

const CANVAS: f64 = 512.0;
const MARGIN: f64 = 24.0;
/// Half-width of an under-strand gap, in canvas units.
const GAP: f64 = 7.0;

#[derive(Debug, Error)]
pub enum SvgError {
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Projection along `direction`, or along a fixed pseudo-random sequence of
/// directions when that one is not generic.
fn generic_projection<T: Real>(poly: &Polygon<T>, direction: Point3<f64>) -> Result<Projection, VerifyError> {
    match project_along(poly, direction) {
        Err(VerifyError::NotGeneric(_)) => project_generic(poly, &mut ChaCha8Rng::seed_from_u64(0), 1000),
        other => other,
    }
}

/// Renders the projection seen from `+direction` as an SVG document.
pub fn projection_svg<T: Real>(poly: &Polygon<T>, direction: Point3<f64>) -> Result<String, VerifyError> {
    let proj = generic_projection(poly, direction)?;
    let pts = &proj.points;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for q in pts {
        for k in 0..2 {
            lo[k] = lo[k].min(q[k]);
            hi[k] = hi[k].max(q[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let scale = (CANVAS - 2.0 * MARGIN) / span;
    // screen y grows downwards
    let map = |q: [f64; 2]| [MARGIN + (q[0] - lo[0]) * scale, CANVAS - MARGIN - (q[1] - lo[1]) * scale];

    let screen: Vec<[f64; 2]> = pts.iter().map(|&q| map(q)).collect();
    let path = strand_path(&screen, &proj);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">"#
    );
    let d = proj.direction;
    let _ = writeln!(svg, "<!-- viewed from ({:.6}, {:.6}, {:.6}); {} crossings -->", d.x, d.y, d.z, proj.crossings.len());
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(
        svg,
        r##"<path d="{}" fill="none" stroke="#1f3a93" stroke-width="3" stroke-linecap="round"/>"##,
        path.trim_end()
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Path data of the closed curve through `screen`, interrupted around
/// every under-passage. Gaps are placed by arclength so that they may run
/// across vertices.
fn strand_path(screen: &[[f64; 2]], proj: &Projection) -> String {
    let n = screen.len();
    let mut path = String::new();
    let mut put = |cmd: char, q: [f64; 2]| {
        let _ = write!(path, "{cmd}{:.3} {:.3} ", q[0], q[1]);
    };
    let lens: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (screen[i], screen[(i + 1) % n]);
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .collect();
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    for l in &lens {
        cum.push(cum.last().copied().unwrap_or(0.0) + l);
    }
    let total = cum[n];
    let mut centres: Vec<f64> = proj
        .crossings
        .iter()
        .map(|c| cum[c.under_edge] + c.under_param * lens[c.under_edge])
        .collect();
    if centres.is_empty() || total <= 0.0 {
        put('M', screen[0]);
        for &q in &screen[1..] {
            put('L', q);
        }
        path.push('Z');
        return path;
    }
    centres.sort_by(f64::total_cmp);
    let gap = GAP.min(total / (4.0 * centres.len() as f64));
    // arclength -> point, for any real s
    let at = |s: f64| {
        let s = s.rem_euclid(total);
        let i = cum.partition_point(|&c| c <= s).clamp(1, n) - 1;
        let t = if lens[i] > 0.0 { (s - cum[i]) / lens[i] } else { 0.0 };
        let (a, b) = (screen[i], screen[(i + 1) % n]);
        [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
    };
    for (k, &c) in centres.iter().enumerate() {
        let from = c + gap;
        let next = centres.get(k + 1).copied().unwrap_or(centres[0] + total);
        let to = next - gap;
        if to <= from {
            continue;
        }
        put('M', at(from));
        // vertices strictly inside (from, to), unwrapped past one lap
        for lap in [0.0, total] {
            for (i, &ci) in cum[..n].iter().enumerate() {
                let s = ci + lap;
                if s > from && s < to {
                    put('L', screen[i]);
                }
            }
        }
        put('L', at(to));
    }
    path
}

pub fn export_projection_svg<T: Real>(poly: &Polygon<T>, direction: Point3<f64>, path: impl AsRef<Path>) -> Result<(), SvgError> {
    std::fs::write(path, projection_svg(poly, direction)?)?;
    Ok(())
}

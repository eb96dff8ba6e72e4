//! Equalizing edge lengths and certifying that an equilateral realization
//! of the same knot type exists nearby.
//!
//! A polygon whose edge lengths `L_i` all satisfy
//! `|L_i - 1| < min(mu / n, mu^2 / 4)`, where `mu` is the minimum distance
//! between non-adjacent edges, lies close enough to a truly equilateral
//! polygon of the same knot type. [`mr_certificate`] evaluates that
//! inequality; the two transformations here drive a near-unit polygon
//! into its range.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{sweep_clearance, Clearance, Point3, Sweep, Triangle};
use crate::polygon::{Polygon, PolygonError};
use crate::scalar::Real;

/// Edge-length band reached by [`equalize_edges`] before renormalizing.
pub const DEFAULT_TARGET_BAND: f64 = 5e-6;

/// Closure tolerance for [`normalize_and_close`].
pub const DEFAULT_CLOSURE_TOL: f64 = 1e-14;

/// Edge lengths after [`normalize_and_close`] are within this many units of
/// `2^-52` of one.
pub const UNIT_ULPS: f64 = 3.0;

#[derive(Debug, Error)]
pub enum EquilateralError<T: Real> {
    #[error("edge lengths stayed {max_dev} away from unit length")]
    NotConverged { best: Box<Polygon<T>>, max_dev: T },
    #[error("edge vectors failed to close: residual {residual}")]
    NotClosed { residual: T },
    #[error(transparent)]
    Polygon(#[from] PolygonError),
}

/// Data of the realizability inequality for one polygon.
///
/// `holds` is the strict test `max_dev < bound`; `margin = bound / max_dev`
/// is infinite for an exactly equilateral polygon. Only meaningful for
/// polygons whose target edge length is one: scaling changes `mu` but not
/// the unit target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilateralCertificate<T> {
    pub n: usize,
    pub mu: T,
    /// Zero-based indices of the non-adjacent edge pair realizing `mu`.
    pub mu_edges: (usize, usize),
    pub max_dev: T,
    pub bound: T,
    pub margin: T,
    pub holds: bool,
}

/// Largest `|L_i - 1|` over the edges.
pub fn max_unit_deviation<T: Real>(poly: &Polygon<T>) -> T {
    poly.edge_lengths()
        .into_iter()
        .map(|l| (l - T::one()).abs())
        .fold(T::zero(), T::max)
}

pub fn mr_certificate<T: Real>(poly: &Polygon<T>) -> Result<EquilateralCertificate<T>, PolygonError> {
    let gap = poly.min_nonadjacent_edge_gap()?;
    let n = poly.len();
    let mu = gap.distance;
    let max_dev = max_unit_deviation(poly);
    let bound = (mu / T::from_usize_lossy(n)).min(mu * mu / T::lit(4.0));
    let margin = if max_dev > T::zero() { bound / max_dev } else { T::infinity() };
    Ok(EquilateralCertificate {
        n,
        mu,
        mu_edges: gap.edges,
        max_dev,
        bound,
        margin,
        holds: max_dev < bound,
    })
}

fn local_dev<T: Real>(o: Point3<T>, a: Point3<T>, p: Point3<T>) -> T {
    let one = T::one();
    ((a - o).norm() - one).abs().max(((p - a).norm() - one).abs())
}

/// Replacement for `a` between neighbours `o` and `p`: the nearest point on
/// the circle of points at unit distance from both, or when the neighbours
/// are too far apart for that circle to exist, `a` pulled onto the unit
/// sphere about whichever neighbour helps more.
fn replacement<T: Real>(o: Point3<T>, a: Point3<T>, p: Point3<T>) -> Option<Point3<T>> {
    let op = p - o;
    let d = op.norm();
    let two = T::lit(2.0);
    if d > T::zero() && d < two {
        let axis = op / d;
        let m = o.midpoint(p);
        let r = (T::one() - d * d / T::lit(4.0)).sqrt();
        let w = a - m;
        let radial = (w - axis * w.dot(axis)).normalized()?;
        return Some(m + radial * r);
    }
    let toward = |c: Point3<T>| (a - c).normalized().map(|u| c + u);
    [toward(o), toward(p)]
        .into_iter()
        .flatten()
        .min_by(|x, y| {
            local_dev(o, *x, p)
                .partial_cmp(&local_dev(o, *y, p))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
}

/// Moves vertices one at a time onto points with unit-length incident
/// edges until every `|L_i - 1| <= target_band`.
///
/// Vertices are visited in cyclic order from a random phase; `max_iters`
/// bounds the number of visits. A replacement is taken only when it
/// lowers the larger deviation of the two incident edges and the swept
/// triangles `o a a'` and `p a a'` are clear of the rest of the polygon
/// by `eps`, so the knot type is preserved and the maximum deviation
/// never grows.
pub fn equalize_edges<T: Real, R: Rng + ?Sized>(
    poly: &Polygon<T>,
    target_band: T,
    max_iters: usize,
    eps: T,
    rng: &mut R,
) -> Result<Polygon<T>, EquilateralError<T>> {
    let n = poly.len();
    let mut verts = poly.vertices().to_vec();
    let phase = rng.random_range(0..n);
    let deviation = |v: &[Point3<T>]| max_unit_deviation(&Polygon::from_vertices_unchecked(v.to_vec()));
    for k in 0..max_iters {
        if k % n == 0 && deviation(&verts) <= target_band {
            return Ok(Polygon::from_vertices_unchecked(verts));
        }
        let i = (phase + k) % n;
        let (io, ip) = ((i + n - 1) % n, (i + 1) % n);
        let (o, a, p) = (verts[io], verts[i], verts[ip]);
        let Some(a2) = replacement(o, a, p) else { continue };
        if !a2.is_finite() || !(local_dev(o, a2, p) < local_dev(o, a, p)) {
            continue;
        }
        let sweeps = [
            Sweep::anchored(Triangle::new(o, a, a2), [Some(io), None, None]),
            Sweep::anchored(Triangle::new(p, a, a2), [Some(ip), None, None]),
        ];
        if sweep_clearance(&sweeps, &verts, &[i], eps) == Clearance::Clear {
            verts[i] = a2;
        }
    }
    let max_dev = deviation(&verts);
    if max_dev <= target_band {
        Ok(Polygon::from_vertices_unchecked(verts))
    } else {
        Err(EquilateralError::NotConverged {
            best: Box::new(Polygon::from_vertices_unchecked(verts)),
            max_dev,
        })
    }
}

/// Rescales every edge vector to unit length and restores closure by the
/// iteration `e_i <- normalize(e_i - delta / n)` with `delta = sum e_i`,
/// stopping once `|delta| <= tol`.
///
/// The vertices are then rebuilt from the first one and polished vertex by
/// vertex until each computed edge length is within `UNIT_ULPS * 2^-52`
/// of one where rounding allows. The polygon is revalidated at the end;
/// since the displacement is tiny this only fails for inputs that were
/// already nearly singular, in which case nothing is returned.
pub fn normalize_and_close<T: Real>(poly: &Polygon<T>, tol: T, max_iters: usize) -> Result<Polygon<T>, EquilateralError<T>> {
    let n = poly.len();
    let nf = T::from_usize_lossy(n);
    let mut edges = (0..n)
        .map(|i| poly.edge_vector(i).normalized())
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| PolygonError::InvalidPolygon("zero-length edge".into()))?;
    let sum = |e: &[Point3<T>]| e.iter().fold(Point3::zero(), |acc, &v| acc + v);
    let mut delta = sum(&edges);
    let mut iters = 0;
    while delta.norm() > tol {
        if iters == max_iters {
            return Err(EquilateralError::NotClosed { residual: delta.norm() });
        }
        let shift = delta / nf;
        for e in edges.iter_mut() {
            *e = (*e - shift)
                .normalized()
                .ok_or_else(|| PolygonError::InvalidPolygon("edge vector vanished during closure".into()))?;
        }
        delta = sum(&edges);
        iters += 1;
    }
    let mut verts = Vec::with_capacity(n);
    let mut v = poly.vertex(0);
    for e in &edges[..n - 1] {
        verts.push(v);
        v += *e;
    }
    verts.push(v);
    polish(&mut verts);
    let out = Polygon::from_vertices_unchecked(verts);
    out.validate(T::zero())?;
    Ok(out)
}

/// Gauss-Seidel passes of the circle replacement, keeping a move only when
/// it lowers the computed deviation of the two incident edges.
fn polish<T: Real>(verts: &mut [Point3<T>]) {
    let n = verts.len();
    let floor = T::lit(UNIT_ULPS) * T::epsilon();
    for _ in 0..16 {
        let mut moved = false;
        for i in 0..n {
            let (o, a, p) = (verts[(i + n - 1) % n], verts[i], verts[(i + 1) % n]);
            let before = local_dev(o, a, p);
            if before <= floor {
                continue;
            }
            if let Some(a2) = replacement(o, a, p) {
                if local_dev(o, a2, p) < before {
                    verts[i] = a2;
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
}

//! Knot-type fingerprinting.
//!
//! A polygon is projected orthographically along a generic direction, the
//! crossings are read off into a [`DiagramCode`], and the Alexander
//! polynomial is evaluated numerically from the Wirtinger presentation:
//! one row per crossing, one column per arc. The fingerprint is the
//! determinant `|Δ(-1)|` together with `|Δ(t)|` at random points of the
//! unit circle, where the `±t^k` ambiguity of `Δ` disappears.
//!
//! Equal fingerprints do not prove equal knot types; a mismatch does prove
//! that the knot type changed.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point3;
use crate::polygon::Polygon;
use crate::scalar::Real;

/// Scale-relative genericity tolerance for projections: projected
/// vertex-to-edge distances and crossing separations must exceed
/// `GENERIC_TOL * diameter`. It sits well below the absolute clearance kept
/// by the annealing moves, so every polygon they produce has generic
/// directions, and far above double rounding.
pub const GENERIC_TOL: f64 = 1e-12;

/// Crossings of projected edges at angles with `1 / sin` above this are
/// treated as degenerate.
const MAX_CROSSING_AMPLIFY: f64 = 1e9;

/// Default number of unit-circle sample points in a report.
pub const DEFAULT_SAMPLES: usize = 100;

/// Default relative tolerance when comparing magnitudes.
pub const DEFAULT_REL_TOL: f64 = 1e-6;

/// Magnitudes below this compare by absolute difference.
pub const ABS_FLOOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("no generic projection found after {0} attempts")]
    NoGenericProjection(usize),
    #[error("projection direction is not generic: {0}")]
    NotGeneric(&'static str),
    #[error("inconsistent diagram code: {0}")]
    SingularInput(String),
    #[error("|Δ(-1)| = {value} is not within 1e-6 of an integer")]
    NonIntegralDeterminant { value: f64 },
    #[error("|Δ(-1)| = {value} rounds to an even integer, which no knot has")]
    EvenDeterminant { value: f64 },
    #[error("reports were evaluated at different sample points")]
    MismatchedSamples,
}

pub type Result<T, E = VerifyError> = std::result::Result<T, E>;

/// A crossing of an oriented diagram in Wirtinger form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crossing {
    pub over_arc: usize,
    pub under_in_arc: usize,
    pub under_out_arc: usize,
    /// `+1` or `-1`.
    pub sign: i8,
}

/// Planar diagram of a one-component knot. Arcs run between consecutive
/// under-passages, so there are as many arcs as crossings.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramCode {
    pub crossings: Vec<Crossing>,
    pub arc_count: usize,
}

impl DiagramCode {
    pub fn unknot() -> Self {
        Self::default()
    }

    pub fn crossing_count(&self) -> usize {
        self.crossings.len()
    }

    /// Checks the arc bookkeeping: every arc is entered once and left once
    /// by an under-passage.
    pub fn check(&self) -> Result<()> {
        let c = self.crossings.len();
        if self.arc_count != c {
            return Err(VerifyError::SingularInput(format!(
                "{} arcs for {} crossings",
                self.arc_count, c
            )));
        }
        let mut ins = vec![0usize; c];
        let mut outs = vec![0usize; c];
        for (k, x) in self.crossings.iter().enumerate() {
            if x.over_arc >= c || x.under_in_arc >= c || x.under_out_arc >= c {
                return Err(VerifyError::SingularInput(format!(
                    "crossing {k} refers to a missing arc"
                )));
            }
            if x.sign != 1 && x.sign != -1 {
                return Err(VerifyError::SingularInput(format!("crossing {k} has sign {}", x.sign)));
            }
            ins[x.under_in_arc] += 1;
            outs[x.under_out_arc] += 1;
        }
        if ins.iter().chain(&outs).any(|&m| m != 1) {
            return Err(VerifyError::SingularInput(
                "each arc must end at exactly one under-passage and start at exactly one".into(),
            ));
        }
        Ok(())
    }

    /// Wirtinger-derived Alexander matrix at `t` (rows: crossings,
    /// columns: arcs).
    pub fn alexander_matrix(&self, t: Complex64) -> Vec<Vec<Complex64>> {
        let c = self.crossings.len();
        let one = Complex64::new(1.0, 0.0);
        let mut m = vec![vec![Complex64::new(0.0, 0.0); c]; c];
        for (row, x) in m.iter_mut().zip(&self.crossings) {
            row[x.over_arc] += one - t;
            if x.sign > 0 {
                row[x.under_in_arc] += t;
                row[x.under_out_arc] -= one;
            } else {
                row[x.under_in_arc] -= one;
                row[x.under_out_arc] += t;
            }
        }
        m
    }
}

/// Multiplies `x` by `2^e` without overflowing the intermediate power.
fn ldexp(mut x: f64, mut e: i64) -> f64 {
    let step = 2f64.powi(1000);
    while e > 1000 {
        x *= step;
        e -= 1000;
    }
    while e < -1000 {
        x /= step;
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

/// Determinant by Gaussian elimination with partial pivoting, returned as
/// `(m, e)` with value `m 2^e`. Large diagrams multiply thousands of pivots,
/// which would leave the range of `f64` long before the final value does.
pub(crate) fn complex_det(mut m: Vec<Vec<Complex64>>) -> (Complex64, i64) {
    let n = m.len();
    let mut det = Complex64::new(1.0, 0.0);
    let mut exp = 0i64;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].norm().total_cmp(&m[b][col].norm()))
            .expect("non-empty range");
        if m[pivot][col].norm() == 0.0 {
            return (Complex64::new(0.0, 0.0), 0);
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let p = m[col][col];
        det *= p;
        let k = det.norm().log2().floor();
        det *= 2f64.powi(-(k as i32));
        exp += k as i64;
        for r in col + 1..n {
            let f = m[r][col] / p;
            if f.norm() == 0.0 {
                continue;
            }
            let (upper, lower) = m.split_at_mut(r);
            for (dst, src) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *dst -= f * src;
            }
        }
    }
    (det, exp)
}

/// `|Δ(t)|` computed with the given row and column of the Alexander matrix
/// deleted.
pub fn alexander_eval_deleting(code: &DiagramCode, t: Complex64, row: usize, col: usize) -> Result<f64> {
    code.check()?;
    let c = code.crossing_count();
    if c <= 1 {
        return Ok(1.0);
    }
    if row >= c || col >= c {
        return Err(VerifyError::SingularInput(format!(
            "cannot delete row {row} / column {col} of a {c}x{c} matrix"
        )));
    }
    let minor: Vec<Vec<Complex64>> = code
        .alexander_matrix(t)
        .into_iter()
        .enumerate()
        .filter(|&(r, _)| r != row)
        .map(|(_, mut r)| {
            r.remove(col);
            r
        })
        .collect();
    let (det, exp) = complex_det(minor);
    Ok(ldexp(det.norm(), exp))
}

/// `|Δ(t)|` for `|t| = 1`. The empty diagram evaluates to 1.
pub fn alexander_eval(code: &DiagramCode, t: Complex64) -> Result<f64> {
    let c = code.crossing_count();
    alexander_eval_deleting(code, t, c.saturating_sub(1), c.saturating_sub(1))
}

/// Determinant `|Δ(-1)|` rounded to an integer.
pub fn determinant(code: &DiagramCode) -> Result<u64> {
    let value = alexander_eval(code, Complex64::new(-1.0, 0.0))?;
    let rounded = value.round();
    if (value - rounded).abs() >= 1e-6 * value.max(1.0) {
        return Err(VerifyError::NonIntegralDeterminant { value });
    }
    // knot determinants are odd; an even value means the evaluation failed
    if rounded % 2.0 == 0.0 {
        return Err(VerifyError::EvenDeterminant { value });
    }
    Ok(rounded as u64)
}

/// Geometry of one crossing in a projection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingPoint {
    pub over_edge: usize,
    pub under_edge: usize,
    /// Parameters along the over and under edges, in `(0, 1)`.
    pub over_param: f64,
    pub under_param: f64,
    pub point: [f64; 2],
}

/// An orthographic projection with its diagram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// Unit viewing direction; the viewer sits at `+direction`.
    pub direction: Point3<f64>,
    /// Projected vertex positions in the screen basis.
    pub points: Vec<[f64; 2]>,
    pub crossings: Vec<CrossingPoint>,
    pub code: DiagramCode,
}

fn cross2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub2(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn point_segment_distance_2d(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = sub2(b, a);
    let len2 = d[0] * d[0] + d[1] * d[1];
    let s = if len2 > 0.0 {
        ((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2
    } else {
        0.0
    }
    .clamp(0.0, 1.0);
    let q = [a[0] + s * d[0], a[1] + s * d[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Screen basis `(u, v)` with `u × v = direction`.
pub fn screen_basis(direction: Point3<f64>) -> (Point3<f64>, Point3<f64>) {
    let u = direction.any_orthogonal();
    let v = direction.cross(u);
    (u, v)
}

/// Projects along a fixed direction, failing if the projection is not
/// generic.
pub fn project_along<T: Real>(poly: &Polygon<T>, direction: Point3<f64>) -> Result<Projection> {
    let d = direction
        .normalized()
        .ok_or(VerifyError::NotGeneric("zero direction"))?;
    let (u, v) = screen_basis(d);
    let verts: Vec<Point3<f64>> = poly
        .vertices()
        .iter()
        .map(|p| Point3::new(p.x.as_f64(), p.y.as_f64(), p.z.as_f64()))
        .collect();
    let n = verts.len();
    let pts: Vec<[f64; 2]> = verts.iter().map(|p| [p.dot(u), p.dot(v)]).collect();
    let depth: Vec<f64> = verts.iter().map(|p| p.dot(d)).collect();
    let diameter = poly.diameter().as_f64();
    let tol = GENERIC_TOL * diameter.max(f64::MIN_POSITIVE);

    // no vertex may project onto (or near) an edge it is not incident to;
    // this also rules out overlapping and zero-length edge images
    for (k, &pk) in pts.iter().enumerate() {
        for j in 0..n {
            let jn = (j + 1) % n;
            if j == k || jn == k {
                continue;
            }
            if point_segment_distance_2d(pk, pts[j], pts[jn]) < tol {
                return Err(VerifyError::NotGeneric("vertex projects onto an edge"));
            }
        }
    }

    struct Raw {
        edges: [usize; 2],
        params: [f64; 2],
        depth: [f64; 2],
        point: [f64; 2],
    }
    let mut raw = Vec::new();
    for i in 0..n {
        let (p, r) = (pts[i], sub2(pts[(i + 1) % n], pts[i]));
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (q, w) = (pts[j], sub2(pts[(j + 1) % n], pts[j]));
            let denom = cross2(r, w);
            if denom == 0.0 {
                continue;
            }
            let qp = sub2(q, p);
            let s = cross2(qp, w) / denom;
            let t = cross2(qp, r) / denom;
            if !(s > 0.0 && s < 1.0 && t > 0.0 && t < 1.0) {
                continue;
            }
            // 1 / sin of the crossing angle amplifies rounding in s and t
            let amplify = (r[0].hypot(r[1]) * w[0].hypot(w[1])) / denom.abs();
            if amplify > MAX_CROSSING_AMPLIFY {
                return Err(VerifyError::NotGeneric("edge images cross nearly parallel"));
            }
            let zi = depth[i] + s * (depth[(i + 1) % n] - depth[i]);
            let zj = depth[j] + t * (depth[(j + 1) % n] - depth[j]);
            if (zi - zj).abs() < tol * (1.0 + amplify) {
                return Err(VerifyError::NotGeneric("strands meet in space at a crossing"));
            }
            raw.push(Raw {
                edges: [i, j],
                params: [s, t],
                depth: [zi, zj],
                point: [p[0] + s * r[0], p[1] + s * r[1]],
            });
        }
    }

    // passages along the curve: (edge, param, crossing, is_over)
    let mut passages: Vec<(usize, f64, usize, bool)> = Vec::with_capacity(2 * raw.len());
    for (c, x) in raw.iter().enumerate() {
        let over_first = x.depth[0] > x.depth[1];
        passages.push((x.edges[0], x.params[0], c, over_first));
        passages.push((x.edges[1], x.params[1], c, !over_first));
    }
    passages.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    for w in passages.windows(2) {
        if w[0].0 == w[1].0 {
            let len = {
                let e = sub2(pts[(w[0].0 + 1) % n], pts[w[0].0]);
                (e[0] * e[0] + e[1] * e[1]).sqrt()
            };
            if (w[1].1 - w[0].1) * len < tol {
                return Err(VerifyError::NotGeneric("crossings too close together"));
            }
        }
    }

    let c = raw.len();
    let mut crossings = vec![
        Crossing {
            over_arc: 0,
            under_in_arc: 0,
            under_out_arc: 0,
            sign: 1
        };
        c
    ];
    let mut geometry = Vec::with_capacity(c);
    if let Some(first_under) = passages.iter().position(|p| !p.3) {
        let mut arc = 0usize;
        for step in 1..=passages.len() {
            let (_, _, x, over) = passages[(first_under + step) % passages.len()];
            if over {
                crossings[x].over_arc = arc;
            } else {
                crossings[x].under_in_arc = arc;
                arc = (arc + 1) % c;
                crossings[x].under_out_arc = arc;
            }
        }
    }
    for (x, cr) in raw.iter().zip(crossings.iter_mut()) {
        let (over, under) = if x.depth[0] > x.depth[1] { (0, 1) } else { (1, 0) };
        let dir = |e: usize| sub2(pts[(e + 1) % n], pts[e]);
        // right-handed rule with the viewer on the +direction side
        cr.sign = if cross2(dir(x.edges[over]), dir(x.edges[under])) > 0.0 {
            1
        } else {
            -1
        };
        geometry.push(CrossingPoint {
            over_edge: x.edges[over],
            under_edge: x.edges[under],
            over_param: x.params[over],
            under_param: x.params[under],
            point: x.point,
        });
    }
    let code = DiagramCode {
        arc_count: c,
        crossings,
    };
    code.check()?;
    Ok(Projection {
        direction: d,
        points: pts,
        crossings: geometry,
        code,
    })
}

/// Uniformly distributed unit vector.
pub fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> Point3<f64> {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Point3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Draws random directions until the projection is generic.
pub fn project_generic<T: Real, R: Rng + ?Sized>(
    poly: &Polygon<T>,
    rng: &mut R,
    max_attempts: usize,
) -> Result<Projection> {
    for _ in 0..max_attempts {
        match project_along(poly, random_direction(rng)) {
            Ok(p) => return Ok(p),
            Err(VerifyError::NotGeneric(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(VerifyError::NoGenericProjection(max_attempts))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlexanderSample {
    /// Angle of `t` on the unit circle.
    pub theta: f64,
    pub re: f64,
    pub im: f64,
    /// `|Δ(t)|`.
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub determinant: u64,
    pub samples: Vec<AlexanderSample>,
    /// Crossings of the projection used (not a minimal diagram).
    pub crossing_count: usize,
    pub direction: Point3<f64>,
}

/// Draws `count` points uniformly in angle on the unit circle.
pub fn sample_points<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<f64> {
    (0..count)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect()
}

/// Evaluates the fingerprint of a diagram at the given angles.
pub fn report_for_code(code: &DiagramCode, thetas: &[f64], direction: Point3<f64>) -> Result<InvariantReport> {
    let determinant = determinant(code)?;
    let samples = thetas
        .iter()
        .map(|&theta| {
            let t = Complex64::from_polar(1.0, theta);
            alexander_eval(code, t).map(|magnitude| AlexanderSample {
                theta,
                re: t.re,
                im: t.im,
                magnitude,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InvariantReport {
        determinant,
        samples,
        crossing_count: code.crossing_count(),
        direction,
    })
}

/// Projects generically and evaluates the fingerprint. The sample angles
/// are drawn before the projection direction, so two reports made with
/// equally seeded generators share their sample points whatever the
/// polygons are.
pub fn invariant_report<T: Real, R: Rng + ?Sized>(
    poly: &Polygon<T>,
    sample_count: usize,
    rng: &mut R,
) -> Result<InvariantReport> {
    let thetas = sample_points(sample_count.max(1), rng);
    let proj = project_generic(poly, rng, 1000)?;
    report_for_code(&proj.code, &thetas, proj.direction)
}

/// Knot determinant of a polygon from one generic projection.
pub fn polygon_determinant<T: Real, R: Rng + ?Sized>(poly: &Polygon<T>, rng: &mut R) -> Result<u64> {
    let proj = project_generic(poly, rng, 1000)?;
    determinant(&proj.code)
}

/// True when both determinants agree and every magnitude pair agrees
/// within `rel_tol` (absolute [`ABS_FLOOR`] when both are tiny).
pub fn compare_invariants(a: &InvariantReport, b: &InvariantReport, rel_tol: f64) -> Result<bool> {
    if a.samples.len() != b.samples.len()
        || a.samples.iter().zip(&b.samples).any(|(x, y)| x.theta.to_bits() != y.theta.to_bits())
    {
        return Err(VerifyError::MismatchedSamples);
    }
    if a.determinant != b.determinant {
        return Ok(false);
    }
    Ok(a.samples.iter().zip(&b.samples).all(|(x, y)| {
        let (p, q) = (x.magnitude, y.magnitude);
        if p < ABS_FLOOR && q < ABS_FLOOR {
            (p - q).abs() <= ABS_FLOOR
        } else {
            (p - q).abs() <= rel_tol * p.abs().max(q.abs())
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(over: usize, i: usize, o: usize, sign: i8) -> Crossing {
        Crossing {
            over_arc: over,
            under_in_arc: i,
            under_out_arc: o,
            sign,
        }
    }

    #[test]
    fn unknot_evaluates_to_one() {
        let t = Complex64::from_polar(1.0, 0.7);
        assert_eq!(alexander_eval(&DiagramCode::unknot(), t).unwrap(), 1.0);
        assert_eq!(determinant(&DiagramCode::unknot()).unwrap(), 1);
    }

    #[test]
    fn kinked_unknot_evaluates_to_one() {
        // one Reidemeister-I kink: the arc passes over itself
        let code = DiagramCode {
            crossings: vec![x(0, 0, 0, 1)],
            arc_count: 1,
        };
        assert_eq!(determinant(&code).unwrap(), 1);
    }

    #[test]
    fn bookkeeping_errors() {
        let bad = DiagramCode {
            crossings: vec![x(0, 0, 1, 1), x(1, 0, 1, 1)],
            arc_count: 2,
        };
        assert!(matches!(bad.check(), Err(VerifyError::SingularInput(_))));
        let bad = DiagramCode {
            crossings: vec![x(0, 0, 1, 1)],
            arc_count: 2,
        };
        assert!(alexander_eval(&bad, Complex64::new(-1.0, 0.0)).is_err());
    }

    #[test]
    fn determinant_of_singular_matrix_is_zero() {
        let m = vec![
            vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)],
            vec![Complex64::new(2.0, 0.0), Complex64::new(4.0, 0.0)],
        ];
        assert_eq!(complex_det(m).0.norm(), 0.0);
    }

    #[test]
    fn long_pivot_products_stay_in_range() {
        // 0.5^1500 alone underflows; the product with 2^1500 is one
        let n = 3000;
        let mut m = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = Complex64::new(if i < n / 2 { 0.5 } else { 2.0 }, 0.0);
        }
        let (det, exp) = complex_det(m);
        assert_eq!(ldexp(det.norm(), exp), 1.0);
    }

    #[test]
    fn mismatched_samples_are_rejected() {
        let mut rng = rand::rng();
        let code = DiagramCode::unknot();
        let a = report_for_code(&code, &sample_points(5, &mut rng), Point3::new(0.0, 0.0, 1.0)).unwrap();
        let b = report_for_code(&code, &sample_points(5, &mut rng), Point3::new(0.0, 0.0, 1.0)).unwrap();
        assert!(matches!(compare_invariants(&a, &b, 1e-6), Err(VerifyError::MismatchedSamples)));
        assert!(compare_invariants(&a, &a, 1e-6).unwrap());
    }
}

//! Vector arithmetic and conservative clearance predicates.
//!
//! The predicates here guard every off-lattice move. They are one-sided:
//! a [`Clearance::Clear`] verdict certifies that the computed distance is
//! above the tolerance, while a [`Clearance::Blocked`] verdict may be a
//! false alarm near the tolerance. No knot-type-changing move can be
//! accepted through a false `Clear`.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Default clearance tolerance between a swept triangle and the rest of a
/// polygon.
pub const DEFAULT_EPS: f64 = 1e-9;

/// Triangles with area below this have no usable interior: the closest
/// point is then searched on the edges only.
pub const DEGENERATE_AREA: f64 = 1e-18;

/// A point (or displacement) in 3-space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Point3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_f64(x: f64, y: f64, z: f64) -> Self {
        Self::new(T::lit(x), T::lit(y), T::lit(z))
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        // hypot-style scaling is not needed at model scales; keep it cheap
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` for a zero vector.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn midpoint(self, o: Self) -> Self {
        (self + o) * T::lit(0.5)
    }

    /// Rotates `self` by `angle` about the line through `origin` with unit
    /// direction `axis` (Rodrigues' formula).
    pub fn rotate_about(self, origin: Self, axis: Self, angle: T) -> Self {
        let v = self - origin;
        let (s, c) = angle.sin_cos();
        let rotated = v * c + axis.cross(v) * s + axis * (axis.dot(v) * (T::one() - c));
        origin + rotated
    }

    /// Any unit vector orthogonal to `self` (which must be nonzero).
    pub fn any_orthogonal(self) -> Self {
        let (ax, ay, az) = (self.x.abs(), self.y.abs(), self.z.abs());
        let helper = if ax <= ay && ax <= az {
            Self::new(T::one(), T::zero(), T::zero())
        } else if ay <= az {
            Self::new(T::zero(), T::one(), T::zero())
        } else {
            Self::new(T::zero(), T::zero(), T::one())
        };
        self.cross(helper)
            .normalized()
            .expect("orthogonal of a nonzero vector")
    }

    fn lex_cmp(&self, o: &Self) -> Ordering {
        self.x
            .partial_cmp(&o.x)
            .unwrap_or(Ordering::Equal)
            .then(self.y.partial_cmp(&o.y).unwrap_or(Ordering::Equal))
            .then(self.z.partial_cmp(&o.z).unwrap_or(Ordering::Equal))
    }
}

impl<T: Real> Add for Point3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Point3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Point3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> SubAssign for Point3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> Mul<T> for Point3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Div<T> for Point3<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Real> Neg for Point3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Closed segment. May be degenerate (a point).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub start: Point3<T>,
    pub end: Point3<T>,
}

impl<T: Real> Segment<T> {
    pub fn new(start: Point3<T>, end: Point3<T>) -> Self {
        Self { start, end }
    }

    pub fn length(&self) -> T {
        self.start.distance(self.end)
    }

    pub fn at(&self, s: T) -> Point3<T> {
        self.start + (self.end - self.start) * s
    }
    pub fn closest_point(&self, p: Point3<T>) -> Point3<T> {
        let d = self.end - self.start;
        let len2 = d.norm_sq();
        if len2 <= T::zero() {
            return self.start;
        }
        self.at(clamp01((p - self.start).dot(d) / len2))
    }

}

/// Closed solid triangle. Degenerate (collinear) triangles are allowed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triangle<T> {
    pub v0: Point3<T>,
    pub v1: Point3<T>,
    pub v2: Point3<T>,
}

impl<T: Real> Triangle<T> {
    pub fn new(v0: Point3<T>, v1: Point3<T>, v2: Point3<T>) -> Self {
        Self { v0, v1, v2 }
    }

    pub fn area(&self) -> T {
        (self.v1 - self.v0).cross(self.v2 - self.v0).norm() * T::lit(0.5)
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.area() >= T::lit(DEGENERATE_AREA))
    }

    pub fn edges(&self) -> [Segment<T>; 3] {
        [
            Segment::new(self.v0, self.v1),
            Segment::new(self.v1, self.v2),
            Segment::new(self.v2, self.v0),
        ]
    }

    /// Plane through the triangle, built from the two shortest sides.
    /// `None` when those sides are parallel to working precision.
    fn plane(&self) -> Option<Plane<T>> {
        let v = [self.v0, self.v1, self.v2];
        // side i is opposite vertex i
        let len = |i: usize| (v[(i + 1) % 3] - v[(i + 2) % 3]).norm_sq();
        let longest = (0..3)
            .max_by(|&a, &b| len(a).partial_cmp(&len(b)).unwrap_or(Ordering::Equal))
            .unwrap_or(0);
        // the vertex opposite the longest side joins the two shortest sides;
        // cyclic order is kept so the normal orientation matches v0, v1, v2
        let apex = v[longest];
        let e1 = v[(longest + 1) % 3] - apex;
        let e2 = v[(longest + 2) % 3] - apex;
        let c = e1.cross(e2);
        let n = c.normalized()?;
        let scale = v.iter().fold(T::zero(), |m, q| m.max(q.norm()));
        let (l1, l2) = (e1.norm(), e2.norm());
        let tilt = T::lit(4.0) * T::epsilon() * (l1 * l2 + scale * (l1 + l2)) / c.norm();
        Some(Plane { n, apex, tilt, scale, verts: v })
    }

    /// Largest distance from a point of the triangle to its longest side.
    fn width(&self) -> T {
        let longest = self.edges().iter().fold(T::zero(), |m, e| m.max(e.length()));
        if longest > T::zero() {
            T::lit(2.0) * self.area() / longest
        } else {
            T::zero()
        }
    }
}

/// Supporting plane of a triangle with a bound on the angular error of its
/// computed normal, so that plane heights and inside tests can be widened
/// into rigorous one-sided answers.
struct Plane<T> {
    n: Point3<T>,
    apex: Point3<T>,
    tilt: T,
    scale: T,
    verts: [Point3<T>; 3],
}

impl<T: Real> Plane<T> {
    fn rounding(&self, p: Point3<T>) -> T {
        T::lit(8.0) * T::epsilon() * self.scale.max(p.norm())
    }

    fn height(&self, p: Point3<T>) -> T {
        (p - self.apex).dot(self.n)
    }

    /// Bound on `|height(p) - true height|`.
    fn height_error(&self, p: Point3<T>) -> T {
        self.tilt * (p - self.apex).norm() + self.rounding(p)
    }

    /// True unless `p` provably projects outside the triangle.
    fn may_project_inside(&self, p: Point3<T>) -> bool {
        let v = &self.verts;
        let r = self.rounding(p);
        (0..3).all(|k| {
            let (a, b) = (v[k], v[(k + 1) % 3]);
            let side = b - a;
            let slack = side.norm() * (self.tilt * (p - a).norm() + r);
            self.n.cross(side).dot(p - a) >= -slack
        })
    }
}

/// Verdict of a clearance test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Clearance {
    Clear,
    Blocked,
}

impl Clearance {
    pub fn is_clear(self) -> bool {
        self == Clearance::Clear
    }
}

fn clamp01<T: Real>(x: T) -> T {
    if x < T::zero() {
        T::zero()
    } else if x > T::one() {
        T::one()
    } else {
        x
    }
}

pub fn point_segment_distance<T: Real>(p: Point3<T>, seg: &Segment<T>) -> T {
    p.distance(seg.closest_point(p))
}

fn segment_segment_ordered<T: Real>(a: &Segment<T>, b: &Segment<T>) -> T {
    let (p1, q1, p2, q2) = (a.start, a.end, b.start, b.end);
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let aa = d1.norm_sq();
    let e = d2.norm_sq();
    let f = d2.dot(r);
    let zero = T::zero();

    let (s, t) = if aa <= zero && e <= zero {
        (zero, zero)
    } else if aa <= zero {
        (zero, clamp01(f / e))
    } else {
        let c = d1.dot(r);
        if e <= zero {
            (clamp01(-c / aa), zero)
        } else {
            let b = d1.dot(d2);
            let denom = aa * e - b * b;
            let mut s = if denom > zero {
                clamp01((b * f - c * e) / denom)
            } else {
                zero
            };
            let mut t = (b * s + f) / e;
            if t < zero {
                t = zero;
                s = clamp01(-c / aa);
            } else if t > T::one() {
                t = T::one();
                s = clamp01((b - c) / aa);
            }
            (s, t)
        }
    };
    let interior = a.at(s).distance(b.at(t));
    // endpoint candidates repair the near-parallel case where the closed
    // form loses accuracy
    interior
        .min(point_segment_distance(p1, b))
        .min(point_segment_distance(q1, b))
        .min(point_segment_distance(p2, a))
        .min(point_segment_distance(q2, a))
}

/// Minimum distance between two closed segments. Exactly symmetric in its
/// arguments.
pub fn segment_segment_distance<T: Real>(a: &Segment<T>, b: &Segment<T>) -> T {
    let key = |s: &Segment<T>| {
        if s.start.lex_cmp(&s.end) == Ordering::Greater {
            (s.end, s.start)
        } else {
            (s.start, s.end)
        }
    };
    let (ka, kb) = (key(a), key(b));
    let a_first = match ka.0.lex_cmp(&kb.0) {
        Ordering::Equal => ka.1.lex_cmp(&kb.1) != Ordering::Greater,
        o => o == Ordering::Less,
    };
    let ca = Segment::new(ka.0, ka.1);
    let cb = Segment::new(kb.0, kb.1);
    if a_first {
        segment_segment_ordered(&ca, &cb)
    } else {
        segment_segment_ordered(&cb, &ca)
    }
}

fn edge_distance<T: Real>(p: Point3<T>, tri: &Triangle<T>) -> T {
    tri.edges()
        .iter()
        .map(|e| point_segment_distance(p, e))
        .fold(T::infinity(), T::min)
}

/// Closest point of a triangle to `p`.
pub fn closest_point_on_triangle<T: Real>(p: Point3<T>, tri: &Triangle<T>) -> Point3<T> {
    if !tri.is_degenerate() {
        if let Some(plane) = tri.plane() {
            if plane.may_project_inside(p) {
                return p - plane.n * plane.height(p);
            }
        }
    }
    tri.edges()
        .iter()
        .map(|e| {
            let q = e.closest_point(p);
            (p.distance(q), q)
        })
        .fold((T::infinity(), tri.v0), |best, cur| if cur.0 < best.0 { cur } else { best })
        .1
}

fn point_distance_with<T: Real>(p: Point3<T>, plane: &Plane<T>, tri: &Triangle<T>) -> T {
    let edge_min = edge_distance(p, tri);
    if plane.may_project_inside(p) {
        let h = plane.height(p).abs() - plane.height_error(p);
        h.max(T::zero()).min(edge_min)
    } else {
        edge_min
    }
}

/// Lower bound from the edges alone: every point of a triangle lies within
/// its width of the longest side.
fn flat_bound<T: Real>(edge_min: T, tri: &Triangle<T>) -> T {
    let scale = [tri.v0, tri.v1, tri.v2].iter().fold(T::zero(), |m, q| m.max(q.norm()));
    (edge_min - tri.width() - T::lit(16.0) * T::epsilon() * scale).max(T::zero())
}

/// Distance from `p` to the closed solid triangle: the plane distance when
/// `p` projects inside, otherwise the nearest edge.
///
/// Never overstates the true distance. Where the plane is poorly
/// conditioned (nearly collinear corners) the value is a lower bound that
/// may understate it by the conditioning error.
pub fn point_triangle_distance<T: Real>(p: Point3<T>, tri: &Triangle<T>) -> T {
    let flat = flat_bound(edge_distance(p, tri), tri);
    match tri.plane() {
        Some(plane) => point_distance_with(p, &plane, tri).max(flat),
        None => flat,
    }
}

/// Minimum distance between a closed segment and a closed solid triangle,
/// with the same one-sided guarantee as [`point_triangle_distance`].
pub fn segment_triangle_distance<T: Real>(seg: &Segment<T>, tri: &Triangle<T>) -> T {
    let edge_min = tri
        .edges()
        .iter()
        .map(|e| segment_segment_distance(seg, e))
        .fold(T::infinity(), T::min);
    let flat = flat_bound(edge_min, tri);
    let Some(plane) = tri.plane() else {
        return flat;
    };
    let d = edge_min
        .min(point_distance_with(seg.start, &plane, tri))
        .min(point_distance_with(seg.end, &plane, tri));

    // A crossing inside the triangle at X is the only minimiser not covered
    // above. If the segment stays within height H of the plane, such a
    // crossing already forces an endpoint or edge candidate within H.
    let (sp, sq) = (plane.height(seg.start), plane.height(seg.end));
    let (es, eq) = (plane.height_error(seg.start), plane.height_error(seg.end));
    let zero = T::zero();
    let straddles = (sp > zero) != (sq > zero) || sp.abs() <= es || sq.abs() <= eq;
    let reach = (sp.abs() + es).max(sq.abs() + eq) + plane.rounding(seg.start).max(plane.rounding(seg.end));
    if !straddles || d > reach {
        return d.max(flat);
    }
    let rise = (sp - sq).abs();
    let t = if rise > zero { clamp01(sp / (sp - sq)) } else { zero };
    let x = seg.at(t);
    // how far the computed crossing may sit from the true one along the segment
    let slope = rise - es - eq;
    let drift = if slope > zero {
        es.max(eq) / slope * seg.length() + plane.rounding(x)
    } else {
        T::infinity()
    };
    d.min((point_distance_with(x, &plane, tri) - drift).max(zero)).max(flat)
}

/// One-sided clearance test: `Blocked` whenever the segment comes within
/// `eps` of the triangle (including proper intersection).
pub fn segment_triangle_clearance<T: Real>(seg: &Segment<T>, tri: &Triangle<T>, eps: T) -> Clearance {
    let d = segment_triangle_distance(seg, tri);
    // NaN compares false and falls through to Blocked
    if d > eps {
        Clearance::Clear
    } else {
        Clearance::Blocked
    }
}

/// A triangle swept by a proposed move, together with the polygon vertex
/// index of each corner that is an existing polygon vertex.
///
/// `anchors[k]` refers to corner `k` (`v0`, `v1`, `v2`). An edge ending at
/// an anchor touches the triangle there by construction, so it is tested
/// against the sides not incident to that anchor and its free endpoint
/// against the whole triangle. In the plane of the triangle a segment
/// leaving the anchor into the triangle must cross the far side or end
/// inside, so this catches every contact away from the anchor; out of the
/// plane the segment meets the triangle only at the anchor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sweep<T> {
    pub triangle: Triangle<T>,
    pub anchors: [Option<usize>; 3],
}

impl<T: Real> Sweep<T> {
    pub fn new(triangle: Triangle<T>) -> Self {
        Self {
            triangle,
            anchors: [None; 3],
        }
    }

    /// Sweep with per-corner anchors.
    pub fn anchored(triangle: Triangle<T>, anchors: [Option<usize>; 3]) -> Self {
        Self { triangle, anchors }
    }

    fn corner_of(&self, i: usize) -> Option<usize> {
        self.anchors.iter().position(|&a| a == Some(i))
    }

    fn corner(&self, k: usize) -> Point3<T> {
        match k {
            0 => self.triangle.v0,
            1 => self.triangle.v1,
            _ => self.triangle.v2,
        }
    }

    fn edge_clearance(&self, j: usize, k: usize, edge: &Segment<T>, eps: T) -> Clearance {
        match (self.corner_of(j), self.corner_of(k)) {
            // a side of the triangle itself
            (Some(_), Some(_)) => Clearance::Clear,
            (None, None) => segment_triangle_clearance(edge, &self.triangle, eps),
            (Some(c), None) => self.anchored_clearance(c, edge.end, edge, eps),
            (None, Some(c)) => self.anchored_clearance(c, edge.start, edge, eps),
        }
    }

    fn anchored_clearance(&self, corner: usize, free: Point3<T>, edge: &Segment<T>, eps: T) -> Clearance {
        if !(point_triangle_distance(free, &self.triangle) > eps) {
            return Clearance::Blocked;
        }
        let far = Segment::new(self.corner((corner + 1) % 3), self.corner((corner + 2) % 3));
        if segment_segment_distance(edge, &far) > eps {
            Clearance::Clear
        } else {
            Clearance::Blocked
        }
    }
}

/// Tests swept triangles against the closed polygon with the given vertex
/// cycle.
///
/// Edges incident to any `excluded` vertex (vertices moved, created or
/// deleted by the move) are skipped. Edges touching a sweep at an anchor
/// are tested as described on [`Sweep`].
pub fn sweep_clearance<T: Real>(
    sweeps: &[Sweep<T>],
    vertices: &[Point3<T>],
    excluded: &[usize],
    eps: T,
) -> Clearance {
    let n = vertices.len();
    let boxes: Vec<Aabb<T>> = sweeps
        .iter()
        .map(|sw| Aabb::of(&[sw.triangle.v0, sw.triangle.v1, sw.triangle.v2]).padded(eps))
        .collect();
    for j in 0..n {
        let k = (j + 1) % n;
        if excluded.contains(&j) || excluded.contains(&k) {
            continue;
        }
        let edge = Segment::new(vertices[j], vertices[k]);
        let edge_box = Aabb::of(&[edge.start, edge.end]);
        for (sw, bx) in sweeps.iter().zip(&boxes) {
            if bx.disjoint(&edge_box) {
                continue;
            }
            if sw.edge_clearance(j, k, &edge, eps) == Clearance::Blocked {
                return Clearance::Blocked;
            }
        }
    }
    Clearance::Clear
}

/// Axis-aligned box used to skip edges that are certainly far from a sweep.
#[derive(Clone, Copy, Debug)]
struct Aabb<T> {
    lo: [T; 3],
    hi: [T; 3],
}

impl<T: Real> Aabb<T> {
    fn of(points: &[Point3<T>]) -> Self {
        let mut lo = [T::infinity(); 3];
        let mut hi = [T::neg_infinity(); 3];
        for p in points {
            for (a, v) in [p.x, p.y, p.z].into_iter().enumerate() {
                lo[a] = lo[a].min(v);
                hi[a] = hi[a].max(v);
            }
        }
        Self { lo, hi }
    }

    /// Grows the box by twice `eps` plus a rounding allowance, so that a
    /// disjoint verdict implies distance greater than `eps`.
    fn padded(self, eps: T) -> Self {
        let scale = (0..3).fold(T::one(), |m, a| m.max(self.lo[a].abs()).max(self.hi[a].abs()));
        let pad = eps + eps + scale * T::epsilon() * T::lit(8.0);
        Self {
            lo: self.lo.map(|v| v - pad),
            hi: self.hi.map(|v| v + pad),
        }
    }

    fn disjoint(&self, o: &Self) -> bool {
        // NaN coordinates compare false and never count as disjoint
        (0..3).any(|a| o.hi[a] < self.lo[a] || o.lo[a] > self.hi[a])
    }
}

//! Off-lattice annealing: folds, unit-length shrink/grow moves and
//! free-length collapse/inflate moves, each guarded by sweep checks.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{sweep_clearance, Clearance, Point3, Sweep, Triangle};
use crate::polygon::Polygon;
use crate::scalar::Real;
use crate::verify::{polygon_determinant, VerifyError};

/// Tolerance on edge lengths for the unit-stick stage.
pub const UNIT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveKind {
    Fold,
    Shrink,
    Grow,
    Collapse,
    Inflate,
}

impl MoveKind {
    /// Change in edge count when the move is accepted.
    pub fn delta_n(self) -> i64 {
        match self {
            MoveKind::Fold => 0,
            MoveKind::Shrink | MoveKind::Collapse => -1,
            MoveKind::Grow | MoveKind::Inflate => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoveStatus {
    Accepted,
    RejectedPrecondition,
    RejectedTriangleCheck,
    RejectedMetropolis,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MoveOutcome<T> {
    pub status: MoveStatus,
    /// Present iff the move was accepted.
    pub polygon: Option<Polygon<T>>,
}

impl<T> MoveOutcome<T> {
    fn rejected(status: MoveStatus) -> Self {
        Self { status, polygon: None }
    }

    fn accepted(polygon: Polygon<T>) -> Self {
        Self {
            status: MoveStatus::Accepted,
            polygon: Some(polygon),
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.status == MoveStatus::Accepted
    }
}

fn checked<T: Real>(sweeps: &[Sweep<T>], poly: &Polygon<T>, excluded: &[usize], eps: T, next: Vec<Point3<T>>) -> MoveOutcome<T> {
    match sweep_clearance(sweeps, poly.vertices(), excluded, eps) {
        Clearance::Clear => MoveOutcome::accepted(Polygon::from_vertices_unchecked(next)),
        Clearance::Blocked => MoveOutcome::rejected(MoveStatus::RejectedTriangleCheck),
    }
}

fn prev(i: usize, n: usize) -> usize {
    (i + n - 1) % n
}

fn is_unit<T: Real>(len: T) -> bool {
    (len - T::one()).abs() <= T::lit(UNIT_TOL)
}

/// Rotates vertex `i` about the line through its neighbours.
pub fn fold_move<T: Real>(poly: &Polygon<T>, i: usize, angle: T, eps: T) -> MoveOutcome<T> {
    let n = poly.len();
    let i = i % n;
    let (io, ip) = (prev(i, n), (i + 1) % n);
    let (o, a, p) = (poly.vertex(io), poly.vertex(i), poly.vertex(ip));
    let Some(axis) = (p - o).normalized() else {
        return MoveOutcome::rejected(MoveStatus::RejectedPrecondition);
    };
    let a2 = a.rotate_about(o, axis, angle);
    if !a2.is_finite() {
        return MoveOutcome::rejected(MoveStatus::RejectedPrecondition);
    }
    let mut next = poly.vertices().to_vec();
    next[i] = a2;
    if n == 3 {
        // a rigid motion of the whole triangle
        return MoveOutcome::accepted(Polygon::from_vertices_unchecked(next));
    }
    let sweeps = [
        Sweep::anchored(Triangle::new(o, a, a2), [Some(io), None, None]),
        Sweep::anchored(Triangle::new(p, a, a2), [Some(ip), None, None]),
    ];
    checked(&sweeps, poly, &[i], eps, next)
}

/// Apex `c` with `|o - c| = |c - p| = 1` on the side `r` of line `op`, or
/// `None` when `|o - p| > 2`.
pub fn shrink_apex<T: Real>(o: Point3<T>, p: Point3<T>, r: Point3<T>) -> Option<Point3<T>> {
    let d2 = (p - o).norm_sq();
    let four = T::lit(4.0);
    if d2 > four {
        return None;
    }
    let h = (T::one() - d2 / four).max(T::zero()).sqrt();
    Some(o.midpoint(p) + r * h)
}

/// Unit vector orthogonal to `axis` at `angle` around it, measured from
/// `axis.any_orthogonal()`.
pub fn orthogonal_at_angle<T: Real>(axis: Point3<T>, angle: T) -> Option<Point3<T>> {
    let u = axis.normalized()?;
    let e1 = u.any_orthogonal();
    let e2 = u.cross(e1);
    Some(e1 * angle.cos() + e2 * angle.sin())
}

/// Replaces the unit edges `oa`, `ab`, `bp` (with `a` = vertex `i`) by
/// the two unit edges `oc`, `cp`, where `c` lies on the side `r` of `op`.
pub fn shrink_move_toward<T: Real>(poly: &Polygon<T>, i: usize, r: Point3<T>, eps: T) -> MoveOutcome<T> {
    let n = poly.len();
    if n < 4 {
        return MoveOutcome::rejected(MoveStatus::RejectedPrecondition);
    }
    let i = i % n;
    let (io, ib, ip) = (prev(i, n), (i + 1) % n, (i + 2) % n);
    let (o, a, b, p) = (poly.vertex(io), poly.vertex(i), poly.vertex(ib), poly.vertex(ip));
    if ![o.distance(a), a.distance(b), b.distance(p)].into_iter().all(is_unit) {
        return MoveOutcome::rejected(MoveStatus::RejectedPrecondition);
    }
    let Some(c) = shrink_apex(o, p, r) else {
        return MoveOutcome::rejected(MoveStatus::RejectedPrecondition);
    };
    let mut next = Vec::with_capacity(n - 1);
    for (k, &v) in poly.vertices().iter().enumerate() {
        if k == i {
            next.push(c);
        } else if k != ib {
            next.push(v);
        }
    }
    let sweeps = [
        Sweep::anchored(Triangle::new(o, a, c), [Some(io), None, None]),
        Sweep::new(Triangle::new(a, b, c)),
        Sweep::anchored(Triangle::new(b, c, p), [None, None, Some(ip)]),
    ];
    checked(&sweeps, poly, &[i, ib], eps, next)
}

/// [`shrink_move_toward`] with the apex direction chosen by an angle
/// around `op`.
pub fn shrink_move<T: Real>(poly: &Polygon<T>, i: usize, plane_angle: T, eps: T) -> MoveOutcome<T> {
    let n = poly.len();
    let o = poly.vertex(prev(i % n, n));
    let p = poly.vertex(i % n + 2);
    match orthogonal_at_angle(p - o, plane_angle) {
        Some(r) => shrink_move_toward(poly, i, r, eps),
        None => MoveOutcome::rejected(MoveStatus::RejectedPrecondition),
    }
}

/// Trapezoid vertices `(a, b)` replacing `c` in `o, c, p`, or `None` if
/// the points are collinear or `|o - p| > 3`.
pub fn grow_trapezoid<T: Real>(o: Point3<T>, c: Point3<T>, p: Point3<T>) -> Option<(Point3<T>, Point3<T>)> {
    let d = o.distance(p);
    let three = T::lit(3.0);
    if d > three {
        return None;
    }
    let u = (p - o).normalized()?;
    let oc = c - o;
    let w_raw = oc - u * oc.dot(u);
    // collinear within rounding of the inputs
    if w_raw.norm() <= T::lit(1e-12) * oc.norm().max(d).max(T::one()) {
        return None;
    }
    let w = w_raw.normalized()?;
    let two = T::lit(2.0);
    let s = (d - T::one()) / two;
    let h = (T::one() - s * s).max(T::zero()).sqrt();
    let a = o + u * s + w * h;
    Some((a, a + u))
}

/// Replaces vertex `i` = `c` by two vertices so that `o, a, b, p` has three
/// unit edges.
pub fn grow_move<T: Real>(poly: &Polygon<T>, i: usize, eps: T) -> MoveOutcome<T> {
    let n = poly.len();
    let i = i % n;
    let (io, ip) = (prev(i, n), (i + 1) % n);
    let (o, c, p) = (poly.vertex(io), poly.vertex(i), poly.vertex(ip));
    let Some((a, b)) = grow_trapezoid(o, c, p) else {
        return MoveOutcome::rejected(MoveStatus::RejectedPrecondition);
    };
    let mut next = Vec::with_capacity(n + 1);
    for (k, &v) in poly.vertices().iter().enumerate() {
        if k == i {
            next.push(a);
            next.push(b);
        } else {
            next.push(v);
        }
    }
    let sweeps = [
        Sweep::anchored(Triangle::new(o, a, c), [Some(io), None, None]),
        Sweep::new(Triangle::new(a, b, c)),
        Sweep::anchored(Triangle::new(b, c, p), [None, None, Some(ip)]),
    ];
    checked(&sweeps, poly, &[i], eps, next)
}

/// Deletes vertex `i` unless its neighbours are within `sqrt(1/8)`.
pub fn collapse_move<T: Real>(poly: &Polygon<T>, i: usize, eps: T) -> MoveOutcome<T> {
    let n = poly.len();
    if n < 4 {
        return MoveOutcome::rejected(MoveStatus::RejectedPrecondition);
    }
    let i = i % n;
    let (io, ip) = (prev(i, n), (i + 1) % n);
    let (o, c, p) = (poly.vertex(io), poly.vertex(i), poly.vertex(ip));
    if (p - o).norm_sq() <= T::lit(0.125) {
        return MoveOutcome::rejected(MoveStatus::RejectedPrecondition);
    }
    let mut next = poly.vertices().to_vec();
    next.remove(i);
    let sweeps = [Sweep::anchored(Triangle::new(o, c, p), [Some(io), None, Some(ip)])];
    checked(&sweeps, poly, &[i], eps, next)
}

/// Inserts `c = o + t (p - o) + u r` into edge `i` from `o` to `p`.
pub fn inflate_move<T: Real>(poly: &Polygon<T>, i: usize, r: Point3<T>, t: T, u: T, eps: T) -> MoveOutcome<T> {
    let n = poly.len();
    let i = i % n;
    let ip = (i + 1) % n;
    let (o, p) = (poly.vertex(i), poly.vertex(ip));
    let e = p - o;
    let half = T::lit(0.5);
    let tol = T::lit(1e-9);
    if !(t >= -half && t <= T::lit(1.5) && u >= T::zero() && u <= T::one())
        || (r.norm() - T::one()).abs() > tol
        || r.dot(e).abs() > tol * e.norm()
    {
        return MoveOutcome::rejected(MoveStatus::RejectedPrecondition);
    }
    let offset = r * u;
    if offset.norm() <= T::lit(1e-12) * e.norm().max(T::one()) {
        return MoveOutcome::rejected(MoveStatus::RejectedPrecondition);
    }
    let c = o + e * t + offset;
    let mut next = poly.vertices().to_vec();
    next.insert(i + 1, c);
    let sweeps = [Sweep::anchored(Triangle::new(o, p, c), [Some(i), Some(ip), None])];
    checked(&sweeps, poly, &[], eps, next)
}

/// Which family of length-changing moves a stage uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageKind {
    /// Fold, shrink, grow; all edges stay unit length.
    Unit,
    /// Fold, collapse, inflate; edge lengths are free.
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageConfig<T> {
    /// Probabilities of the neutral, decreasing and increasing move.
    pub move_weights: [f64; 3],
    pub p_grow: f64,
    pub eps: T,
    pub max_iters: u64,
    pub time_budget: Option<Duration>,
    /// Check the determinant every this many accepted moves (0 disables).
    pub verify_every: u64,
    /// Stop as soon as the best edge count reaches this value.
    pub target_edges: Option<usize>,
}

impl<T: Real> Default for StageConfig<T> {
    fn default() -> Self {
        Self {
            move_weights: [0.6, 0.3, 0.1],
            p_grow: 0.05,
            eps: T::lit(crate::geom::DEFAULT_EPS),
            max_iters: 1_000_000,
            time_budget: None,
            verify_every: 1_000,
            target_edges: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("invalid stage configuration: {0}")]
    Config(String),
    #[error("edge {edge} has length {length}, expected 1")]
    NotUnit { edge: usize, length: f64 },
    #[error("determinant changed from {expected} to {found} after {accepted} accepted moves")]
    KnotTypeChanged { expected: u64, found: u64, accepted: u64 },
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub iterations: u64,
    pub accepted: u64,
    pub rejected_precondition: u64,
    pub rejected_triangle: u64,
    pub rejected_metropolis: u64,
    pub initial_edges: usize,
    pub best_edges: usize,
    pub determinant_checks: u64,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct StageRun<T> {
    /// Polygon with the fewest edges seen during the run.
    pub best: Polygon<T>,
    pub stats: StageStats,
}

/// One randomly drawn proposal of the given stage.
pub fn random_move<T: Real, R: Rng + ?Sized>(
    poly: &Polygon<T>,
    kind: StageKind,
    cfg: &StageConfig<T>,
    rng: &mut R,
) -> (MoveKind, MoveOutcome<T>) {
    let n = poly.len();
    let i = rng.random_range(0..n);
    let w = cfg.move_weights;
    let x = rng.random::<f64>() * (w[0] + w[1] + w[2]);
    let family = if x < w[0] {
        0
    } else if x < w[0] + w[1] {
        1
    } else {
        2
    };
    let move_kind = match (kind, family) {
        (_, 0) => MoveKind::Fold,
        (StageKind::Unit, 1) => MoveKind::Shrink,
        (StageKind::Unit, _) => MoveKind::Grow,
        (StageKind::Free, 1) => MoveKind::Collapse,
        (StageKind::Free, _) => MoveKind::Inflate,
    };
    if move_kind.delta_n() > 0 && rng.random::<f64>() >= cfg.p_grow {
        return (move_kind, MoveOutcome::rejected(MoveStatus::RejectedMetropolis));
    }
    let pi = std::f64::consts::PI;
    let outcome = match move_kind {
        MoveKind::Fold => {
            // uniform in (-pi, pi]
            let angle = pi - rng.random::<f64>() * 2.0 * pi;
            fold_move(poly, i, T::lit(angle), cfg.eps)
        }
        MoveKind::Shrink => {
            let angle = rng.random::<f64>() * 2.0 * pi;
            shrink_move(poly, i, T::lit(angle), cfg.eps)
        }
        MoveKind::Grow => grow_move(poly, i, cfg.eps),
        MoveKind::Collapse => collapse_move(poly, i, cfg.eps),
        MoveKind::Inflate => {
            let e = poly.edge_vector(i);
            let angle = rng.random::<f64>() * 2.0 * pi;
            let t = rng.random_range(-0.5..=1.5);
            let u = rng.random::<f64>();
            match orthogonal_at_angle(e, T::lit(angle)) {
                Some(r) => inflate_move(poly, i, r, T::lit(t), T::lit(u), cfg.eps),
                None => MoveOutcome::rejected(MoveStatus::RejectedPrecondition),
            }
        }
    };
    (move_kind, outcome)
}

fn check_config<T: Real>(cfg: &StageConfig<T>) -> Result<(), StageError> {
    if !(0.0..1.0).contains(&cfg.p_grow) {
        return Err(StageError::Config(format!("p_grow must lie in [0, 1), got {}", cfg.p_grow)));
    }
    let w = cfg.move_weights;
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
        return Err(StageError::Config(format!("bad move weights {w:?}")));
    }
    if !(cfg.eps > T::zero()) {
        return Err(StageError::Config("eps must be positive".into()));
    }
    Ok(())
}

/// Anneals with the moves of `kind`. Edge-count decreases and folds are
/// always tried; increases pass with probability `p_grow`.
pub fn run_stage<T: Real, R: Rng + ?Sized>(
    poly: &Polygon<T>,
    kind: StageKind,
    cfg: &StageConfig<T>,
    rng: &mut R,
) -> Result<StageRun<T>, StageError> {
    check_config(cfg)?;
    let start = Instant::now();
    let mut current = poly.clone();
    let mut best = poly.clone();
    let mut verify_rng = ChaCha8Rng::seed_from_u64(rng.random());
    let mut stats = StageStats {
        initial_edges: poly.len(),
        best_edges: poly.len(),
        ..Default::default()
    };
    let expected = if cfg.verify_every > 0 {
        stats.determinant_checks += 1;
        Some(polygon_determinant(&current, &mut verify_rng)?)
    } else {
        None
    };
    while stats.iterations < cfg.max_iters {
        if cfg.target_edges.is_some_and(|t| best.len() <= t) {
            break;
        }
        if stats.iterations.is_multiple_of(256) && cfg.time_budget.is_some_and(|b| start.elapsed() >= b) {
            break;
        }
        stats.iterations += 1;
        let (_, outcome) = random_move(&current, kind, cfg, rng);
        match outcome.status {
            MoveStatus::Accepted => {}
            MoveStatus::RejectedPrecondition => {
                stats.rejected_precondition += 1;
                continue;
            }
            MoveStatus::RejectedTriangleCheck => {
                stats.rejected_triangle += 1;
                continue;
            }
            MoveStatus::RejectedMetropolis => {
                stats.rejected_metropolis += 1;
                continue;
            }
        }
        current = outcome.polygon.expect("accepted move carries a polygon");
        stats.accepted += 1;
        if current.len() < best.len() {
            best = current.clone();
        }
        if let Some(expected) = expected {
            if stats.accepted.is_multiple_of(cfg.verify_every) {
                stats.determinant_checks += 1;
                let found = polygon_determinant(&current, &mut verify_rng)?;
                if found != expected {
                    return Err(StageError::KnotTypeChanged {
                        expected,
                        found,
                        accepted: stats.accepted,
                    });
                }
            }
        }
    }
    stats.best_edges = best.len();
    stats.elapsed = start.elapsed();
    Ok(StageRun { best, stats })
}

/// Unit-stick stage. Every edge of the input must have unit length.
pub fn run_unit_stage<T: Real, R: Rng + ?Sized>(
    poly: &Polygon<T>,
    cfg: &StageConfig<T>,
    rng: &mut R,
) -> Result<StageRun<T>, StageError> {
    if let Some((edge, len)) = poly.edge_lengths().into_iter().enumerate().find(|(_, l)| !is_unit(*l)) {
        return Err(StageError::NotUnit {
            edge,
            length: len.as_f64(),
        });
    }
    run_stage(poly, StageKind::Unit, cfg, rng)
}

/// Free-length stage.
pub fn run_free_stage<T: Real, R: Rng + ?Sized>(
    poly: &Polygon<T>,
    cfg: &StageConfig<T>,
    rng: &mut R,
) -> Result<StageRun<T>, StageError> {
    run_stage(poly, StageKind::Free, cfg, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    type P = Point3<f64>;

    fn p(x: f64, y: f64, z: f64) -> P {
        P::new(x, y, z)
    }

    fn square() -> Polygon<f64> {
        Polygon::new(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(1.0, 1.0, 0.0), p(0.0, 1.0, 0.0)]).unwrap()
    }

    #[test]
    fn zero_fold_is_identity() {
        let out = fold_move(&square(), 1, 0.0, 1e-9);
        assert!(out.is_accepted());
        assert_eq!(out.polygon.unwrap(), square());
    }

    #[test]
    fn half_turn_fold_of_square_is_blocked() {
        // a = (1,0,0) rotated about the diagonal lands on (0,1,0)
        let out = fold_move(&square(), 1, std::f64::consts::PI, 1e-9);
        assert_eq!(out.status, MoveStatus::RejectedTriangleCheck);
    }

    #[test]
    fn small_fold_of_convex_quadrilateral_is_accepted() {
        let out = fold_move(&square(), 1, std::f64::consts::FRAC_PI_4, 1e-9);
        assert!(out.is_accepted());
        let q = out.polygon.unwrap();
        assert!((q.vertex(0).distance(q.vertex(1)) - 1.0).abs() < 1e-12);
        assert!((q.vertex(1).distance(q.vertex(2)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shrink_apex_examples() {
        let c = shrink_apex(p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0)).unwrap();
        assert!((c.x - 0.5).abs() < 1e-15 && (c.y - 3f64.sqrt() / 2.0).abs() < 1e-15 && c.z == 0.0);
        let c = shrink_apex(p(0.0, 0.0, 0.0), p(2.0, 0.0, 0.0), p(0.0, 1.0, 0.0)).unwrap();
        assert_eq!(c, p(1.0, 0.0, 0.0));
        assert!(shrink_apex(p(0.0, 0.0, 0.0), p(3.0, 0.0, 0.0), p(0.0, 1.0, 0.0)).is_none());
    }

    #[test]
    fn shrink_far_neighbours_is_rejected() {
        let zigzag = Polygon::new(vec![
            p(0.0, 0.0, 0.0),
            p(1.0, 0.0, 0.0),
            p(2.0, 0.0, 0.0),
            p(3.0, 0.0, 0.0),
            p(1.5, -2.0, 0.0),
        ])
        .unwrap();
        assert_eq!(shrink_move(&zigzag, 1, 0.3, 1e-9).status, MoveStatus::RejectedPrecondition);
    }

    #[test]
    fn shrink_square_outward_gives_unit_triangle() {
        let out = shrink_move_toward(&square(), 1, p(1.0, 0.0, 0.0), 1e-9);
        assert!(out.is_accepted());
        let t = out.polygon.unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.edge_lengths().iter().all(|l| (l - 1.0).abs() < 1e-12));
        // inward the apex crosses the untouched edge
        assert_eq!(
            shrink_move_toward(&square(), 1, p(-1.0, 0.0, 0.0), 1e-9).status,
            MoveStatus::RejectedTriangleCheck
        );
    }

    #[test]
    fn grow_trapezoid_examples() {
        let (a, b) = grow_trapezoid(p(0.0, 0.0, 0.0), p(0.5, 0.8, 0.0), p(1.0, 0.0, 0.0)).unwrap();
        assert!(a.distance(p(0.0, 1.0, 0.0)) < 1e-15 && b.distance(p(1.0, 1.0, 0.0)) < 1e-15);
        let (a, b) = grow_trapezoid(p(0.0, 0.0, 0.0), p(1.5, 0.1, 0.0), p(3.0, 0.0, 0.0)).unwrap();
        assert!(a.distance(p(1.0, 0.0, 0.0)) < 1e-15 && b.distance(p(2.0, 0.0, 0.0)) < 1e-15);
        assert!(grow_trapezoid(p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(2.0, 0.0, 0.0)).is_none());
        assert!(grow_trapezoid(p(0.0, 0.0, 0.0), p(1.0, 1.0, 0.0), p(3.5, 0.0, 0.0)).is_none());
    }

    #[test]
    fn collapse_examples() {
        let close = Polygon::new(vec![p(0.0, 0.0, 0.0), p(0.15, 1.0, 0.0), p(0.3, 0.0, 0.0), p(0.15, -1.0, 0.0)]).unwrap();
        assert_eq!(collapse_move(&close, 1, 1e-9).status, MoveStatus::RejectedPrecondition);
        let line = Polygon::new(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(2.0, 0.0, 0.0), p(1.0, 5.0, 0.0)]).unwrap();
        let out = collapse_move(&line, 1, 1e-9);
        assert!(out.is_accepted());
        assert_eq!(out.polygon.unwrap().len(), 3);
        let tri = Polygon::new(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0)]).unwrap();
        assert_eq!(collapse_move(&tri, 0, 1e-9).status, MoveStatus::RejectedPrecondition);
    }

    #[test]
    fn inflate_examples() {
        let tri = Polygon::new(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, -1.0, 0.0)]).unwrap();
        let out = inflate_move(&tri, 0, p(0.0, 0.0, 1.0), 0.5, 1.0, 1e-9);
        assert!(out.is_accepted());
        let q = out.polygon.unwrap();
        assert_eq!(q.len(), 4);
        assert_eq!(q.vertex(1), p(0.5, 0.0, 1.0));
        assert_eq!(
            inflate_move(&tri, 0, p(0.0, 0.0, 1.0), 0.5, 0.0, 1e-9).status,
            MoveStatus::RejectedPrecondition
        );
        assert_eq!(
            inflate_move(&tri, 0, p(1.0, 0.0, 0.0), 0.5, 1.0, 1e-9).status,
            MoveStatus::RejectedPrecondition
        );
    }

    #[test]
    fn unit_stage_rejects_non_unit_input() {
        let big = square().scaled(2.0);
        let err = run_unit_stage(&big, &StageConfig::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(StageError::NotUnit { .. })));
    }

    #[test]
    fn unit_stage_shrinks_square_to_triangle() {
        let cfg = StageConfig {
            p_grow: 0.0,
            max_iters: 10_000,
            ..Default::default()
        };
        let run = run_unit_stage(&square(), &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(run.best.len(), 3);
        assert!(run.best.edge_lengths().iter().all(|l| (l - 1.0).abs() < 1e-9));
    }

    #[test]
    fn free_stage_keeps_triangle() {
        let tri = Polygon::new(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0)]).unwrap();
        let cfg = StageConfig {
            p_grow: 0.0,
            max_iters: 1_000,
            ..Default::default()
        };
        let run = run_free_stage(&tri, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(run.best.len(), 3);
        assert_eq!(run.stats.rejected_triangle, 0);
        assert_eq!(
            run.stats.accepted,
            run.stats.iterations - run.stats.rejected_precondition - run.stats.rejected_metropolis
        );
    }

    #[test]
    fn f32_stage_runs() {
        let sq = square().cast::<f32>();
        let cfg = StageConfig::<f32> {
            p_grow: 0.0,
            max_iters: 1_000,
            eps: 1e-5,
            verify_every: 0,
            ..Default::default()
        };
        let run = run_free_stage(&sq, &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(run.best.len(), 3);
    }
}

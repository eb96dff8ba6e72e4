//! Shared test oracles and instance generators.
#![allow(dead_code)]

use rand::Rng;
use stickmin::geom::{Point3, Segment, Triangle};

pub type P = Point3<f64>;

pub fn p(x: f64, y: f64, z: f64) -> P {
    P::new(x, y, z)
}

fn tri_point(t: &Triangle<f64>, u: f64, v: f64) -> P {
    t.v0 + (t.v1 - t.v0) * u + (t.v2 - t.v0) * v
}

fn eval(seg: &Segment<f64>, tri: &Triangle<f64>, x: [f64; 3]) -> f64 {
    seg.at(x[0]).distance(tri_point(tri, x[1], x[2]))
}

fn feasible(x: [f64; 3]) -> bool {
    (0.0..=1.0).contains(&x[0]) && x[1] >= 0.0 && x[2] >= 0.0 && x[1] + x[2] <= 1.0
}

/// Brute-force distance between a segment and a solid triangle: a grid over
/// (segment parameter, barycentric u, v) followed by pattern search from
/// the best grid points and from any `hints`. Every value it reports is
/// attained by an actual pair of points, so it never understates the
/// distance by more than rounding.
const MAX_EVALS: usize = 200_000;

/// Separation of the bounding boxes: a cheap lower bound on the distance.
pub fn box_gap(seg: &Segment<f64>, tri: &Triangle<f64>) -> f64 {
    let axis = |f: fn(&P) -> f64| {
        let s = [f(&seg.start), f(&seg.end)];
        let t = [f(&tri.v0), f(&tri.v1), f(&tri.v2)];
        let (slo, shi) = (s[0].min(s[1]), s[0].max(s[1]));
        let tlo = t.iter().cloned().fold(f64::INFINITY, f64::min);
        let thi = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (tlo - shi).max(slo - thi).max(0.0)
    };
    let (a, b, c) = (axis(|q| q.x), axis(|q| q.y), axis(|q| q.z));
    (a * a + b * b + c * c).sqrt()
}

pub fn oracle_distance(seg: &Segment<f64>, tri: &Triangle<f64>, grid: usize, hints: &[[f64; 3]]) -> f64 {
    let mut starts: Vec<(f64, [f64; 3])> = Vec::new();
    let g = grid as f64;
    for i in 0..=grid {
        for j in 0..=grid {
            for k in 0..=(grid - j) {
                let x = [i as f64 / g, j as f64 / g, k as f64 / g];
                starts.push((eval(seg, tri, x), x));
            }
        }
    }
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    starts.truncate(4);
    for x in face_candidates(seg, tri) {
        starts.push((eval(seg, tri, x), x));
    }
    for h in hints {
        if feasible(*h) {
            starts.push((eval(seg, tri, *h), *h));
        }
    }
    let mut dirs = Vec::with_capacity(26);
    for a in -1..=1 {
        for b in -1..=1 {
            for c in -1..=1 {
                if (a, b, c) != (0, 0, 0) {
                    dirs.push([a as f64, b as f64, c as f64]);
                }
            }
        }
    }
    let mut best = f64::INFINITY;
    for (mut f, mut x) in starts {
        let mut step = 1.0 / g;
        let mut evals = 0;
        while step > 1e-17 && evals < MAX_EVALS {
            let mut improved = false;
            for d in &dirs {
                let y = [x[0] + d[0] * step, x[1] + d[1] * step, x[2] + d[2] * step];
                if !feasible(y) {
                    continue;
                }
                evals += 1;
                let fy = eval(seg, tri, y);
                if fy < f {
                    f = fy;
                    x = y;
                    improved = true;
                }
            }
            // expand along valleys, contract otherwise
            step = if improved { (step * 2.0).min(1.0 / g) } else { step * 0.5 };
        }
        best = best.min(f);
    }
    best
}

/// Stationary points of the squared distance on every face of the
/// parameter prism, clamped into it.
fn face_candidates(seg: &Segment<f64>, tri: &Triangle<f64>) -> Vec<[f64; 3]> {
    // x = (s, u, v) maps to seg(s) - tri(u, v) = c + s*a - u*b1 - v*b2
    let a = seg.end - seg.start;
    let (b1, b2) = (tri.v1 - tri.v0, tri.v2 - tri.v0);
    let c = seg.start - tri.v0;
    // each face: x = base + sum_k y_k * dir_k
    let seg_faces: [(f64, Option<f64>); 3] = [(0.0, Some(1.0)), (0.0, None), (1.0, None)];
    let tri_faces: [([f64; 2], Vec<[f64; 2]>); 7] = [
        ([0.0, 0.0], vec![[1.0, 0.0], [0.0, 1.0]]),
        ([0.0, 0.0], vec![[1.0, 0.0]]),
        ([0.0, 0.0], vec![[0.0, 1.0]]),
        ([1.0, 0.0], vec![[-1.0, 1.0]]),
        ([0.0, 0.0], vec![]),
        ([1.0, 0.0], vec![]),
        ([0.0, 1.0], vec![]),
    ];
    let mut out = Vec::new();
    for &(s0, s_dir) in &seg_faces {
        for (uv0, uv_dirs) in &tri_faces {
            let mut base = [s0, uv0[0], uv0[1]];
            let mut dirs: Vec<[f64; 3]> = uv_dirs.iter().map(|d| [0.0, d[0], d[1]]).collect();
            if let Some(sd) = s_dir {
                dirs.push([sd, 0.0, 0.0]);
            }
            let image = |x: [f64; 3]| a * x[0] - b1 * x[1] - b2 * x[2];
            let r0 = c + image(base);
            let cols: Vec<P> = dirs.iter().map(|d| image(*d)).collect();
            if let Some(y) = least_squares(&cols, r0) {
                for (d, yk) in dirs.iter().zip(&y) {
                    for i in 0..3 {
                        base[i] += d[i] * yk;
                    }
                }
            }
            out.push(clamp_prism(base));
        }
    }
    out
}

/// Minimises |r0 + sum y_k cols_k| by Gaussian elimination on the normal
/// equations with partial pivoting.
fn least_squares(cols: &[P], r0: P) -> Option<Vec<f64>> {
    let k = cols.len();
    let mut m: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut row: Vec<f64> = (0..k).map(|j| cols[i].dot(cols[j])).collect();
            row.push(-cols[i].dot(r0));
            row
        })
        .collect();
    for col in 0..k {
        let piv = (col..k).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for r in col + 1..k {
            let f = m[r][col] / m[col][col];
            let pivot = m[col].clone();
            for (x, p) in m[r][col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * p;
            }
        }
    }
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| m[i][j] * y[j]).sum();
        y[i] = (m[i][k] - s) / m[i][i];
    }
    y.iter().all(|v| v.is_finite()).then_some(y)
}

fn clamp_prism(x: [f64; 3]) -> [f64; 3] {
    let s = x[0].clamp(0.0, 1.0);
    let (mut u, mut v) = (x[1].max(0.0), x[2].max(0.0));
    let t = u + v;
    if t > 1.0 {
        u /= t;
        v /= t;
    }
    [s, u, v]
}

pub fn random_unit<R: Rng>(rng: &mut R) -> P {
    loop {
        let v = p(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_point<R: Rng>(rng: &mut R, scale: f64) -> P {
    p(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

/// A triangle from one of several shapes: generic, sliver, tiny, large
/// coordinates far from the origin, or degenerate.
pub fn random_triangle<R: Rng>(rng: &mut R) -> Triangle<f64> {
    let offset = if rng.random_bool(0.3) {
        random_point(rng, 100.0)
    } else {
        P::zero()
    };
    let (a, b, c) = match rng.random_range(0..5) {
        0 => (random_point(rng, 1.0), random_point(rng, 1.0), random_point(rng, 1.0)),
        1 => {
            // long sliver with a short base
            let a = random_point(rng, 1.0);
            let far = a + random_unit(rng) * rng.random_range(1.0..60.0);
            let b = a + random_unit(rng) * 10f64.powf(rng.random_range(-8.0..-1.0));
            (far, a, b)
        }
        2 => {
            let a = random_point(rng, 1.0);
            let s = 10f64.powf(rng.random_range(-7.0..-3.0));
            (a, a + random_unit(rng) * s, a + random_unit(rng) * s)
        }
        3 => {
            // nearly collinear
            let a = random_point(rng, 1.0);
            let d = random_unit(rng);
            let c = a + d * rng.random_range(0.5..3.0) + random_unit(rng) * 10f64.powf(rng.random_range(-12.0..-6.0));
            (a, a + d * rng.random_range(0.1..0.5), c)
        }
        _ => {
            // exactly degenerate
            let a = random_point(rng, 1.0);
            let d = random_unit(rng);
            (a, a + d * rng.random_range(0.1..1.0), a + d * rng.random_range(1.0..2.0))
        }
    };
    Triangle::new(a + offset, b + offset, c + offset)
}

pub struct Instance {
    pub seg: Segment<f64>,
    pub tri: Triangle<f64>,
    /// Known near pair `(s, u, v)` when the instance was built around one.
    pub hint: Option<[f64; 3]>,
}

/// Segment passing within `gap` of a chosen point of the triangle.
pub fn near_instance<R: Rng>(rng: &mut R, gap: f64) -> Instance {
    let tri = random_triangle(rng);
    let (mut u, mut v) = match rng.random_range(0..4) {
        0 => (0.0, 0.0),
        1 => (rng.random::<f64>(), 0.0),
        2 => {
            let u = rng.random::<f64>();
            (u, 1.0 - u)
        }
        _ => (rng.random::<f64>(), rng.random::<f64>()),
    };
    if u + v > 1.0 {
        (u, v) = (1.0 - u, 1.0 - v);
    }
    let q = tri_point(&tri, u, v);
    let x = q + random_unit(rng) * gap;
    let dir = if rng.random_bool(0.3) {
        // close to the triangle's plane
        let n = (tri.v1 - tri.v0).cross(tri.v2 - tri.v0).normalized().unwrap_or(p(0.0, 0.0, 1.0));
        let w = random_unit(rng);
        (w - n * w.dot(n) + n * 10f64.powf(rng.random_range(-12.0..-2.0)))
            .normalized()
            .unwrap_or(w)
    } else {
        random_unit(rng)
    };
    let len = 10f64.powf(rng.random_range(-3.0..1.5));
    let s = match rng.random_range(0..3) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random::<f64>(),
    };
    let start = x - dir * (s * len);
    let seg = Segment::new(start, start + dir * len);
    Instance {
        seg,
        tri,
        hint: Some([s, u, v]),
    }
}

pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let tri = random_triangle(rng);
    let c = tri.v0;
    let a = c + random_point(rng, 2.0);
    let b = a + random_point(rng, 2.0);
    Instance {
        seg: Segment::new(a, b),
        tri,
        hint: None,
    }
}

/// Mix of random, near-contact, and just-outside instances for `eps`.
pub fn mixed_instance<R: Rng>(rng: &mut R, eps: f64) -> Instance {
    match rng.random_range(0..10) {
        0..=2 => random_instance(rng),
        3..=6 => {
            let gap = eps * rng.random_range(0.0..0.999);
            near_instance(rng, gap)
        }
        7 => near_instance(rng, 0.0),
        _ => {
            let gap = eps * rng.random_range(1.001..3.0);
            near_instance(rng, gap)
        }
    }
}

/// Checks the postconditions of one accepted off-lattice move.
pub fn move_contract(
    before: &stickmin::polygon::Polygon<f64>,
    kind: stickmin::stick::MoveKind,
    stage: stickmin::stick::StageKind,
    after: &stickmin::polygon::Polygon<f64>,
) -> Result<(), String> {
    use stickmin::stick::{MoveKind, StageKind};
    let expected = before.len() as i64 + kind.delta_n();
    if after.len() as i64 != expected {
        return Err(format!("{kind:?}: {} -> {} edges", before.len(), after.len()));
    }
    after.validate(0.0).map_err(|e| format!("{kind:?}: {e}"))?;
    let lengths = after.edge_lengths();
    if stage == StageKind::Unit {
        if let Some(l) = lengths.iter().find(|l| (**l - 1.0).abs() > 1e-12) {
            return Err(format!("{kind:?}: edge of length {l} in the unit stage"));
        }
    }
    if kind == MoveKind::Fold {
        for (a, b) in before.edge_lengths().iter().zip(&lengths) {
            if (a - b).abs() > 1e-12 * a.max(1.0) {
                return Err(format!("fold changed an edge length {a} -> {b}"));
            }
        }
    }
    Ok(())
}

/// Drives `random_move` from `start` until `accepted` moves went through,
/// checking every one against [`move_contract`]. Returns the final polygon.
pub fn contract_chain<R: Rng>(
    start: &stickmin::polygon::Polygon<f64>,
    stage: stickmin::stick::StageKind,
    cfg: &stickmin::stick::StageConfig<f64>,
    accepted: usize,
    rng: &mut R,
) -> Result<stickmin::polygon::Polygon<f64>, String> {
    let mut poly = start.clone();
    let mut done = 0;
    let mut tries = 0u64;
    while done < accepted {
        tries += 1;
        if tries > 1000 * accepted as u64 + 100_000 {
            return Err(format!("only {done} of {accepted} moves accepted"));
        }
        let (kind, out) = stickmin::stick::random_move(&poly, stage, cfg, rng);
        let Some(next) = out.polygon else { continue };
        move_contract(&poly, kind, stage, &next)?;
        if cfg.p_grow == 0.0 && next.len() > poly.len() {
            return Err(format!("{kind:?} grew the polygon with p_grow = 0"));
        }
        poly = next;
        done += 1;
    }
    Ok(poly)
}

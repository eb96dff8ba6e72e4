//! BFACF annealing of self-avoiding polygons on the simple cubic lattice.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polygon::{lattice_add, LatticePoint, LatticePolygon, LATTICE_STEPS};
use crate::verify::{polygon_determinant, VerifyError};

/// Maps each occupied lattice site to the index of its vertex.
#[derive(Clone, Debug, Default)]
pub struct OccupancyIndex {
    sites: HashMap<LatticePoint, usize>,
}

impl OccupancyIndex {
    pub fn build(poly: &LatticePolygon) -> Self {
        let sites = poly.vertices().iter().enumerate().map(|(i, &v)| (v, i)).collect();
        Self { sites }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn get(&self, p: &LatticePoint) -> Option<usize> {
        self.sites.get(p).copied()
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.sites.contains_key(p)
    }

    /// True when the index holds exactly the polygon's vertices at their
    /// positions.
    pub fn matches(&self, poly: &LatticePolygon) -> bool {
        self.sites.len() == poly.len()
            && poly
                .vertices()
                .iter()
                .enumerate()
                .all(|(i, v)| self.sites.get(v) == Some(&i))
    }

    fn reindex_from(&mut self, poly: &LatticePolygon, start: usize) {
        for (i, v) in poly.vertices().iter().enumerate().skip(start) {
            self.sites.insert(*v, i);
        }
    }
}

/// An edge together with one of the four faces adjacent to it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BfacfProposal {
    pub edge_index: usize,
    pub face_direction: LatticePoint,
    /// Change in length if the move is applied: `-2`, `0` or `+2`.
    pub delta_n: i32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum BfacfRejection {
    #[error("move would make the polygon self-intersect")]
    SelfIntersection,
    #[error("move would leave fewer than 4 edges")]
    TooSmall,
    #[error("face direction is not perpendicular to the edge")]
    NotPerpendicular,
}

fn spikes(poly: &LatticePolygon, edge: usize, dir: LatticePoint) -> (bool, bool) {
    let n = poly.len();
    let v = poly.vertices();
    let a = lattice_add(v[edge], dir);
    let b = lattice_add(v[(edge + 1) % n], dir);
    (v[(edge + n - 1) % n] == a, v[(edge + 2) % n] == b)
}

fn is_perpendicular(step: LatticePoint, dir: LatticePoint) -> bool {
    step[0] * dir[0] + step[1] * dir[1] + step[2] * dir[2] == 0
        && dir.iter().map(|c| c.abs()).sum::<i32>() == 1
}

/// Length change of translating `edge` one unit along `dir`.
pub fn bfacf_delta(poly: &LatticePolygon, edge: usize, dir: LatticePoint) -> i32 {
    match spikes(poly, edge, dir) {
        (false, false) => 2,
        (true, true) => -2,
        _ => 0,
    }
}

/// Edge uniform over edges, face uniform over the four perpendicular
/// directions.
pub fn propose_bfacf<R: Rng + ?Sized>(poly: &LatticePolygon, rng: &mut R) -> BfacfProposal {
    let edge_index = rng.random_range(0..poly.len());
    let step = poly.step(edge_index);
    let mut dirs = LATTICE_STEPS.iter().filter(|d| is_perpendicular(step, **d));
    let k = rng.random_range(0..4);
    let face_direction = *dirs.nth(k).expect("four perpendicular directions");
    BfacfProposal {
        edge_index,
        face_direction,
        delta_n: bfacf_delta(poly, edge_index, face_direction),
    }
}

/// Applies a proposal in place, cancelling spikes immediately. On
/// rejection neither the polygon nor the index is touched. Returns the
/// length change.
pub fn apply_bfacf(
    poly: &mut LatticePolygon,
    occ: &mut OccupancyIndex,
    prop: &BfacfProposal,
) -> Result<i32, BfacfRejection> {
    let n = poly.len();
    let i = prop.edge_index % n;
    let j = (i + 1) % n;
    let dir = prop.face_direction;
    if !is_perpendicular(poly.step(i), dir) {
        return Err(BfacfRejection::NotPerpendicular);
    }
    let (vi, vj) = (poly.vertices()[i], poly.vertices()[j]);
    let a = lattice_add(vi, dir);
    let b = lattice_add(vj, dir);
    match spikes(poly, i, dir) {
        (false, false) => {
            if occ.contains(&a) || occ.contains(&b) {
                return Err(BfacfRejection::SelfIntersection);
            }
            let verts = poly.vertices_mut();
            verts.insert(i + 1, b);
            verts.insert(i + 1, a);
            occ.reindex_from(poly, i + 1);
            Ok(2)
        }
        (true, false) => {
            // vertex i slides across the face to b
            if occ.contains(&b) {
                return Err(BfacfRejection::SelfIntersection);
            }
            occ.sites.remove(&vi);
            poly.vertices_mut()[i] = b;
            occ.sites.insert(b, i);
            Ok(0)
        }
        (false, true) => {
            if occ.contains(&a) {
                return Err(BfacfRejection::SelfIntersection);
            }
            occ.sites.remove(&vj);
            poly.vertices_mut()[j] = a;
            occ.sites.insert(a, j);
            Ok(0)
        }
        (true, true) => {
            if n < 6 {
                return Err(BfacfRejection::TooSmall);
            }
            occ.sites.remove(&vi);
            occ.sites.remove(&vj);
            let verts = poly.vertices_mut();
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            verts.remove(hi);
            verts.remove(lo);
            occ.reindex_from(poly, lo);
            Ok(-2)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    /// Probability of accepting a move that lengthens the polygon.
    pub p_grow: f64,
    pub max_iters: u64,
    pub time_budget: Option<Duration>,
    /// Check the determinant every this many accepted moves (0 disables).
    pub verify_every: u64,
    /// Stop as soon as the best length reaches this value.
    pub target_len: Option<usize>,
    /// Multiplies `p_grow` after every iteration when set.
    pub cooling: Option<f64>,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            p_grow: 0.02,
            max_iters: 1_000_000,
            time_budget: None,
            verify_every: 10_000,
            target_len: None,
            cooling: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("p_grow must lie in [0, 1), got {0}")]
    BadProbability(f64),
    #[error("determinant changed from {expected} to {found} after {accepted} accepted moves")]
    KnotTypeChanged { expected: u64, found: u64, accepted: u64 },
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatticeStats {
    pub iterations: u64,
    pub accepted: u64,
    pub initial_len: usize,
    pub best_len: usize,
    pub final_len: usize,
    pub determinant_checks: u64,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct LatticeRun {
    /// Shortest polygon seen during the run.
    pub best: LatticePolygon,
    pub stats: LatticeStats,
}

/// Fixed-probability BFACF annealing. Moves that keep or reduce the length
/// are always tried; lengthening moves with probability `p_grow`.
pub fn anneal_lattice<R: Rng + ?Sized>(
    poly: &LatticePolygon,
    cfg: &AnnealConfig,
    rng: &mut R,
) -> Result<LatticeRun, LatticeError> {
    if !(0.0..1.0).contains(&cfg.p_grow) {
        return Err(LatticeError::BadProbability(cfg.p_grow));
    }
    let start = Instant::now();
    let mut current = poly.clone();
    let mut occ = OccupancyIndex::build(&current);
    let mut best = current.clone();
    let mut p_grow = cfg.p_grow;
    // separate stream so verification never perturbs the trajectory
    let mut verify_rng = ChaCha8Rng::seed_from_u64(rng.random());
    let mut stats = LatticeStats {
        initial_len: poly.len(),
        best_len: poly.len(),
        ..Default::default()
    };
    let expected = if cfg.verify_every > 0 {
        stats.determinant_checks += 1;
        Some(polygon_determinant(&current.to_polygon::<f64>(), &mut verify_rng)?)
    } else {
        None
    };

    while stats.iterations < cfg.max_iters {
        if cfg.target_len.is_some_and(|t| best.len() <= t) {
            break;
        }
        if stats.iterations.is_multiple_of(1024) && cfg.time_budget.is_some_and(|b| start.elapsed() >= b) {
            break;
        }
        stats.iterations += 1;
        if let Some(c) = cfg.cooling {
            p_grow *= c;
        }
        let prop = propose_bfacf(&current, rng);
        if prop.delta_n > 0 && rng.random::<f64>() >= p_grow {
            continue;
        }
        if apply_bfacf(&mut current, &mut occ, &prop).is_err() {
            continue;
        }
        stats.accepted += 1;
        if current.len() < best.len() {
            best = current.clone();
        }
        if let Some(expected) = expected {
            if stats.accepted.is_multiple_of(cfg.verify_every) {
                stats.determinant_checks += 1;
                let found = polygon_determinant(&current.to_polygon::<f64>(), &mut verify_rng)?;
                if found != expected {
                    return Err(LatticeError::KnotTypeChanged {
                        expected,
                        found,
                        accepted: stats.accepted,
                    });
                }
            }
        }
    }
    stats.best_len = best.len();
    stats.final_len = current.len();
    stats.elapsed = start.elapsed();
    Ok(LatticeRun { best, stats })
}

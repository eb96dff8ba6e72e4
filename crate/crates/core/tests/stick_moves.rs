mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stickmin::geom::{Segment, Triangle};
use stickmin::polygon::{builtin_lattice_trefoil, torus_knot_seed, Polygon};
use stickmin::stick::{fold_move, run_free_stage, MoveStatus, StageConfig, StageKind};
use stickmin::verify::polygon_determinant;

const EPS: f64 = 1e-9;

fn hexagon() -> Polygon<f64> {
    let verts = (0..6)
        .map(|k| {
            let a = std::f64::consts::PI / 3.0 * k as f64;
            p(a.cos(), a.sin(), 0.0)
        })
        .collect();
    Polygon::new(verts).unwrap()
}

/// Smallest oracle distance from the fold's swept triangles to the edges
/// not incident to the folded vertex, ignoring the anchor contact.
fn swept_clearance(poly: &Polygon<f64>, i: usize, angle: f64) -> f64 {
    let n = poly.len();
    let (io, ip) = ((i + n - 1) % n, (i + 1) % n);
    let (o, a, q) = (poly.vertex(io), poly.vertex(i), poly.vertex(ip));
    let axis = (q - o).normalized().unwrap();
    let a2 = a.rotate_about(o, axis, angle);
    let tris = [Triangle::new(o, a, a2), Triangle::new(q, a, a2)];
    let mut best = f64::INFINITY;
    for j in 0..n {
        let (s, e) = (j, (j + 1) % n);
        if s == i || e == i {
            continue;
        }
        let seg = Segment::new(poly.vertex(s), poly.vertex(e));
        for (k, t) in tris.iter().enumerate() {
            let anchor = if k == 0 { io } else { ip };
            if s == anchor || e == anchor {
                // the edge touches this triangle at its anchor; only its far
                // end can come close without a crossing through the anchor
                let far = if s == anchor { poly.vertex(e) } else { poly.vertex(s) };
                best = best.min(oracle_distance(&Segment::new(far, far), t, 8, &[]));
                continue;
            }
            best = best.min(oracle_distance(&seg, t, 8, &[]));
        }
    }
    best
}

/// Minimal polygons produced by the stages, where strands are tight.
fn tight_polygons() -> Vec<Polygon<f64>> {
    let target = |k| StageConfig {
        target_edges: Some(k),
        max_iters: 2_000_000,
        ..StageConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let lattice = builtin_lattice_trefoil().to_polygon::<f64>();
    let unit = stickmin::stick::run_unit_stage(&lattice, &target(6), &mut rng).unwrap().best;
    let t25 = run_free_stage(&torus_knot_seed(2, 5, 96).unwrap(), &target(8), &mut rng).unwrap().best;
    assert_eq!((unit.len(), t25.len()), (6, 8));
    vec![lattice, unit, t25]
}

#[test]
fn folds_through_strands_are_blocked_and_accepted_folds_are_clear() {
    let (mut blocked_hits, mut accepted) = (0, 0);
    for poly in tight_polygons() {
        for i in 0..poly.len() {
            for k in 1..24 {
                let angle = -std::f64::consts::PI + k as f64 * std::f64::consts::PI / 12.0;
                let out = fold_move(&poly, i, angle, EPS);
                let clearance = swept_clearance(&poly, i, angle);
                if out.is_accepted() {
                    accepted += 1;
                    assert!(clearance > EPS * (1.0 - 1e-3), "vertex {i}, angle {angle}: {clearance}");
                } else if clearance <= EPS {
                    assert_eq!(out.status, MoveStatus::RejectedTriangleCheck);
                    blocked_hits += 1;
                }
            }
        }
    }
    assert!(blocked_hits > 0 && accepted > 0, "{blocked_hits} {accepted}");
}

#[test]
fn unit_moves_keep_their_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let start = builtin_lattice_trefoil().to_polygon::<f64>();
    let cfg = StageConfig::default();
    let end = contract_chain(&start, StageKind::Unit, &cfg, 3_000, &mut rng).unwrap();
    assert_eq!(polygon_determinant(&end, &mut rng).unwrap(), 3);
}

#[test]
fn free_moves_keep_their_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let start = torus_knot_seed::<f64>(2, 5, 96).unwrap();
    let cfg = StageConfig {
        p_grow: 0.2,
        ..StageConfig::default()
    };
    let end = contract_chain(&start, StageKind::Free, &cfg, 3_000, &mut rng).unwrap();
    assert_eq!(polygon_determinant(&end, &mut rng).unwrap(), 5);
}

#[test]
fn zero_growth_never_adds_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let cfg = StageConfig {
        p_grow: 0.0,
        ..StageConfig::default()
    };
    let start = builtin_lattice_trefoil().to_polygon::<f64>();
    contract_chain(&start, StageKind::Unit, &cfg, 1_000, &mut rng).unwrap();
    let start = torus_knot_seed::<f64>(2, 3, 64).unwrap();
    contract_chain(&start, StageKind::Free, &cfg, 1_000, &mut rng).unwrap();
}

#[test]
fn planar_hexagon_reduces_to_triangle() {
    let cfg = StageConfig {
        p_grow: 0.1,
        max_iters: 100_000,
        target_edges: Some(3),
        ..StageConfig::default()
    };
    for seed in 0..5 {
        let run = run_free_stage(&hexagon(), &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(run.best.len(), 3, "seed {seed}");
    }
}

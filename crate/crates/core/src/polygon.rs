//! Closed polygons on and off the cubic lattice, seed generators and the
//! plain-text coordinate format.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{segment_segment_distance, Point3, Segment};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum PolygonError {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("minimum non-adjacent edge distance is undefined for a triangle")]
    Undefined,
    #[error("seed precondition violated: {0}")]
    Precondition(String),
    #[error("seed is degenerate at this sample count: {0}")]
    DegenerateSeed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = PolygonError> = std::result::Result<T, E>;

/// Closed polygon in 3-space; edge `i` runs from vertex `i` to vertex
/// `(i + 1) % n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon<T> {
    vertices: Vec<Point3<T>>,
}

/// Location and value of the minimum distance between non-adjacent edges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeGap<T> {
    pub distance: T,
    /// Zero-based edge indices, `first < second`.
    pub edges: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport<T> {
    pub n: usize,
    /// `None` for triangles, where every pair of edges is adjacent.
    pub min_nonadjacent_distance: Option<T>,
    pub min_edge_length: T,
    pub max_edge_length: T,
}

impl<T: Real> Polygon<T> {
    /// Builds a polygon from a vertex cycle, checking only the vertex count
    /// and finiteness. Use [`Polygon::validate`] for the embedding checks.
    pub fn new(vertices: Vec<Point3<T>>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(PolygonError::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(PolygonError::InvalidPolygon(format!("vertex {i} is not finite")));
        }
        Ok(Self { vertices })
    }

    pub(crate) fn from_vertices_unchecked(vertices: Vec<Point3<T>>) -> Self {
        debug_assert!(vertices.len() >= 3);
        Self { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edge count, i.e. the number of sticks.
    pub fn edge_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Point3<T>] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Point3<T>> {
        self.vertices
    }

    /// Vertex at a cyclic index.
    pub fn vertex(&self, i: usize) -> Point3<T> {
        self.vertices[i % self.vertices.len()]
    }

    pub fn edge(&self, i: usize) -> Segment<T> {
        let n = self.len();
        Segment::new(self.vertices[i % n], self.vertices[(i + 1) % n])
    }

    pub fn edge_vector(&self, i: usize) -> Point3<T> {
        let n = self.len();
        self.vertices[(i + 1) % n] - self.vertices[i % n]
    }

    pub fn edge_lengths(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.edge_vector(i).norm()).collect()
    }

    pub fn scaled(&self, s: T) -> Self {
        Self::from_vertices_unchecked(self.vertices.iter().map(|&v| v * s).collect())
    }

    pub fn translated(&self, d: Point3<T>) -> Self {
        Self::from_vertices_unchecked(self.vertices.iter().map(|&v| v + d).collect())
    }

    pub fn centroid(&self) -> Point3<T> {
        let sum = self.vertices.iter().fold(Point3::zero(), |acc, &v| acc + v);
        sum / T::from_usize_lossy(self.len())
    }

    /// Largest distance between any two vertices.
    pub fn diameter(&self) -> T {
        let mut d = T::zero();
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max(a.distance(*b));
            }
        }
        d
    }

    /// Minimum distance between edges that share no vertex, with the
    /// edge pair attaining it. Undefined for triangles.
    pub fn min_nonadjacent_edge_gap(&self) -> Result<EdgeGap<T>> {
        let n = self.len();
        if n < 4 {
            return Err(PolygonError::Undefined);
        }
        let mut best = EdgeGap {
            distance: T::infinity(),
            edges: (0, 2),
        };
        for i in 0..n {
            let ei = self.edge(i);
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let d = segment_segment_distance(&ei, &self.edge(j));
                if d < best.distance {
                    best = EdgeGap {
                        distance: d,
                        edges: (i, j),
                    };
                }
            }
        }
        Ok(best)
    }

    /// The minimum distance between non-adjacent edges.
    pub fn min_nonadjacent_edge_distance(&self) -> Result<T> {
        self.min_nonadjacent_edge_gap().map(|g| g.distance)
    }

    /// Checks the embedding invariants: finite vertices, no zero-length
    /// edges, no doubled-back spikes, and non-adjacent edges more than `eps`
    /// apart (`eps = 0` gives the strict disjointness test).
    pub fn validate(&self, eps: T) -> Result<ValidationReport<T>> {
        let n = self.len();
        if n < 3 {
            return Err(PolygonError::InvalidPolygon("fewer than 3 vertices".into()));
        }
        if let Some(i) = self.vertices.iter().position(|v| !v.is_finite()) {
            return Err(PolygonError::InvalidPolygon(format!("vertex {i} is not finite")));
        }
        let lengths = self.edge_lengths();
        if let Some(i) = lengths.iter().position(|&l| !(l > T::zero())) {
            return Err(PolygonError::InvalidPolygon(format!("edge {i} has zero length")));
        }
        for i in 0..n {
            let a = self.edge_vector(i);
            let b = self.edge_vector(i + 1);
            if a.cross(b).norm_sq() == T::zero() && a.dot(b) < T::zero() {
                return Err(PolygonError::InvalidPolygon(format!(
                    "edges {i} and {} double back on each other",
                    (i + 1) % n
                )));
            }
        }
        let min_nonadjacent_distance = match self.min_nonadjacent_edge_gap() {
            Ok(gap) => {
                if !(gap.distance > eps) {
                    return Err(PolygonError::InvalidPolygon(format!(
                        "non-adjacent edges {} and {} are {} apart",
                        gap.edges.0, gap.edges.1, gap.distance
                    )));
                }
                Some(gap.distance)
            }
            Err(_) => None,
        };
        let min_edge_length = lengths.iter().copied().fold(T::infinity(), T::min);
        let max_edge_length = lengths.iter().copied().fold(T::zero(), T::max);
        Ok(ValidationReport {
            n,
            min_nonadjacent_distance,
            min_edge_length,
            max_edge_length,
        })
    }

    /// Converts the coordinates to another scalar type.
    pub fn cast<U: Real>(&self) -> Polygon<U> {
        Polygon::from_vertices_unchecked(
            self.vertices
                .iter()
                .map(|v| Point3::new(U::lit(v.x.as_f64()), U::lit(v.y.as_f64()), U::lit(v.z.as_f64())))
                .collect(),
        )
    }
}

/// Integer lattice point.
pub type LatticePoint = [i32; 3];

/// The six unit steps of the simple cubic lattice.
pub const LATTICE_STEPS: [LatticePoint; 6] = [
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
];

pub(crate) fn lattice_add(a: LatticePoint, b: LatticePoint) -> LatticePoint {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn lattice_sub(a: LatticePoint, b: LatticePoint) -> LatticePoint {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn is_unit_step(d: LatticePoint) -> bool {
    d.iter().map(|c| c.abs()).sum::<i32>() == 1
}

/// Self-avoiding closed cycle on the simple cubic lattice.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticePolygon {
    vertices: Vec<LatticePoint>,
}

impl LatticePolygon {
    pub fn new(vertices: Vec<LatticePoint>) -> Result<Self> {
        let p = Self { vertices };
        p.check()?;
        Ok(p)
    }

    pub(crate) fn from_vertices_unchecked(vertices: Vec<LatticePoint>) -> Self {
        Self { vertices }
    }

    /// Verifies every lattice-polygon invariant in O(n).
    pub fn check(&self) -> Result<()> {
        let n = self.vertices.len();
        if n < 4 || !n.is_multiple_of(2) {
            return Err(PolygonError::InvalidPolygon(format!(
                "lattice polygon needs an even length of at least 4, got {n}"
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        for (i, &v) in self.vertices.iter().enumerate() {
            if !seen.insert(v) {
                return Err(PolygonError::InvalidPolygon(format!(
                    "lattice vertex {i} at {v:?} is visited twice"
                )));
            }
            let step = lattice_sub(self.vertices[(i + 1) % n], v);
            if !is_unit_step(step) {
                return Err(PolygonError::InvalidPolygon(format!(
                    "lattice step {i} is {step:?}, not a unit step"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[LatticePoint] {
        &self.vertices
    }

    pub(crate) fn vertices_mut(&mut self) -> &mut Vec<LatticePoint> {
        &mut self.vertices
    }

    pub fn step(&self, i: usize) -> LatticePoint {
        let n = self.len();
        lattice_sub(self.vertices[(i + 1) % n], self.vertices[i % n])
    }

    /// Real embedding with unit edges.
    pub fn to_polygon<T: Real>(&self) -> Polygon<T> {
        Polygon::from_vertices_unchecked(
            self.vertices
                .iter()
                .map(|v| {
                    Point3::new(
                        T::lit(v[0] as f64),
                        T::lit(v[1] as f64),
                        T::lit(v[2] as f64),
                    )
                })
                .collect(),
        )
    }
}

/// Where a pipeline's initial polygon comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SeedSpec {
    /// Off-lattice coordinate file.
    File(std::path::PathBuf),
    /// Lattice coordinate file (integer fields).
    LatticeFile(std::path::PathBuf),
    TorusKnot { p: u32, q: u32, samples: usize },
    FigureEight { samples: usize },
    BuiltinLatticeTrefoil,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Samples the standard `(p, q)` curve on a torus with radii 2 and 1.
pub fn torus_knot_seed<T: Real>(p: u32, q: u32, samples: usize) -> Result<Polygon<T>> {
    if !(2 <= p && p < q) || gcd(p, q) != 1 {
        return Err(PolygonError::Precondition(format!(
            "need coprime 2 <= p < q, got ({p}, {q})"
        )));
    }
    if samples < 8 * (p + q) as usize {
        return Err(PolygonError::Precondition(format!(
            "need at least {} samples for ({p}, {q}), got {samples}",
            8 * (p + q)
        )));
    }
    let (big_r, r) = (2.0f64, 1.0f64);
    let vertices = (0..samples)
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / samples as f64;
            let (pf, qf) = (p as f64 * theta, q as f64 * theta);
            let rho = big_r + r * qf.cos();
            Point3::from_f64(rho * pf.cos(), rho * pf.sin(), r * qf.sin())
        })
        .collect();
    let poly = Polygon::new(vertices)?;
    poly.validate(T::lit(crate::geom::DEFAULT_EPS))
        .map_err(|e| PolygonError::DegenerateSeed(e.to_string()))?;
    Ok(poly)
}

/// Samples the Lissajous-type figure-eight curve
/// `((2 + cos 2t) cos 3t, (2 + cos 2t) sin 3t, sin 4t)`.
pub fn figure_eight_seed<T: Real>(samples: usize) -> Result<Polygon<T>> {
    if samples < 32 {
        return Err(PolygonError::Precondition(format!(
            "need at least 32 samples, got {samples}"
        )));
    }
    let vertices = (0..samples)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / samples as f64;
            let rho = 2.0 + (2.0 * t).cos();
            Point3::from_f64(rho * (3.0 * t).cos(), rho * (3.0 * t).sin(), (4.0 * t).sin())
        })
        .collect();
    let poly = Polygon::new(vertices)?;
    poly.validate(T::lit(crate::geom::DEFAULT_EPS))
        .map_err(|e| PolygonError::DegenerateSeed(e.to_string()))?;
    Ok(poly)
}

const BUILTIN_TREFOIL: [LatticePoint; 32] = [
    [0, 3, 1],
    [0, 2, 1],
    [0, 2, 2],
    [0, 1, 2],
    [1, 1, 2],
    [2, 1, 2],
    [3, 1, 2],
    [3, 1, 1],
    [3, 2, 1],
    [4, 2, 1],
    [4, 2, 2],
    [4, 3, 2],
    [3, 3, 2],
    [2, 3, 2],
    [1, 3, 2],
    [1, 2, 2],
    [1, 2, 1],
    [1, 1, 1],
    [1, 1, 0],
    [1, 0, 0],
    [2, 0, 0],
    [2, 0, 1],
    [2, 0, 2],
    [3, 0, 2],
    [3, 0, 3],
    [2, 0, 3],
    [2, 1, 3],
    [2, 2, 3],
    [2, 2, 2],
    [2, 2, 1],
    [2, 3, 1],
    [1, 3, 1],
];

/// A fixed 32-edge self-avoiding lattice trefoil.
pub fn builtin_lattice_trefoil() -> LatticePolygon {
    LatticePolygon::from_vertices_unchecked(BUILTIN_TREFOIL.to_vec())
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("").trim();
        (!body.is_empty()).then_some((i + 1, body))
    })
}

fn three_fields(line: usize, body: &str) -> Result<[&str; 3]> {
    let fields: Vec<&str> = body.split_whitespace().collect();
    <[&str; 3]>::try_from(fields).map_err(|f| PolygonError::Parse {
        line,
        message: format!("expected 3 fields, found {}", f.len()),
    })
}

pub fn parse_polygon<T: Real>(text: &str) -> Result<Polygon<T>> {
    let mut vertices = Vec::new();
    for (line, body) in data_lines(text) {
        let mut xyz = [T::zero(); 3];
        for (slot, field) in xyz.iter_mut().zip(three_fields(line, body)?) {
            let v: f64 = field.parse().map_err(|e| PolygonError::Parse {
                line,
                message: format!("bad number {field:?}: {e}"),
            })?;
            *slot = T::from_f64(v).ok_or_else(|| PolygonError::Parse {
                line,
                message: format!("{field:?} is not representable"),
            })?;
        }
        vertices.push(Point3::new(xyz[0], xyz[1], xyz[2]));
    }
    if vertices.is_empty() {
        return Err(PolygonError::Parse {
            line: 0,
            message: "no vertices".into(),
        });
    }
    Polygon::new(vertices)
}

pub fn format_polygon<T: Real>(poly: &Polygon<T>) -> String {
    let mut out = String::new();
    for v in poly.vertices() {
        // shortest round-trip representation
        let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
    }
    out
}

pub fn read_polygon<T: Real>(path: impl AsRef<Path>) -> Result<Polygon<T>> {
    parse_polygon(&fs::read_to_string(path)?)
}

pub fn write_polygon<T: Real>(poly: &Polygon<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_polygon(poly))?;
    Ok(())
}

pub fn parse_lattice_polygon(text: &str) -> Result<LatticePolygon> {
    let mut vertices = Vec::new();
    for (line, body) in data_lines(text) {
        let mut xyz = [0i32; 3];
        for (slot, field) in xyz.iter_mut().zip(three_fields(line, body)?) {
            *slot = field.parse().map_err(|e| PolygonError::Parse {
                line,
                message: format!("bad integer {field:?}: {e}"),
            })?;
        }
        vertices.push(xyz);
    }
    if vertices.is_empty() {
        return Err(PolygonError::Parse {
            line: 0,
            message: "no vertices".into(),
        });
    }
    LatticePolygon::new(vertices)
}

pub fn format_lattice_polygon(poly: &LatticePolygon) -> String {
    let mut out = String::new();
    for v in poly.vertices() {
        let _ = writeln!(out, "{} {} {}", v[0], v[1], v[2]);
    }
    out
}

pub fn read_lattice_polygon(path: impl AsRef<Path>) -> Result<LatticePolygon> {
    parse_lattice_polygon(&fs::read_to_string(path)?)
}

pub fn write_lattice_polygon(poly: &LatticePolygon, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_lattice_polygon(poly))?;
    Ok(())
}

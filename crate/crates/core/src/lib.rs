//! Stick-number minimization of polygonal knots.
//!
//! Seeds are annealed through up to four stages: BFACF moves on the cubic
//! lattice, unit-length off-lattice moves, free-length moves, and a final
//! equalization to an equilateral polygon with a rigidity certificate.
//! Every move is checked geometrically so that the knot type is preserved,
//! and the Alexander fingerprint in [`verify`] is used as an independent
//! check along the way.

// `!(a > b)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilateral;
pub mod geom;
pub mod lattice;
pub mod pipeline;
pub mod polygon;
pub mod scalar;
pub mod stick;
pub mod svg;
pub mod verify;

pub use scalar::Real;

pub type Point3 = geom::Point3<f64>;
pub type Segment = geom::Segment<f64>;
pub type Triangle = geom::Triangle<f64>;
pub type Sweep = geom::Sweep<f64>;
pub type Polygon = polygon::Polygon<f64>;
pub type StageConfig = stick::StageConfig<f64>;
pub type EquilateralCertificate = equilateral::EquilateralCertificate<f64>;

pub use polygon::{LatticePoint, LatticePolygon, SeedSpec};

//! Numerical design toolkit for rotating permanent-magnet assemblies used in
//! magnetocaloric cooling devices.
//!
//! The toolkit solves two-dimensional magnetostatic field problems on exact
//! NURBS multipatch geometries, couples an independently meshed rotor and
//! stator through a harmonic trace space on a circle in the air gap, and
//! drives two gradient-based design loops on top of the field solver:
//!
//! * a free-material (density-style) optimization of the remanence
//!   distribution inside a design region, and
//! * a boundary shape optimization of the rotor contour control points.
//!
//! Higher-level study drivers reproduce the engineering evaluations used to
//! size such assemblies: air-gap field quality, torque maps over segment
//! counts and fill ratios, well-posed scenario comparisons, and a scalar
//! cooling-performance figure of merit.
//!
//! Units are SI throughout the library (meters, tesla, ampere); the CLI layer
//! accepts the more convenient millimeters/degrees and converts at the edge.

pub mod assembly;
pub mod error;
pub mod geometry;
pub mod io;
pub mod material;
pub mod mortar;
pub mod nlp;
pub mod quadrature;
pub mod shape;
pub mod sparse;
pub mod spline;
pub mod studies;
pub mod topo;
pub mod validate;

pub use error::{Error, Result};

/// Vacuum permeability [H/m].
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

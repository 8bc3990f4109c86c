//! Numerical laboratory for nonlinear diffusion from a boundary: embedded-boundary
//! solvers, small-time asymptotics (distance and heat-content laws), barrier
//! checks and the stationary-isotherm detection pipeline.

pub mod asymptotics;
pub mod comparison;
pub mod detectors;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod nonlinearity;
pub mod quadrature;
pub mod serde_util;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{DomainSpec, Point, SignedDistanceField, SurfaceSample};
pub use grid::GridSpec;
pub use nonlinearity::Nonlinearity;
pub use solver::{ProblemKind, SolutionSeries};

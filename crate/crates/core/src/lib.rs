//! Finite element eigenvalue laboratory for planar Laplace/elliptic problems.
//!
//! The crate computes eigenvalues with the Crouzeix-Raviart (CR) and enriched
//! Crouzeix-Raviart (ECR) nonconforming elements on uniformly refined
//! triangulations, solves the companion lowest-order Raviart-Thomas mixed
//! source problems, and verifies the interpolation-error expansions and
//! element relations that make Richardson extrapolation of the eigenvalues
//! fourth-order accurate.
//!
//! Module map:
//! - [`mesh`]: built-in domains, red refinement, per-element geometry
//! - [`quad`]: fixed-order triangle and edge quadrature
//! - [`spaces`]: CR/ECR/RT0/P0/P1/P3 spaces, DOF maps, canonical interpolations
//! - [`assembly`]: stiffness/mass matrices and the RT0xP0 saddle system
//! - [`solve`]: sparse direct solves and the generalized symmetric eigensolver
//! - [`analysis`]: gamma constants, error decompositions, extrapolation
//! - [`bench`]: experiment drivers, CSV/SVG output, verification suite

pub mod analysis;
pub mod assembly;
pub mod bench;
pub mod error;
pub mod field;
pub mod geom;
pub mod mesh;
pub mod quad;
pub mod solve;
pub mod spaces;

pub use error::{Error, Result};
pub use geom::Vec2;

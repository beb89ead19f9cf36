//! Inclusion detection in linearly elastic bodies from boundary measurements.
//!
//! A body occupying a box domain is loaded with traction patches on its
//! Neumann boundary while one face is held fixed. Regions whose Lamé
//! parameters differ from the homogeneous background (inclusions) change the
//! Neumann-to-Dirichlet map of the body, and they do so *monotonically*: a
//! stiffer inclusion can only lower the map in the Loewner order. The crates'
//! pipeline exploits this to decide, for each cube of a scanning grid,
//! whether the cube lies inside the inclusion set — by checking the sign of
//! the smallest eigenvalue of a shifted difference of operator matrices.
//!
//! The crate is organized bottom-up:
//!
//! - [`mesh`]: structured simplex meshes on box domains, boundary patch
//!   layouts, and scanning-cube grids with per-element volume fractions.
//! - [`elasticity`]: lowest-order FEM for the elasticity boundary value
//!   problem — assembly, patch traction loads, direct/iterative solves, and
//!   strain-energy products.
//! - [`ntd`]: discretized Neumann-to-Dirichlet matrices over a patch load
//!   system, difference measurements, test-inclusion operators, and
//!   deterministic measurement noise.
//! - [`frechet`]: derivative operators of the Neumann-to-Dirichlet map at
//!   the background material, built from a bank of background solutions.
//! - [`monotest`]: the eigenvalue tests themselves (standard/linearized ×
//!   raise/lower) plus scoring against known truth geometry.
//! - [`matio`]: the binary operator container (JSON header + row-major
//!   doubles) and CSV export.
//! - [`vtk`]: legacy VTK text writers for meshes, fields, and result grids.
//! - [`checks`]: a reusable verification battery (self-adjointness, Loewner
//!   order, energy bracketing, derivative consistency) shared by tests and
//!   the CLI `verify` subcommand.

pub mod checks;
pub mod elasticity;
pub mod error;
pub mod frechet;
pub mod geometry;
pub mod matio;
pub mod mesh;
pub mod monotest;
pub mod ntd;
pub mod vtk;

pub use error::{CoreError, Result};

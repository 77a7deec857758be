//! Finite-element solver for the Landau-Lifshitz-Gilbert equation coupled to
//! the conservation of momentum through magnetostriction.
//!
//! The crate provides P1 assembly on triangle meshes, a linear-implicit
//! tangent-plane time stepper with nodal projection, an implicit midpoint
//! comparator, and a benchmark driver with CSV diagnostics.

pub mod contributions;
pub mod error;
pub mod fem;
pub mod integrator;
pub mod linalg;
pub mod material;
pub mod mesh;
pub mod sim;

pub use error::SimError;

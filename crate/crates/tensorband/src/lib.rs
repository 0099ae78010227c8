//! Quantum geometry of a six-band monopole model family.
//!
//! The library builds the model Hamiltonians, diagonalizes and gauge-fixes
//! their twofold band subspaces, computes the non-Abelian quantum geometric
//! tensor (metric + SO(2) curvature) and the associated 3-form curvature,
//! integrates every topological invariant of the family over explicit
//! meshes, and simulates the adiabatic / counterdiabatic ramp protocol that
//! recovers the metric from excitation populations.
//!
//! All numerics are generic over the scalar type via [`scalar::Real`]
//! (`f64` is the working default; `f32` compiles and is exercised by a few
//! smoke tests). Concrete `f64` aliases for the main entry types are
//! re-exported at the crate root.

pub mod error;
pub mod geometry;
pub mod invariants;
pub mod model;
pub mod protocol;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` aliases for the main entry types.
pub type Momentum = model::Momentum4<f64>;
pub type Hyper = model::HyperPoint<f64>;
pub type Spec = model::ModelSpec<f64>;
pub type Frame = spectral::BandFrame<f64>;
pub type Geometry = geometry::GeometrySample<f64>;
pub type Report = invariants::InvariantReport;

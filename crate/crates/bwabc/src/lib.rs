//! Boundary-driven weakly asymmetric Blume-Capel (BWABC) spin system.
//!
//! Three coupled layers, cross-validated by the acceptance suite:
//!
//! * [`kmc`] — exact continuous-time Markov simulation of the three-state
//!   spin system on the discrete cylinder: Kawasaki exchanges in the bulk
//!   (speeded by N²), Glauber reservoirs on the two boundary faces (speeded
//!   by N^{2-a_l} and N^{2-a_r}), optionally tilted by a space-time field.
//! * [`pde`] — the limiting coupled degenerate parabolic system for the
//!   macroscopic pair (m, φ) with Dirichlet data on the left face and a
//!   flux condition on the right face, solved by an explicit flux-form
//!   scheme, plus a spectral reference solution for the drift-free case.
//! * [`ldp`] — numerically evaluable dynamical large-deviations objects:
//!   mobility-weighted inner products, the Dirichlet energy of a trajectory,
//!   the linear weak-form functional, the quadratic cost functional, rate
//!   values from a known tilt, variational lower bounds, and the admissible
//!   region validator.
//!
//! Shared foundations: [`thermo`] (single-site thermodynamics, mobility
//! matrix, admissible profiles), [`lattice`] (geometry, spins, jump rates),
//! [`fields`] (analytic space-time fields used as tilts and test functions),
//! [`compare`] (coarse-graining and field distances), [`io`] (CSV/JSON/binary
//! formats).

pub mod compare;
pub mod fields;
pub mod io;
pub mod kmc;
pub mod lattice;
pub mod ldp;
pub mod pde;
pub mod thermo;

pub use fields::{FieldPair, FieldTerm, SpaceShape, TimeShape};
pub use lattice::{Lattice, ModelParams, SpinConfig};
pub use pde::{DiscreteTrajectory, SpaceGrid};
pub use thermo::{ChemPot, DensityPair, Mat2, Profile, ProfileKind};

//! Finite-dimensional laboratory for the dual quantum BBGKY hierarchy.
//!
//! Single-particle Hilbert space is `C^d`; an `s`-particle operator is a dense
//! `d^s x d^s` complex matrix with particle 1 as the most significant tensor
//! factor. On top of that algebra the crate provides
//!
//! * Heisenberg and Schrodinger groups built from cached eigendecompositions
//!   ([`dynamics`]),
//! * set partitions and dissections with their signed weights
//!   ([`combinatorics`]),
//! * forward, backward and scattering cumulants ([`cumulants`]),
//! * the cluster solution of the dual hierarchy together with an ODE oracle
//!   ([`hierarchy`]),
//! * the mean-field (dual Vlasov) limit ([`meanfield`]),
//! * the Vlasov kinetic equation and chaos propagation ([`kinetic`]),
//! * a periodic-grid Hartree / cubic NLS solver ([`hartree`]),
//! * the evolution operators of the generalized kinetic equation and the
//!   kinetic cluster expansion ([`gke`]).
//!
//! Units: `h = 2*pi*hbar = 1`, `m = 1`. Neither constant enters any finite
//! dimensional formula; they are kept as documentation constants below.

pub mod combinatorics;
pub mod cumulants;
pub mod dynamics;
pub mod error;
pub mod fixtures;
pub mod gke;
pub mod hartree;
pub mod hierarchy;
pub mod kinetic;
mod local;
pub mod meanfield;
pub mod ode;
pub mod quadrature;
pub mod tensor;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Dense complex matrix used for every operator in the crate.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Planck constant in the units used throughout (`h = 2*pi*hbar = 1`).
pub const PLANCK_H: f64 = 1.0;
/// Particle mass.
pub const PARTICLE_MASS: f64 = 1.0;

pub use combinatorics::{ClusterElement, Dissection, Partition};
pub use cumulants::{CumulantSpec, Direction};

pub use dynamics::{Flow, HamiltonianSet};
pub use kinetic::OneParticleState;

pub use quadrature::SimplexQuadrature;
pub use tensor::{NBodyOperator, ObservableSequence, ParticleModel, StateSequence};

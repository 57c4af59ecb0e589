//! Holonomic quantum computation with (N+1)-level Λ atoms in cavity QED.
//!
//! The crate is organised bottom-up:
//!
//! * [`lambda_system`] builds the parametric Λ Hamiltonian, its dark frame and
//!   the Wilczek–Zee connection/curvature on the control manifold.
//! * [`holonomy`] evaluates path-ordered holonomies of closed loops, checks
//!   them against Stokes surface integrals and synthesizes gate loops.
//! * [`evolve`] integrates (non-Hermitian) Schrödinger dynamics on labelled
//!   tensor-product spaces.
//! * [`schemes`] holds the optical, motional and modified-optical transfer
//!   Hamiltonians and the end-to-end transfer runs.
//! * [`bounds`] evaluates the closed-form adiabaticity and decoherence
//!   conditions and compares them with simulation.
//! * [`scenario`] and [`report`] drive everything from scenario files and
//!   write CSV output for the `hqc` binary.
//!
//! Units: ħ = 1 and every frequency is measured in units of the atom–cavity
//! coupling g.

pub mod bounds;
pub mod error;
pub mod evolve;
pub mod holonomy;
pub mod lambda_system;
pub mod linalg;
pub mod quadrature;
pub mod report;
pub mod scenario;
pub mod schemes;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

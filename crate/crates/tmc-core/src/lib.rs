//! Geometric time-minimal control of dissipative two-level quantum systems.
//!
//! The state of a dissipative qubit lives in the Bloch ball `x² + y² + z² ≤ 1`
//! and evolves under Lindblad dissipation (rates `Γ`, `γ₊`, `γ₋`) plus a bounded
//! resonant control field.  This crate implements the geometric analysis of the
//! associated time-minimal control problem:
//!
//! * [`params`] / [`state`] / [`dynamics`] — the model: admissible dissipation
//!   triples, Cartesian and spherical charts, controlled vector fields.
//! * [`ode`] — an adaptive Dormand–Prince 5(4) integrator with dense output and
//!   event localization; everything downstream is built on it.
//! * [`planar`] — the single-input problem restricted to a meridian plane:
//!   Lie-bracket invariants, the singular and collinear sets, switching
//!   functions, analytic switching determinants, bang-bang/singular extremal
//!   concatenation and synthesis sampling.
//! * [`extremal3d`] — the bi-input extremal flow of the true Hamiltonian in
//!   spherical coordinates, the switching-surface blow-up, and asymptotic
//!   classification.
//! * [`conjugate`] — Jacobi fields, conjugate-point tests and Newton shooting.
//! * [`report`] — CSV/JSON emission of trajectories, synthesis maps, conjugate
//!   scans and shooting reports.

pub mod conjugate;
pub mod dynamics;
mod linalg;
pub mod extremal3d;
pub mod ode;
pub mod params;
pub mod planar;
pub mod report;
pub mod state;
pub mod tol;

pub use params::DissipationParams;
pub use state::{BlochState, ControlVector, SphericalState};

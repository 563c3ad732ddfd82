//! Single-input analysis in a meridian plane of the Bloch ball.
//!
//! With the second control off and `x = 0`, the dynamics closes on the
//! `(y, z)` disk as `q̇ = F(q) + u·G(q)`, `|u| ≤ 1`, with the affine drift
//! `F = (−Γy, γ₋ − γ₊z)` and the rotation `G = (−z, y)`.  This module carries
//! the complete machinery built on that pair: Lie brackets and the feedback
//! invariants `S` (singular set) and `C` (collinear set), singular-arc
//! classification and control, the switching function and its analytic
//! determinant on the semi-direct lift, bang-bang/singular extremal
//! concatenation, and the sampled time-minimal synthesis.

mod extremal;
mod invariants;
mod lie;
mod normal_form;
mod switching;
mod synthesis;

pub use extremal::{
    extremal_2d, integrate_bang_arc, ArcControl, PlanarEvent, PlanarEventKind, PlanarSample,
    PlanarSegment, PlanarTrajectory,
};
pub use invariants::{
    classify_singular, collinear_set_eval, horizontal_saturation_y, singular_control,
    singular_control_general, singular_set_eval, SingularClassification, SingularKind,
};
pub use lie::{control_element, drift_element, fields_FG, lie_bracket, LiftedElement};
pub use normal_form::{normal_form_adjoint_rhs, normal_form_rhs};
pub use switching::{
    switching_determinant, switching_determinant_roots, switching_function, PhiZero, PhiZeroKind,
    SampledSwitchingFunction,
};
pub use synthesis::{
    synthesis_sample, ArrivalCell, SynthesisCase, SynthesisGrid, SynthesisMap,
};

use crate::ode::OdeError;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Point of the meridian disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarState {
    pub y: f64,
    pub z: f64,
}

impl PlanarState {
    pub fn new(y: f64, z: f64) -> Self {
        PlanarState { y, z }
    }

    pub fn norm(&self) -> f64 {
        self.y.hypot(self.z)
    }
}

/// Adjoint vector of the planar maximum principle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarCostate {
    pub p_y: f64,
    pub p_z: f64,
}

impl PlanarCostate {
    pub fn new(p_y: f64, p_z: f64) -> Self {
        PlanarCostate { p_y, p_z }
    }

    pub fn norm(&self) -> f64 {
        self.p_y.hypot(self.p_z)
    }
}

/// Failures of the planar machinery.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanarError {
    /// The queried point does not lie on the singular set.
    NotOnSingularSet,
    /// `γ₊ = Γ`: the horizontal singular line escapes to infinity.
    SingularLineUndefined,
    /// The analytic switching determinant requires `γ₋ = 0`.
    NonAnalyticCase,
    /// `|γ₊ − Γ| = 2`: the constant-control spectrum degenerates and neither
    /// the real nor the rotational closed form applies.
    DegenerateSpectrum,
    /// A trajectory lacks costate data.
    MissingCostate,
    /// More switching events than the near-degeneracy budget allows.
    EventAccumulation { t: f64, count: usize },
    /// The initial costate annihilates `G`, `[G,F]` and both second brackets:
    /// no bang branch is selected by the maximum principle at this point.
    StartUndetermined,
    /// Arrival-time discretization too coarse for reliable cut-locus
    /// collision detection.
    GridTooCoarse { time_resolution: f64, horizon: f64 },
    /// Underlying integration failure.
    Ode(OdeError),
}

impl fmt::Display for PlanarError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanarError::NotOnSingularSet => write!(f, "point is not on the singular set"),
            PlanarError::SingularLineUndefined => {
                write!(f, "horizontal singular line undefined for gamma_plus = Gamma")
            }
            PlanarError::NonAnalyticCase => {
                write!(f, "analytic switching determinant requires gamma_minus = 0")
            }
            PlanarError::DegenerateSpectrum => {
                write!(f, "|gamma_plus - Gamma| = 2: degenerate constant-control spectrum")
            }
            PlanarError::MissingCostate => write!(f, "trajectory carries no costate"),
            PlanarError::EventAccumulation { t, count } => {
                write!(f, "{count} switching events by t = {t}: near-degenerate configuration")
            }
            PlanarError::StartUndetermined => {
                write!(f, "initial costate selects no bang branch (degenerate start)")
            }
            PlanarError::GridTooCoarse { time_resolution, horizon } => write!(
                f,
                "grid time resolution {time_resolution} too coarse over horizon {horizon} for cut detection"
            ),
            PlanarError::Ode(e) => write!(f, "integration failed: {e}"),
        }
    }
}

impl std::error::Error for PlanarError {}

impl From<OdeError> for PlanarError {
    fn from(e: OdeError) -> Self {
        PlanarError::Ode(e)
    }
}

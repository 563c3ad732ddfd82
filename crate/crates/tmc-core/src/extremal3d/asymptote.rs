//! Asymptotic classification of extremal tails.
//!
//! With relaxation on, extremals do not wander forever: the dissipative part
//! of the flow parks the base point on one of two stationary structures.
//!
//! * **Case (a) — interior point, escaping costate.**  The latitudinal
//!   costate `p_φ` runs off to `±∞` (exponentially), the control saturates at
//!   `v = (0, ε)` with `ε = sign(p_φ)`, and `(ρ, φ)` settles on the fixed
//!   point of the saturated flow,
//!   `ρ_f = |γ₋|√(1+Γ²)/(1+γ₊Γ)`, `φ_f = arctan(1/Γ)` (north branch,
//!   `ε = +1`) or `π − arctan(1/Γ)` (south branch, `ε = −1`).  The realized
//!   branch is fixed by the sign of `γ₋`.
//!
//! * **Case (b) — polar capture.**  The trajectory spirals into the polar
//!   axis, where the radial dynamics `ρ̇ = ±γ₋ − γ₊ρ` has the equilibrium
//!   `ρ_f = |γ₋|/γ₊`; the north pole captures `γ₋ > 0`, the south pole
//!   `γ₋ < 0`.
//!
//! Classification is evidence-based and never guessed: a label is assigned
//! only when the stop condition *and* the tail residual agree, otherwise the
//! report says [`CaseLabel::Undetermined`] and carries the nearest candidate
//! for inspection.

use serde::{Deserialize, Serialize};

use crate::params::DissipationParams;
use crate::tol;

use super::integrate::{ExtremalTrajectory, StopReason};
use super::ExtremalError;

/// Which stationary regime a trajectory tail was matched to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseLabel {
    A,
    B,
    Undetermined,
}

/// Outcome of [`classify_asymptote`].  For a determined label `(rho_f,
/// phi_f)` is the matched stationary point and `residual` the distance of the
/// trajectory tail to it; for [`CaseLabel::Undetermined`] they describe the
/// nearest (rejected) candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteReport {
    pub case_label: CaseLabel,
    pub rho_f: f64,
    pub phi_f: f64,
    pub residual: f64,
}

/// Interior stationary point `(ρ_f, φ_f)` of the saturated flow `v = (0, ε)`
/// (the case-(a) limit).  `eps` selects the branch: `+1` gives the northern
/// latitude `arctan(1/Γ)`, anything else the southern mirror; the branch an
/// escaping tail actually realizes is `eps = sign(γ₋)`.
///
/// For `γ₋ = 0` the radius degenerates to the ball centre and the returned
/// latitude is the formal limit of the formula, not an attractor of the
/// relaxation-free flow.
pub fn case_a_point(params: &DissipationParams, eps: f64) -> (f64, f64) {
    let g = params.gamma;
    let rho_f = params.gamma_minus.abs() * (1.0 + g * g).sqrt() / (1.0 + params.gamma_plus * g);
    let lat = (1.0 / g).atan();
    let phi_f = if eps > 0.0 { lat } else { std::f64::consts::PI - lat };
    (rho_f, phi_f)
}

/// Polar equilibrium `(ρ_f, φ_f)` of the axis dynamics (the case-(b) limit):
/// `ρ_f = |γ₋|/γ₊`, at the north pole for `γ₋ ≥ 0` and the south pole for
/// `γ₋ < 0` (the sign of `γ₋` decides which pole supports `ρ̇ = 0` at
/// positive radius).
pub fn case_b_point(params: &DissipationParams) -> (f64, f64) {
    let rho_f = params.gamma_minus.abs() / params.gamma_plus;
    let phi_f = if params.gamma_minus >= 0.0 { 0.0 } else { std::f64::consts::PI };
    (rho_f, phi_f)
}

/// Matches a trajectory tail against the two stationary regimes.
///
/// Case (a) requires the costate to have escaped (`|p_φ|` past the
/// chart-switch level, or a costate/asymptote stop) *and* the `(ρ, φ)` tail
/// to sit within `tol::TOL_ASYM` of [`case_a_point`]; case (b) requires a
/// polar stop (or `sin φ` inside ten stop collars) *and* tail agreement with
/// [`case_b_point`].  Everything else is reported as undetermined, with the
/// nearer candidate and its residual for diagnosis.
///
/// # Errors
///
/// [`ExtremalError::HorizonTooShort`] when the trajectory simply ran out of
/// time (`stop == HorizonReached` before `tol::T_ASYM`): such a tail carries
/// no asymptotic evidence either way.
pub fn classify_asymptote(
    traj: &ExtremalTrajectory,
    params: &DissipationParams,
) -> Result<AsymptoteReport, ExtremalError> {
    // A run cut off by its horizon earlier than the convergence timescale is
    // inconclusive by construction (small slack absorbs event-resolution
    // truncation of the final time).
    if traj.stop == StopReason::HorizonReached && traj.t_end < tol::T_ASYM - 1e-6 {
        return Err(ExtremalError::HorizonTooShort { t_end: traj.t_end });
    }
    let Some(s_end) = traj.final_state() else {
        return Err(ExtremalError::HorizonTooShort { t_end: traj.t_end });
    };

    let eps = if params.gamma_minus != 0.0 {
        params.gamma_minus.signum()
    } else {
        s_end.p_phi.signum()
    };
    let (rho_a, phi_a) = case_a_point(params, eps);
    let residual_a = (s_end.rho - rho_a).hypot(s_end.phi - phi_a);
    let costate_escaped = s_end.p_phi.abs() > tol::P_BIG
        || matches!(traj.stop, StopReason::CostateUnbounded | StopReason::AsymptoteConverged);
    if costate_escaped && residual_a < tol::TOL_ASYM {
        return Ok(AsymptoteReport {
            case_label: CaseLabel::A,
            rho_f: rho_a,
            phi_f: phi_a,
            residual: residual_a,
        });
    }

    let (rho_b, phi_b) = case_b_point(params);
    let residual_b = (s_end.rho - rho_b).hypot(s_end.phi - phi_b);
    let at_pole = traj.stop == StopReason::PoleApproach
        || s_end.phi.sin().abs() < 10.0 * tol::POLE_STOP_SIN;
    if at_pole && residual_b < tol::TOL_ASYM {
        return Ok(AsymptoteReport {
            case_label: CaseLabel::B,
            rho_f: rho_b,
            phi_f: phi_b,
            residual: residual_b,
        });
    }

    let (rho_f, phi_f, residual) = if residual_a <= residual_b {
        (rho_a, phi_a, residual_a)
    } else {
        (rho_b, phi_b, residual_b)
    };
    Ok(AsymptoteReport { case_label: CaseLabel::Undetermined, rho_f, phi_f, residual })
}

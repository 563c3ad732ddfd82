//! Controlled vector fields of the dissipative qubit in both charts.
//!
//! Cartesian Bloch form (rescaled units, control bound `|u| ≤ 1`):
//!
//! ```text
//! ẋ = −Γx + u₂z
//! ẏ = −Γy − u₁z
//! ż = γ₋ − γ₊z + u₁y − u₂x
//! ```
//!
//! Spherical form in `(ρ, φ, θ)` with the rotated feedback pair `(v₁, v₂)`:
//!
//! ```text
//! ρ̇ = γ₋ cos φ − ρ(γ₊cos²φ + Γsin²φ)
//! φ̇ = −γ₋ sin φ / ρ + (sin 2φ / 2)(γ₊ − Γ) + v₂
//! θ̇ = −cot φ · v₁
//! ```
//!
//! The feedback rotation is `v₁ = u₁cos θ + u₂sin θ`, `v₂ = −u₁sin θ + u₂cos θ`.

use crate::params::DissipationParams;
use crate::state::{BlochState, ChartError, ControlFrame, ControlVector, SphericalState};
use crate::tol::{EPS_POLE, EPS_RHO};

/// Time derivative of a Cartesian Bloch state.
pub type BlochDerivative = [f64; 3];

/// Time derivative of a spherical state `(ρ̇, φ̇, θ̇)`.
pub type SphericalDerivative = [f64; 3];

/// Cartesian controlled field.  A feedback-frame control is rotated into the
/// Cartesian frame using the azimuth of `q` (conventionally `0` on the polar
/// axis, where the feedback frame degenerates).
pub fn bloch_rhs(q: &BlochState, params: &DissipationParams, u: &ControlVector) -> BlochDerivative {
    let u = match u.frame {
        ControlFrame::Cartesian => *u,
        ControlFrame::Feedback => u.to_cartesian(q.y.atan2(q.x)),
    };
    let g = params.gamma;
    [
        -g * q.x + u.c2 * q.z,
        -g * q.y - u.c1 * q.z,
        params.gamma_minus - params.gamma_plus * q.z + u.c1 * q.y - u.c2 * q.x,
    ]
}

/// Spherical controlled field with feedback controls; guards the chart.
pub fn spherical_rhs(
    s: &SphericalState,
    params: &DissipationParams,
    v: &ControlVector,
) -> Result<SphericalDerivative, ChartError> {
    if s.rho < EPS_RHO {
        return Err(ChartError::OriginSingularity);
    }
    let (sin_phi, cos_phi) = s.phi.sin_cos();
    if sin_phi.abs() < EPS_POLE {
        return Err(ChartError::PoleSingularity);
    }
    let v = v.to_feedback(s.theta);
    let (gm, gp, g) = (params.gamma_minus, params.gamma_plus, params.gamma);
    let k = gp * cos_phi * cos_phi + g * sin_phi * sin_phi;
    let rho_dot = gm * cos_phi - s.rho * k;
    let phi_dot = -gm * sin_phi / s.rho + 0.5 * (2.0 * s.phi).sin() * (gp - g) + v.c2;
    let theta_dot = -(cos_phi / sin_phi) * v.c1;
    Ok([rho_dot, phi_dot, theta_dot])
}

//! Feedback-rescaled normal form of the planar system — diagnostic only.
//!
//! In coordinates `x = ρ²/2` (with `ρ² = y² + z_full²`) and `z` measured from
//! the horizontal singular line `z_full = γ₋/(2(γ₊−Γ))`, a feedback rescaling
//! `u → βu` straightens the control field and yields
//!
//! ```text
//! ẋ = γ₋²/(4(γ₊−Γ)) − 2Γx + (Γ−γ₊)z²
//! ż = γ₋(γ₊−2Γ)/(2(γ₊−Γ)) − γ₊z + u
//! ```
//!
//! The feedback invariants survive the rescaling — the collinear set is
//! exactly `{ẋ = 0}` and the singular line is `{z = 0}` — but the rescaling
//! wipes out the `y = 0` singular axis, the singularities of `F ± G`, and the
//! saturation of the singular control.  This module is therefore a validation
//! device for the invariants, never the production model.

use crate::params::DissipationParams;
use crate::planar::PlanarError;

/// Rescaled dynamics `(ẋ, ż)` at `(x, z)` under the rescaled control `u`.
///
/// Requires `γ₊ ≠ Γ` (the line the `z`-coordinate is anchored to must exist).
pub fn normal_form_rhs(
    x: f64,
    z: f64,
    u: f64,
    params: &DissipationParams,
) -> Result<[f64; 2], PlanarError> {
    let (g, gp, gm) = (params.gamma, params.gamma_plus, params.gamma_minus);
    if gp == g {
        return Err(PlanarError::SingularLineUndefined);
    }
    Ok([
        gm * gm / (4.0 * (gp - g)) - 2.0 * g * x + (g - gp) * z * z,
        gm * (gp - 2.0 * g) / (2.0 * (gp - g)) - gp * z + u,
    ])
}

/// Adjoint diagnostic `(ṗ_x, ṗ_z)` for the rescaled model:
///
/// ```text
/// ṗ_x = 2Γ p_x
/// ṗ_z = −2z p_x (Γ−γ₊) + γ₋ p_z
/// ```
///
/// The `p_x` row integrates in closed form to `p_x(0)·e^{2Γt}`, pinned by a
/// test below.  Note that the `p_z` row carries `γ₋` on `p_z`, whereas the
/// canonical costate equation `ṗ = −(∂f/∂z)ᵀp` of [`normal_form_rhs`] would
/// carry `γ₊` there; this function keeps the `γ₋` variant on purpose — it
/// reproduces the diagnostic form as stated, and the mismatch is pinned by a
/// regression test instead of being silently corrected.
pub fn normal_form_adjoint_rhs(
    p_x: f64,
    p_z: f64,
    z: f64,
    params: &DissipationParams,
) -> [f64; 2] {
    let (g, gp, gm) = (params.gamma, params.gamma_plus, params.gamma_minus);
    [
        2.0 * g * p_x,
        -2.0 * z * p_x * (g - gp) + gm * p_z,
    ]
}

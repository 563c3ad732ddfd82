//! Feedback-invariant sets of the planar problem and singular-arc data.
//!
//! Two determinantal loci organize the synthesis:
//!
//! * the singular set `S = {det(G, [G,F]) = 0}`, where singular extremals can
//!   live — here the union of the vertical axis `y = 0` and the horizontal
//!   line `z = γ₋ / (2(γ₊ − Γ))`;
//! * the collinear set `C = {det(G, F) = 0}`, where drift and control field
//!   are parallel — an ellipse through the origin (a point if `γ₋ = 0`).
//!
//! Determinant convention throughout: `det(V, W) = V_y W_z − V_z W_y` with the
//! first argument in the first column.

use crate::params::DissipationParams;
use crate::planar::lie::{control_element, drift_element, lie_bracket};
use crate::planar::{PlanarError, PlanarState};
use crate::tol;
use serde::{Deserialize, Serialize};

fn det2(v: [f64; 2], w: [f64; 2]) -> f64 {
    v[0] * w[1] - v[1] * w[0]
}

/// `det(G, [G,F])(q) = y·[2(Γ − γ₊) z + γ₋]`; its zero set is `S`.
pub fn singular_set_eval(q: PlanarState, params: &DissipationParams) -> f64 {
    q.y * (2.0 * (params.gamma - params.gamma_plus) * q.z + params.gamma_minus)
}

/// `det(G, F)(q) = γ₊ z² + Γ y² − γ₋ z`; its zero set is `C`.
pub fn collinear_set_eval(q: PlanarState, params: &DissipationParams) -> f64 {
    params.gamma_plus * q.z * q.z + params.gamma * q.y * q.y - params.gamma_minus * q.z
}

/// Local type of a singular point, decided by the sign of `D·D″`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingularKind {
    /// `D·D″ > 0`: the singular control is locally time-minimizing (fast arc).
    Hyperbolic,
    /// `D·D″ < 0`: the singular arc is locally time-maximizing.
    Elliptic,
    /// `D·D″ ≈ 0`: on the collinear set or at another degeneracy.
    Degenerate,
}

/// Result of [`classify_singular`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularClassification {
    pub kind: SingularKind,
    /// The classifying product `D·D″ = det(G,[[G,F],G]) · det(G,F)`.
    pub dd_value: f64,
}

/// Relative membership test for `S`: the raw determinant scaled by the field
/// magnitudes, so the tolerance is a sine of an angle rather than an
/// area with problem-dependent units.
pub(crate) fn singular_membership(q: PlanarState, params: &DissipationParams) -> f64 {
    let g = control_element().eval(q);
    let gf = lie_bracket(&control_element(), &drift_element(params)).eval(q);
    let scale = g[0].hypot(g[1]) * gf[0].hypot(gf[1]);
    singular_set_eval(q, params) / scale.max(f64::MIN_POSITIVE)
}

/// Classify a point of the singular set as hyperbolic, elliptic or
/// degenerate via the sign of `D·D″` with `D = det(G, [[G,F],G])` and
/// `D″ = det(G, F)`.
///
/// Fails with [`PlanarError::NotOnSingularSet`] when `q` is not on `S`
/// (relative tolerance [`tol::EPS_CLASS`]).
pub fn classify_singular(
    q: PlanarState,
    params: &DissipationParams,
) -> Result<SingularClassification, PlanarError> {
    if singular_membership(q, params).abs() > tol::EPS_CLASS.max(1e-12) {
        return Err(PlanarError::NotOnSingularSet);
    }
    let f = drift_element(params);
    let g = control_element();
    let gf = lie_bracket(&g, &f);
    let gfg = lie_bracket(&gf, &g);
    let d = det2(g.eval(q), gfg.eval(q));
    let dpp = det2(g.eval(q), f.eval(q));
    let dd = d * dpp;
    // Degeneracy threshold in the same relative units as the membership test.
    let scale = {
        let gv = g.eval(q);
        let gn = gv[0].hypot(gv[1]);
        let gfgv = gfg.eval(q);
        let fv = f.eval(q);
        gn * gfgv[0].hypot(gfgv[1]) * gn * fv[0].hypot(fv[1])
    };
    let kind = if dd > tol::EPS_CLASS * scale.max(f64::MIN_POSITIVE) {
        SingularKind::Hyperbolic
    } else if dd < -tol::EPS_CLASS * scale.max(f64::MIN_POSITIVE) {
        SingularKind::Elliptic
    } else {
        SingularKind::Degenerate
    };
    Ok(SingularClassification { kind, dd_value: dd })
}

/// Singular control on the *horizontal* line `z = γ₋ / (2(γ₊ − Γ))`:
///
/// ```text
/// u_s(y) = γ₋ (γ₊ − 2Γ) / (2 y (Γ − γ₊))
/// ```
///
/// Returns the control value and whether it is admissible (`|u_s| ≤ 1`).
/// At `y = 0` with a non-vanishing numerator the division blows up and the
/// pair `(±∞, false)` is returned; for `γ₋ = 0` the control is identically
/// zero (admissible everywhere on the line).
///
/// Errors: [`PlanarError::SingularLineUndefined`] when `γ₊ = Γ`,
/// [`PlanarError::NotOnSingularSet`] when `q` is not on the line.
pub fn singular_control(
    q: PlanarState,
    params: &DissipationParams,
) -> Result<(f64, bool), PlanarError> {
    let z_line = params
        .horizontal_singular_z()
        .ok_or(PlanarError::SingularLineUndefined)?;
    if (q.z - z_line).abs() > 1e-9 * (1.0 + z_line.abs()) {
        return Err(PlanarError::NotOnSingularSet);
    }
    let numerator = params.gamma_minus * (params.gamma_plus - 2.0 * params.gamma);
    if numerator == 0.0 {
        return Ok((0.0, true));
    }
    let u = numerator / (2.0 * q.y * (params.gamma - params.gamma_plus));
    Ok((u, u.abs() <= 1.0))
}

/// Singular control at any point of `S` from the determinant identity
/// `u_s = −D′ / D` with `D′ = det(G, [[G,F],F])` and `D = det(G, [[G,F],G])`.
///
/// On the horizontal line this reduces to [`singular_control`]; on the
/// vertical axis it gives `u_s = 0`.  Returns `(u_s, admissible)`; the value
/// is `±∞` (not admissible) where `D` vanishes, and `NaN` only at points
/// where `D` and `D′` vanish together.
pub fn singular_control_general(q: PlanarState, params: &DissipationParams) -> (f64, bool) {
    let f = drift_element(params);
    let g = control_element();
    let gf = lie_bracket(&g, &f);
    let d = det2(g.eval(q), lie_bracket(&gf, &g).eval(q));
    let dp = det2(g.eval(q), lie_bracket(&gf, &f).eval(q));
    if dp == 0.0 {
        // Covers the vertical axis and the γ₋ = 0 horizontal line without
        // manufacturing 0/0.
        return (0.0, true);
    }
    let u = -dp / d;
    (u, u.abs() <= 1.0)
}

/// `|y|` at which the horizontal singular control saturates (`|u_s| = 1`),
/// or `None` when it never does (`γ₋ (γ₊ − 2Γ) = 0`) or the line itself is
/// undefined.
pub fn horizontal_saturation_y(params: &DissipationParams) -> Option<f64> {
    params.horizontal_singular_z()?;
    let numerator = params.gamma_minus * (params.gamma_plus - 2.0 * params.gamma);
    if numerator == 0.0 {
        return None;
    }
    Some((numerator / (2.0 * (params.gamma - params.gamma_plus))).abs())
}

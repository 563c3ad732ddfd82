//! Polar blow-up of the switching surface `Σ = {H₁ = H₂ = 0}`.
//!
//! With `ψ = π/2 − φ` the switching components near the equator are
//! `H₁ = −p_θ tan ψ` and `H₂ = p_φ`; Σ is the codimension-two set
//! `ψ = p_φ = 0` (for `p_θ ≠ 0`).  Writing `(H₁, H₂) = r(cos α, sin α)`
//! and expanding the flow to leading order in `r` gives the fibre dynamics
//!
//! ```text
//! ṙ   = γ₋ [ p_ρ sin α − (p_θ/ρ) cos α ]               =: f(α)
//! r α̇ = γ₋ [ p_ρ cos α + (p_θ/ρ) sin α ] − p_θ          =: g(α)
//! ```
//!
//! over the frozen base `(ρ, θ, p_ρ, p_θ)`.  A trajectory can reach and
//! leave Σ only along directions where the fibre rotation stalls, i.e. the
//! roots of `g`.  Since `f = −g′`, the two simple roots of
//! `R cos(α − δ) = p_θ` (with `R = |γ₋|·√(p_ρ² + p_θ²/ρ²)` and
//! `δ = atan2(p_θ/ρ, p_ρ)` up to the sign of `γ₋`) always split into one
//! strictly incoming (`ṙ < 0`) and one strictly outgoing (`ṙ > 0`)
//! direction.  The degenerate tangency `|p_θ| = R` collapses them into a
//! double root and is reported as an error rather than classified.

use serde::{Deserialize, Serialize};

use crate::params::DissipationParams;

use super::{ExtremalError, ExtremalState};

use std::f64::consts::{FRAC_PI_2, PI};

/// Relative tolerance deciding when the root equation is tangent
/// (`|p_θ| ≈ R`) rather than transversal.
const DEGENERACY_REL: f64 = 1e-10;

/// A point of the blown-up switching locus: the base point on Σ together
/// with polar fibre coordinates `(r, α)` on the switching plane.
///
/// `ψ = π/2 − φ` measures the signed distance from the equator; the chart
/// reconstruction `H₁ = −p_θ tan ψ`, `H₂ = p_φ` holds with
/// `(H₁, H₂) = r (cos α, sin α)` and `r ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupState {
    /// Radial coordinate of the base point.
    pub rho: f64,
    /// Signed latitude `π/2 − φ` (zero on the equator).
    pub psi: f64,
    /// Azimuth of the base point.
    pub theta: f64,
    /// Radial momentum of the base point.
    pub p_rho: f64,
    /// Azimuthal momentum (first integral).
    pub p_theta: f64,
    /// Fibre angle on the switching plane.
    pub alpha: f64,
    /// Fibre radius, `r = √(H₁² + H₂²) ≥ 0`.
    pub r: f64,
}

impl BlowupState {
    /// Reads the blow-up coordinates off a phase point near the equator.
    ///
    /// No proximity check is made: the caller decides how close to Σ the
    /// point has to be for the leading-order fibre dynamics to be a faithful
    /// model (the integrator hands over at a small multiple of `|p_θ|`).
    pub fn from_extremal(s: &ExtremalState) -> Self {
        let psi = FRAC_PI_2 - s.phi;
        let h1 = -s.p_theta * psi.tan();
        let h2 = s.p_phi;
        Self {
            rho: s.rho,
            psi,
            theta: s.theta,
            p_rho: s.p_rho,
            p_theta: s.p_theta,
            alpha: h2.atan2(h1).rem_euclid(2.0 * PI),
            r: h1.hypot(h2),
        }
    }

    /// Reconstructs the phase point determined by the base and the fibre.
    ///
    /// For `p_θ ≠ 0` the latitude is recovered from
    /// `tan ψ = −r cos α / p_θ`; for `p_θ = 0` the switching plane carries no
    /// latitude information (`H₁ ≡ 0`) and the stored `ψ` is kept.
    pub fn to_extremal(&self) -> ExtremalState {
        let psi = if self.p_theta != 0.0 {
            (-self.r * self.alpha.cos() / self.p_theta).atan()
        } else {
            self.psi
        };
        ExtremalState {
            rho: self.rho,
            phi: FRAC_PI_2 - psi,
            theta: self.theta,
            p_rho: self.p_rho,
            p_phi: self.r * self.alpha.sin(),
            p_theta: self.p_theta,
        }
    }

    /// The same base point with a different fibre.
    pub fn with_fibre(&self, alpha: f64, r: f64) -> Self {
        Self { alpha, r, ..*self }
    }

    /// Angular stall function `g(α)`: crossing directions are its roots.
    pub fn angular_rate(&self, alpha: f64, params: &DissipationParams) -> f64 {
        let gm = params.gamma_minus;
        gm * (self.p_rho * alpha.cos() + self.p_theta / self.rho * alpha.sin()) - self.p_theta
    }

    /// Radial rate `f(α) = ṙ` along the fibre direction `α`.
    pub fn radial_rate(&self, alpha: f64, params: &DissipationParams) -> f64 {
        let gm = params.gamma_minus;
        gm * (self.p_rho * alpha.sin() - self.p_theta / self.rho * alpha.cos())
    }
}

/// One admissible direction through the blown-up switching locus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingRoot {
    /// Fibre angle in `[0, 2π)` where the angular rotation stalls.
    pub alpha: f64,
    /// Radial speed `ṙ` along the direction.
    pub r_dot: f64,
    /// `+1` for outgoing (`ṙ > 0`), `−1` for incoming (`ṙ < 0`).
    pub r_dot_sign: i8,
}

/// Solves the blow-up root equation for the admissible crossing directions
/// of Σ at the given base point.
///
/// The equation `g(α) = 0` is `R cos(α − δ) = p_θ` in closed form; the roots
/// are `α = δ ± arccos(p_θ/R)`, folded into `[0, 2π)` and returned sorted by
/// angle.  Because `ṙ = −g′(α)`, a transversal pair always consists of one
/// incoming and one outgoing direction.
///
/// Special cases: for `p_θ = 0` the roots are `π/2` and `3π/2` — the
/// latitudinal control flips sign, which is precisely an ordinary planar
/// switching seen from the 3-D chart.  For `γ₋ = 0` and `p_θ ≠ 0` the fibre
/// rotates at the constant rate `−p_θ/r` and never stalls: no extremal
/// reaches Σ.
///
/// # Errors
///
/// * [`ExtremalError::NoAdmissibleCrossing`] when `|p_θ| > R` (no real root).
/// * [`ExtremalError::DegenerateRoot`] when `|p_θ| = R` within a relative
///   tolerance (tangent double root), including the fully degenerate case
///   `R = p_θ = 0` where every direction stalls.
pub fn blowup_crossing(
    b: &BlowupState,
    params: &DissipationParams,
) -> Result<Vec<CrossingRoot>, ExtremalError> {
    let gm = params.gamma_minus;
    let a_coef = gm * b.p_rho;
    let b_coef = gm * b.p_theta / b.rho;
    let r_amp = a_coef.hypot(b_coef);

    if r_amp == 0.0 {
        return if b.p_theta == 0.0 {
            // g ≡ 0: the fibre never rotates — the planar singular situation,
            // not classifiable by the transversal blow-up.
            Err(ExtremalError::DegenerateRoot { alpha: f64::NAN })
        } else {
            Err(ExtremalError::NoAdmissibleCrossing)
        };
    }

    let ratio = b.p_theta / r_amp;
    if ratio.abs() > 1.0 + DEGENERACY_REL {
        return Err(ExtremalError::NoAdmissibleCrossing);
    }
    let delta = b_coef.atan2(a_coef);
    if 1.0 - ratio.abs() <= DEGENERACY_REL {
        let alpha = if ratio >= 0.0 { delta } else { delta + PI };
        return Err(ExtremalError::DegenerateRoot { alpha: alpha.rem_euclid(2.0 * PI) });
    }

    let spread = ratio.clamp(-1.0, 1.0).acos();
    let mut roots: Vec<CrossingRoot> = [delta - spread, delta + spread]
        .iter()
        .map(|&alpha| {
            let alpha = alpha.rem_euclid(2.0 * PI);
            let r_dot = b.radial_rate(alpha, params);
            CrossingRoot { alpha, r_dot, r_dot_sign: if r_dot > 0.0 { 1 } else { -1 } }
        })
        .collect();
    roots.sort_by(|u, v| u.alpha.total_cmp(&v.alpha));
    Ok(roots)
}

/// Phase point on a crossing ray at fibre radius `r`, ready to hand to the
/// integrator: the way to start a trajectory *at* (a small distance from) a
/// switching-surface crossing, which [`super::integrate_extremal`] otherwise
/// refuses as on-Σ data.
///
/// With an outgoing root the flow leaves Σ; with an incoming one it runs into
/// the crossing and the integrator continues it through the blow-up.
pub fn launch_from_crossing(b: &BlowupState, root: &CrossingRoot, r: f64) -> ExtremalState {
    b.with_fibre(root.alpha, r).to_extremal()
}

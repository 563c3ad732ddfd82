//! Extremal flow of the bi-input time-minimal problem in spherical
//! coordinates.
//!
//! Away from the polar axis the rotating-frame dynamics with both control
//! components reduces, after maximization of the pre-Hamiltonian over the
//! unit control disc, to the flow of the true Hamiltonian
//!
//! ```text
//! H_r = [γ₋ cos φ − ρ K(φ)] p_ρ + p_φ [ −γ₋ sin φ/ρ + (sin 2φ/2)(γ₊ − Γ) ] + Q ,
//! K(φ) = γ₊ cos²φ + Γ sin²φ ,      Q = √( p_θ² cot²φ + p_φ² ) ,
//! ```
//!
//! on the cotangent bundle of the spherical chart `(ρ, φ, θ)`.  The maximizing
//! control is the unit feedback vector `(v₁, v₂) = (−p_θ cot φ, p_φ) / Q`,
//! defined off the switching surface `Σ = {p_θ cot φ = p_φ = 0}`.  `θ` is
//! cyclic, so `p_θ` is a first integral; it is held exactly constant by every
//! routine in this module.
//!
//! The module splits into:
//!
//! * this file — the phase-space type, the Hamiltonian, the feedback control
//!   and the canonical right-hand side;
//! * [`jacobian`](self) — the analytic linearization of the flow, used by the
//!   conjugate-point machinery;
//! * [`blowup`](self) — the polar blow-up of Σ and the classification of
//!   admissible crossing directions;
//! * [`integrate`](self) — the event-aware integrator, including meridian
//!   reduction for `p_θ = 0`, chart rescaling of unbounded costates, and
//!   continuation through Σ;
//! * [`asymptote`](self) — classification of the two long-time regimes of the
//!   flow and their limit points.

mod asymptote;
mod blowup;
mod integrate;
mod jacobian;

pub use asymptote::{
    case_a_point, case_b_point, classify_asymptote, AsymptoteReport, CaseLabel,
};
pub use blowup::{blowup_crossing, launch_from_crossing, BlowupState, CrossingRoot};
pub use integrate::{
    integrate_extremal, ExtremalEvent, ExtremalEventKind, ExtremalOptions, ExtremalSample,
    ExtremalSegment, ExtremalTrajectory, FlowData, IntegrationChart, StopReason,
};
pub use jacobian::extremal_rhs_jacobian;
pub(crate) use jacobian::jacobian_raw;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ode::OdeError;
use crate::params::DissipationParams;
use crate::planar::PlanarError;
use crate::state::{ControlVector, SphericalState};
use crate::tol;

/// A point of the extremal phase space: spherical state plus costate.
///
/// The ordering matches the canonical pairing used throughout the module:
/// `(ρ, φ, θ)` are the base coordinates, `(p_ρ, p_φ, p_θ)` their conjugate
/// momenta.  `p_θ` is conserved along every extremal and is never updated by
/// the integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremalState {
    /// Radial coordinate (distance to the ball centre).
    pub rho: f64,
    /// Colatitude, measured from the north pole; `φ = π/2` is the equator.
    pub phi: f64,
    /// Azimuth around the polar axis (the cyclic variable).
    pub theta: f64,
    /// Momentum conjugate to `ρ`.
    pub p_rho: f64,
    /// Momentum conjugate to `φ`.
    pub p_phi: f64,
    /// Momentum conjugate to `θ` (first integral).
    pub p_theta: f64,
}

impl ExtremalState {
    /// Assembles a phase point from base coordinates and momenta.
    pub fn new(rho: f64, phi: f64, theta: f64, p_rho: f64, p_phi: f64, p_theta: f64) -> Self {
        Self { rho, phi, theta, p_rho, p_phi, p_theta }
    }

    /// Builds a phase point over a spherical base point.
    pub fn over(s: SphericalState, p_rho: f64, p_phi: f64, p_theta: f64) -> Self {
        Self::new(s.rho, s.phi, s.theta, p_rho, p_phi, p_theta)
    }

    /// The base point of the extremal.
    pub fn base(&self) -> SphericalState {
        SphericalState { rho: self.rho, phi: self.phi, theta: self.theta }
    }

    pub(crate) fn to_array(self) -> [f64; 6] {
        [self.rho, self.phi, self.theta, self.p_rho, self.p_phi, self.p_theta]
    }

    pub(crate) fn from_array(w: [f64; 6]) -> Self {
        Self::new(w[0], w[1], w[2], w[3], w[4], w[5])
    }
}

/// Failure modes of the extremal flow and its singular-surface machinery.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtremalError {
    /// The base point is too close to the ball centre for the spherical chart.
    OriginSingularity,
    /// The base point is too close to the polar axis for the spherical chart.
    PoleSingularity,
    /// The costate lies on the switching surface `Σ`, where the maximizing
    /// control direction is undefined; `q` is the offending switching radius.
    OnSwitchingSurface { q: f64 },
    /// The blow-up of Σ admits no crossing direction at this base point
    /// (the root equation `R cos(α − δ) = p_θ` has no solution).
    NoAdmissibleCrossing,
    /// The blow-up root equation has a double root: the crossing is tangent
    /// and the continuation is not classified.
    DegenerateRoot { alpha: f64 },
    /// The flow shrank onto Σ without matching any admissible crossing
    /// direction, down to the hard detection floor.
    UnresolvedCrossing { t: f64 },
    /// Σ crossings accumulated faster than the chattering guard allows.
    FullerAccumulation { t: f64, count: usize },
    /// The trajectory is too short for asymptotic classification.
    HorizonTooShort { t_end: f64 },
    /// The costate could not be scaled to the requested Hamiltonian level.
    NormalizationFailed { h0: f64 },
    /// A meridian extremal delegated to the planar flow failed there.
    Planar(PlanarError),
    /// The underlying integrator failed.
    Ode(OdeError),
}

impl fmt::Display for ExtremalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::OriginSingularity => {
                write!(f, "base point too close to the ball centre for the spherical chart")
            }
            Self::PoleSingularity => {
                write!(f, "base point too close to the polar axis for the spherical chart")
            }
            Self::OnSwitchingSurface { q } => {
                write!(f, "costate on the switching surface (switching radius {q:.3e})")
            }
            Self::NoAdmissibleCrossing => {
                write!(f, "switching-surface blow-up admits no crossing direction")
            }
            Self::DegenerateRoot { alpha } => {
                write!(f, "switching-surface crossing is tangent (double root at α = {alpha:.6})")
            }
            Self::UnresolvedCrossing { t } => {
                write!(f, "flow collapsed onto the switching surface at t = {t:.6} without an admissible crossing")
            }
            Self::FullerAccumulation { t, count } => {
                write!(f, "{count} switching-surface crossings accumulated near t = {t:.6}")
            }
            Self::HorizonTooShort { t_end } => {
                write!(f, "trajectory ends at t = {t_end:.3}, too short for asymptotic classification")
            }
            Self::NormalizationFailed { h0 } => {
                write!(f, "cannot normalize the Hamiltonian level from H_r = {h0:.6e}")
            }
            Self::Planar(e) => write!(f, "meridian reduction failed: {e}"),
            Self::Ode(e) => write!(f, "integration failed: {e}"),
        }
    }
}

impl std::error::Error for ExtremalError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Planar(e) => Some(e),
            Self::Ode(e) => Some(e),
            _ => None,
        }
    }
}

impl From<OdeError> for ExtremalError {
    fn from(e: OdeError) -> Self {
        Self::Ode(e)
    }
}

impl From<PlanarError> for ExtremalError {
    fn from(e: PlanarError) -> Self {
        Self::Planar(e)
    }
}

/// Hamiltonian level fixed at `t = 0` when normalizing an extremal.
///
/// The true Hamiltonian is positively homogeneous of degree one in the
/// costate, so its level can be scaled to `1` whenever it starts positive;
/// the exceptional level `0` is scale-invariant and can only be certified,
/// not produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HamiltonianLevel {
    /// Exceptional extremals, `H_r = 0`.
    Zero,
    /// Normal extremals, `H_r = 1`.
    One,
}

/// Radius of the costate in the switching plane: `Q = √(p_θ² cot²φ + p_φ²)`.
///
/// `Q` vanishes exactly on the switching surface Σ.  The value is computed in
/// a pole-safe form: for `p_θ ≠ 0` it diverges as the base point approaches
/// the polar axis, and the IEEE infinity is returned rather than a chart
/// error, since `Q` itself is a meaningful (extended) quantity there.
pub fn switching_radius(s: &ExtremalState) -> f64 {
    let (sin, cos) = s.phi.sin_cos();
    if s.p_theta == 0.0 {
        s.p_phi.abs()
    } else if sin == 0.0 {
        f64::INFINITY
    } else {
        (s.p_theta * cos / sin).hypot(s.p_phi)
    }
}

/// Evaluates the true (maximized) Hamiltonian `H_r` at a phase point.
///
/// # Errors
///
/// [`ExtremalError::OriginSingularity`] if `ρ` is below the chart guard and
/// [`ExtremalError::PoleSingularity`] if `|sin φ|` is: both `1/ρ` and `cot φ`
/// enter the formula.  `H_r` is perfectly regular on Σ itself (where it
/// reduces to the drift term), so no switching-surface guard applies.
pub fn hamiltonian_hr(
    s: &ExtremalState,
    params: &DissipationParams,
) -> Result<f64, ExtremalError> {
    let (sin, cos) = s.phi.sin_cos();
    if s.rho.abs() < tol::EPS_RHO {
        return Err(ExtremalError::OriginSingularity);
    }
    if sin.abs() < tol::EPS_POLE {
        return Err(ExtremalError::PoleSingularity);
    }
    let g = params.gamma;
    let gp = params.gamma_plus;
    let gm = params.gamma_minus;
    let k = gp * cos * cos + g * sin * sin;
    let q = (s.p_theta * cos / sin).hypot(s.p_phi);
    Ok((gm * cos - s.rho * k) * s.p_rho
        + s.p_phi * (-gm * sin / s.rho + sin * cos * (gp - g))
        + q)
}

/// The feedback control maximizing the pre-Hamiltonian, `(v₁, v₂) = (H₁, H₂)/Q`
/// with `H₁ = −p_θ cot φ` and `H₂ = p_φ`.
///
/// The quotient is evaluated in the pole-stable form
/// `(−p_θ cos φ, p_φ sin φ) / √(p_θ² cos²φ + p_φ² sin²φ)` (for `φ ∈ (0, π)`),
/// which stays finite on the polar axis whenever `p_θ ≠ 0`; the control
/// itself is well defined there even though the spherical chart is not.
///
/// # Errors
///
/// [`ExtremalError::OnSwitchingSurface`] when the costate lies on Σ within
/// the guard [`tol::EPS_SIGMA`] (scaled by `sin φ`), where the maximizer is
/// not unique.
pub fn control_from_costate(s: &ExtremalState) -> Result<ControlVector, ExtremalError> {
    let (sin, cos) = s.phi.sin_cos();
    let h1_scaled = -s.p_theta * cos;
    let h2_scaled = s.p_phi * sin;
    let r_scaled = h1_scaled.hypot(h2_scaled);
    if r_scaled <= tol::EPS_SIGMA * sin.abs().max(f64::MIN_POSITIVE) {
        let q = if sin == 0.0 { r_scaled } else { r_scaled / sin.abs() };
        return Err(ExtremalError::OnSwitchingSurface { q });
    }
    // For φ ∈ (0, π) we have sin φ > 0 and the scaled pair is a positive
    // multiple of (H₁, H₂); outside that range the sign of sin φ is restored.
    let sgn = if sin < 0.0 { -1.0 } else { 1.0 };
    Ok(ControlVector::feedback(sgn * h1_scaled / r_scaled, h2_scaled / r_scaled))
}

/// Canonical right-hand side of the extremal flow, `ẇ = (∂H_r/∂p, −∂H_r/∂q)`
/// for `w = (ρ, φ, θ, p_ρ, p_φ, p_θ)`:
///
/// ```text
/// ρ̇   = γ₋ cos φ − ρ K(φ)
/// φ̇   = −γ₋ sin φ/ρ + (sin 2φ/2)(γ₊ − Γ) + p_φ/Q
/// θ̇   = p_θ cot²φ / Q
/// ṗ_ρ = K(φ) p_ρ − γ₋ sin φ · p_φ/ρ²
/// ṗ_φ = [γ₋ sin φ + ρ(Γ − γ₊) sin 2φ] p_ρ
///        − [−γ₋ cos φ/ρ + (γ₊ − Γ) cos 2φ] p_φ + p_θ² cos φ/(Q sin³φ)
/// ṗ_θ = 0
/// ```
///
/// The last component is identically zero: `θ` is cyclic.
///
/// # Errors
///
/// Chart guards as in [`hamiltonian_hr`], plus
/// [`ExtremalError::OnSwitchingSurface`] when `Q` is below [`tol::EPS_SIGMA`]:
/// the flow direction is not defined on Σ and must be continued through the
/// blow-up machinery instead.
pub fn extremal_rhs(
    s: &ExtremalState,
    params: &DissipationParams,
) -> Result<[f64; 6], ExtremalError> {
    let (sin, cos) = s.phi.sin_cos();
    if s.rho.abs() < tol::EPS_RHO {
        return Err(ExtremalError::OriginSingularity);
    }
    if sin.abs() < tol::EPS_POLE {
        return Err(ExtremalError::PoleSingularity);
    }
    let q = (s.p_theta * cos / sin).hypot(s.p_phi);
    if q <= tol::EPS_SIGMA {
        return Err(ExtremalError::OnSwitchingSurface { q });
    }
    Ok(rhs_canonical(&s.to_array(), params, sin, cos, q))
}

/// The canonical vector field, with trigonometry and `Q` precomputed.
/// Shared by the public guard-checked entry point and the integrator's inner
/// loop (which performs its own event-based guarding).
pub(crate) fn rhs_canonical(
    w: &[f64; 6],
    params: &DissipationParams,
    sin: f64,
    cos: f64,
    q: f64,
) -> [f64; 6] {
    let [rho, _, _, p_rho, p_phi, p_theta] = *w;
    let g = params.gamma;
    let gp = params.gamma_plus;
    let gm = params.gamma_minus;
    let cot = cos / sin;
    let k = gp * cos * cos + g * sin * sin;
    let sin2 = 2.0 * sin * cos;
    let cos2 = cos * cos - sin * sin;
    [
        gm * cos - rho * k,
        -gm * sin / rho + 0.5 * sin2 * (gp - g) + p_phi / q,
        p_theta * cot * cot / q,
        k * p_rho - gm * sin * p_phi / (rho * rho),
        (gm * sin + rho * (g - gp) * sin2) * p_rho
            - (-gm * cos / rho + (gp - g) * cos2) * p_phi
            + p_theta * p_theta * cos / (q * sin * sin * sin),
        0.0,
    ]
}

/// Scales the costate so that the Hamiltonian level at this point equals the
/// requested value (`H_r` is positively homogeneous of degree one in `p`).
///
/// For [`HamiltonianLevel::One`] the costate is divided by the current level,
/// which must be positive.  For [`HamiltonianLevel::Zero`] no scaling can
/// create the level; the current level must already vanish (relative to the
/// costate magnitude), and the costate is then renormalized to unit length
/// for a reproducible representative.
///
/// # Errors
///
/// [`ExtremalError::NormalizationFailed`] when the requested level is not
/// attainable from this costate; chart errors propagate from
/// [`hamiltonian_hr`].
pub fn normalize_hamiltonian(
    s: &ExtremalState,
    params: &DissipationParams,
    level: HamiltonianLevel,
) -> Result<ExtremalState, ExtremalError> {
    let h0 = hamiltonian_hr(s, params)?;
    let p_norm =
        (s.p_rho * s.p_rho + s.p_phi * s.p_phi + s.p_theta * s.p_theta).sqrt();
    let scale = match level {
        HamiltonianLevel::One => {
            if h0 <= 1e-12 * p_norm.max(1.0) {
                return Err(ExtremalError::NormalizationFailed { h0 });
            }
            1.0 / h0
        }
        HamiltonianLevel::Zero => {
            if h0.abs() > 1e-9 * p_norm.max(1.0) || p_norm == 0.0 {
                return Err(ExtremalError::NormalizationFailed { h0 });
            }
            1.0 / p_norm
        }
    };
    Ok(ExtremalState {
        p_rho: scale * s.p_rho,
        p_phi: scale * s.p_phi,
        p_theta: scale * s.p_theta,
        ..*s
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tol;

    fn params(g: f64, gp: f64, gm: f64) -> DissipationParams {
        DissipationParams::new(g, gp, gm).unwrap()
    }

    fn state(w: [f64; 6]) -> ExtremalState {
        ExtremalState::from_array(w)
    }

    /// Simple deterministic pseudo-random stream for property checks,
    /// identical in style to the planar test suites.
    struct SplitMix(u64);

    impl SplitMix {
        fn next_f64(&mut self) -> f64 {
            self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = self.0;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z = z ^ (z >> 31);
            (z >> 11) as f64 / (1u64 << 53) as f64
        }

        fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
            lo + (hi - lo) * self.next_f64()
        }
    }

    /// An off-axis, off-Σ phase point with moderate coordinates.
    fn random_point(rng: &mut SplitMix) -> ExtremalState {
        state([
            rng.in_range(0.2, 0.95),
            rng.in_range(0.4, std::f64::consts::PI - 0.4),
            rng.in_range(0.0, 6.0),
            rng.in_range(-2.0, 2.0),
            rng.in_range(0.3, 2.5) * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 },
            rng.in_range(0.3, 2.5) * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 },
        ])
    }

    #[test]
    fn hamiltonian_vanishes_with_costate() {
        let pr = params(2.0, 1.0, 0.5);
        let s = state([0.6, 1.1, 0.3, 0.0, 0.0, 0.0]);
        assert_eq!(hamiltonian_hr(&s, &pr).unwrap(), 0.0);
    }

    #[test]
    fn hamiltonian_on_equator_reduces_to_radial_term() {
        // At φ = π/2 with γ₋ = 0 and p_φ = 0 only the relaxation term
        // −Γ ρ p_ρ and the residual |p_θ cot φ| = 0 survive.
        let pr = params(2.0, 1.0, 0.0);
        let s = state([0.7, std::f64::consts::FRAC_PI_2, 1.0, 1.3, 0.0, 2.0]);
        let h = hamiltonian_hr(&s, &pr).unwrap();
        assert!((h - (-2.0 * 0.7 * 1.3)).abs() < 1e-14, "h = {h}");
    }

    #[test]
    fn hamiltonian_guards_chart_singularities() {
        let pr = params(2.0, 1.0, 0.5);
        let origin = state([1e-12, 1.0, 0.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            hamiltonian_hr(&origin, &pr),
            Err(ExtremalError::OriginSingularity)
        ));
        let pole = state([0.5, 1e-12, 0.0, 1.0, 1.0, 1.0]);
        assert!(matches!(hamiltonian_hr(&pole, &pr), Err(ExtremalError::PoleSingularity)));
    }

    #[test]
    fn control_latitudinal_when_p_theta_vanishes() {
        // p_θ = 0, p_φ > 0: the maximizer is the pure latitudinal rotation
        // (v₁, v₂) = (0, 1).
        let s = state([0.5, 1.0, 0.0, 0.3, 0.8, 0.0]);
        let v = control_from_costate(&s).unwrap();
        let (v1, v2) = (v.c1, v.c2);
        assert!(v1.abs() < 1e-15 && (v2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn control_azimuthal_when_p_phi_vanishes() {
        // p_φ = 0 and p_θ cot φ > 0: the maximizer is (−1, 0).
        let s = state([0.5, 0.9, 0.0, 0.3, 0.0, 1.4]);
        assert!(1.4 * (0.9f64).tan().recip() > 0.0);
        let v = control_from_costate(&s).unwrap();
        let (v1, v2) = (v.c1, v.c2);
        assert!((v1 + 1.0).abs() < 1e-15 && v2.abs() < 1e-15);
    }

    #[test]
    fn control_has_unit_norm_off_sigma() {
        let mut rng = SplitMix(0x5eed_0001);
        for _ in 0..200 {
            let s = random_point(&mut rng);
            let v = control_from_costate(&s).unwrap();
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn control_regular_at_pole_for_nonzero_p_theta() {
        // The chart degenerates at φ → 0 but the maximizer does not: it tends
        // to the azimuthal rotation (∓1, 0).
        let s = state([0.5, 1e-13, 0.0, 0.3, 0.7, 1.4]);
        let v = control_from_costate(&s).unwrap();
        let (v1, v2) = (v.c1, v.c2);
        assert!((v1 + 1.0).abs() < 1e-10 && v2.abs() < 1e-10);
    }

    #[test]
    fn control_rejects_switching_surface() {
        let s = state([0.5, std::f64::consts::FRAC_PI_2, 0.0, 0.3, 0.0, 1.4]);
        // At the equator cot φ = 0 exactly, so Q = |p_φ| = 0: on Σ.
        assert!(matches!(
            control_from_costate(&s),
            Err(ExtremalError::OnSwitchingSurface { .. })
        ));
    }

    #[test]
    fn rhs_keeps_p_theta_constant() {
        let pr = params(2.3, 1.7, -0.4);
        let mut rng = SplitMix(0x5eed_0002);
        for _ in 0..100 {
            let s = random_point(&mut rng);
            let f = extremal_rhs(&s, &pr).unwrap();
            assert_eq!(f[5], 0.0);
        }
    }

    /// Central-difference canonical equations of `H_r`, used as an
    /// independent oracle for the hand-written right-hand side.
    fn canonical_fd(s: &ExtremalState, pr: &DissipationParams) -> [f64; 6] {
        let h = 1e-6;
        let mut out = [0.0; 6];
        let w0 = s.to_array();
        let dh = |i: usize| {
            let mut wp = w0;
            let mut wm = w0;
            wp[i] += h;
            wm[i] -= h;
            let hp = hamiltonian_hr(&ExtremalState::from_array(wp), pr).unwrap();
            let hm = hamiltonian_hr(&ExtremalState::from_array(wm), pr).unwrap();
            (hp - hm) / (2.0 * h)
        };
        // q̇ = ∂H/∂p, ṗ = −∂H/∂q.
        out[0] = dh(3);
        out[1] = dh(4);
        out[2] = dh(5);
        out[3] = -dh(0);
        out[4] = -dh(1);
        out[5] = -dh(2);
        out
    }

    #[test]
    fn rhs_matches_canonical_equations_of_hr() {
        let regimes = [params(2.3, 1.7, -0.4), params(4.5, 2.0, 0.5), params(1.1, 1.6, 0.0)];
        let mut rng = SplitMix(0x5eed_0003);
        for pr in &regimes {
            for _ in 0..60 {
                let s = random_point(&mut rng);
                let f = extremal_rhs(&s, pr).unwrap();
                let fd = canonical_fd(&s, pr);
                for i in 0..6 {
                    let scale = 1.0f64.max(f[i].abs());
                    assert!(
                        (f[i] - fd[i]).abs() <= 1e-6 * scale,
                        "component {i}: analytic {} vs central difference {}",
                        f[i],
                        fd[i],
                    );
                }
            }
        }
    }

    #[test]
    fn rhs_guards_switching_surface() {
        let pr = params(2.3, 1.7, -0.4);
        let s = state([0.5, std::f64::consts::FRAC_PI_2, 0.0, 0.3, 0.0, 1.4]);
        assert!(matches!(
            extremal_rhs(&s, &pr),
            Err(ExtremalError::OnSwitchingSurface { .. })
        ));
    }

    #[test]
    fn switching_radius_handles_degenerate_corners() {
        let s = state([0.5, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(switching_radius(&s), 1.0); // p_θ = 0: Q = |p_φ| even at the pole
        let s = state([0.5, 0.0, 0.0, 0.0, 1.0, 2.0]);
        assert_eq!(switching_radius(&s), f64::INFINITY);
        let s = state([0.5, std::f64::consts::FRAC_PI_4, 0.0, 0.0, 3.0, 4.0]);
        assert!((switching_radius(&s) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_scales_to_unit_level() {
        let pr = params(2.3, 1.7, -0.4);
        let mut rng = SplitMix(0x5eed_0004);
        let mut done = 0;
        while done < 50 {
            let s = random_point(&mut rng);
            let h0 = hamiltonian_hr(&s, &pr).unwrap();
            if h0 <= 1e-6 {
                continue;
            }
            let n = normalize_hamiltonian(&s, &pr, HamiltonianLevel::One).unwrap();
            let h1 = hamiltonian_hr(&n, &pr).unwrap();
            assert!((h1 - 1.0).abs() < 1e-12, "h1 = {h1}");
            // Homogeneity: the base point is untouched.
            assert_eq!(n.base(), s.base());
            done += 1;
        }
    }

    #[test]
    fn normalization_to_zero_is_certification_only() {
        let pr = params(2.0, 1.0, 0.0);
        // Equator, γ₋ = 0: H_r = −Γ ρ p_ρ + |p_φ|; pick p_ρ so it vanishes.
        let rho = 0.5;
        let p_phi = 0.8;
        let p_rho = p_phi / (2.0 * rho);
        let s = state([rho, std::f64::consts::FRAC_PI_2, 0.0, p_rho, p_phi, 0.7]);
        let h0 = hamiltonian_hr(&s, &pr).unwrap();
        assert!(h0.abs() < 1e-14, "h0 = {h0}");
        let n = normalize_hamiltonian(&s, &pr, HamiltonianLevel::Zero).unwrap();
        let p_norm = (n.p_rho.powi(2) + n.p_phi.powi(2) + n.p_theta.powi(2)).sqrt();
        assert!((p_norm - 1.0).abs() < 1e-12);
        // A point on a nonzero level cannot be scaled to the zero level.
        let s1 = state([rho, std::f64::consts::FRAC_PI_2, 0.0, 0.0, p_phi, 0.7]);
        assert!(matches!(
            normalize_hamiltonian(&s1, &pr, HamiltonianLevel::Zero),
            Err(ExtremalError::NormalizationFailed { .. })
        ));
    }

    #[test]
    fn sigma_guard_level_matches_tolerance_module() {
        // The guard used by the right-hand side is the published constant.
        let pr = params(2.3, 1.7, -0.4);
        let s = state([0.5, std::f64::consts::FRAC_PI_2, 0.0, 0.3, 2.0 * tol::EPS_SIGMA, 1.4]);
        assert!(extremal_rhs(&s, &pr).is_ok());
    }
}

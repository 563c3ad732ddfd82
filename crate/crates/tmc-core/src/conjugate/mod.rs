//! Second-order analysis along extremals: Jacobi fields, conjugate points,
//! the planar θ-function, and Newton shooting.
//!
//! The flow of [`crate::extremal3d`] answers "where does this costate lead";
//! this module answers the two follow-up questions.  First, *until when is
//! the extremal locally optimal*: Jacobi fields — solutions of the variational
//! equation `δ̇ = Df(w(t))·δ` along a reference extremal — are transported
//! together with the flow, and the first time a vertical basis of them
//! degenerates in state space (rank test) is the first conjugate point.
//! Second, *which costate reaches a prescribed target*: the same transported
//! fields assemble the Jacobian of the endpoint map, which a damped Newton
//! iteration inverts ([`shoot`]).
//!
//! The time-optimal structure shapes both tests.  The Hamiltonian level and
//! the time translation are always degenerate directions of the endpoint map,
//! so the conjugate test works with vertical variations `δp(0)` orthogonal to
//! `∂H_r/∂p` (level-preserving) and measures rank deficiency against the
//! extremal velocity (time direction): three state dimensions leave a
//! two-column test, and its determinant with the velocity as third column is
//! the scalar whose sign change is bisected.  The planar problem has the
//! classical one-column version: the angle swept by the backward-transported
//! control direction (the θ-function), whose zeros mod π are the switching
//! times.
//!
//! Everything rests on the hand-written linearization
//! [`crate::extremal3d::extremal_rhs_jacobian`]; the determinant sign hunt
//! cannot afford differencing noise near its zeros.

mod rank;
mod shoot;
mod theta;

pub use rank::{first_conjugate, ConjugateRecord};
pub use shoot::{shoot, ShootingGuess, ShootingSolution};
pub use theta::theta_function;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::extremal3d::{extremal_rhs_jacobian, ExtremalError, ExtremalState};
use crate::ode::OdeError;
use crate::params::DissipationParams;
use crate::planar::PlanarError;

/// Failure modes of the second-order machinery.
#[derive(Debug, Clone, PartialEq)]
pub enum ConjugateError {
    /// The θ-function needs a planar arc with a single constant bang control
    /// on the queried window; the supplied arc (or window) is not one.
    NotPlanarArc,
    /// No Newton start converged; `residual` is the best endpoint mismatch
    /// seen across all starts.
    NoConvergence { residual: f64 },
    /// A shot collapsed onto the switching surface Σ at time `t`, where the
    /// smooth variational transport is invalid; the shot would need
    /// crossing-aware propagation.
    SigmaCrossingInShot { t: f64 },
    /// The reference extremal itself failed (chart guards, normalization,
    /// switching surface).
    Extremal(ExtremalError),
    /// A planar reference arc failed.
    Planar(PlanarError),
}

impl fmt::Display for ConjugateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotPlanarArc => {
                write!(f, "θ-function requires a single constant-control planar bang arc")
            }
            Self::NoConvergence { residual } => {
                write!(f, "shooting did not converge (best endpoint mismatch {residual:.3e})")
            }
            Self::SigmaCrossingInShot { t } => {
                write!(f, "shot crossed the switching surface at t = {t:.6}")
            }
            Self::Extremal(e) => write!(f, "reference extremal failed: {e}"),
            Self::Planar(e) => write!(f, "planar arc failed: {e}"),
        }
    }
}

impl std::error::Error for ConjugateError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Extremal(e) => Some(e),
            Self::Planar(e) => Some(e),
            _ => None,
        }
    }
}

impl From<ExtremalError> for ConjugateError {
    fn from(e: ExtremalError) -> Self {
        Self::Extremal(e)
    }
}

impl From<PlanarError> for ConjugateError {
    fn from(e: PlanarError) -> Self {
        Self::Planar(e)
    }
}

impl From<OdeError> for ConjugateError {
    fn from(e: OdeError) -> Self {
        Self::Extremal(ExtremalError::Ode(e))
    }
}

/// The derivative of a Jacobi field, `Df(w)·δ`, in the same component order
/// as the field itself.
pub type JacobiDerivative = [f64; 6];

/// A tangent vector `(δρ, δφ, δθ, δp_ρ, δp_φ, δp_θ)` along a reference
/// extremal — a solution of the variational equation.
///
/// Superposition holds along the transport: the flow map on Jacobi fields is
/// linear.  When the reference extremal is meridian (`p_θ = 0`), fields with
/// `δθ = δp_θ = 0` keep both components zero (the `θ` column and `p_θ` row of
/// the linearization vanish there), so the planar problem embeds as the
/// 4-vector mode `(δρ, δφ, δp_ρ, δp_φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiField {
    pub delta: [f64; 6],
}

impl JacobiField {
    pub fn new(delta: [f64; 6]) -> Self {
        Self { delta }
    }

    pub fn zero() -> Self {
        Self { delta: [0.0; 6] }
    }

    /// A vertical field: pure costate variation `(0, 0, 0, δp)`.
    pub fn vertical(dp: [f64; 3]) -> Self {
        Self { delta: [0.0, 0.0, 0.0, dp[0], dp[1], dp[2]] }
    }

    /// The meridian 4-vector mode `(δρ, δφ, δp_ρ, δp_φ)` embedded with
    /// `δθ = δp_θ = 0`.
    pub fn planar(d: [f64; 4]) -> Self {
        Self { delta: [d[0], d[1], 0.0, d[2], d[3], 0.0] }
    }

    /// The meridian components `(δρ, δφ, δp_ρ, δp_φ)`.
    pub fn planar_components(&self) -> [f64; 4] {
        [self.delta[0], self.delta[1], self.delta[3], self.delta[4]]
    }
}

/// Right-hand side of the variational equation at a reference phase point:
/// the linearization of the extremal field applied to the field, `Df(s)·δ`.
///
/// # Errors
///
/// The same chart and switching-surface guards as the reference flow itself
/// ([`ExtremalError::OnSwitchingSurface`] and the chart errors): the
/// linearization degenerates exactly where the flow does.
pub fn variational_rhs(
    s: &ExtremalState,
    j: &JacobiField,
    params: &DissipationParams,
) -> Result<JacobiDerivative, ConjugateError> {
    let m = extremal_rhs_jacobian(s, params)?;
    let mut out = [0.0; 6];
    for (r, row) in m.iter().enumerate() {
        out[r] = row.iter().zip(j.delta.iter()).map(|(a, b)| a * b).sum();
    }
    Ok(out)
}

/// Right-hand side of the extremal flow augmented with `(N − 6)/6` Jacobi
/// fields, for the transport integrations of the rank test and the shooting
/// Jacobian.  Layout: `w` in the first six slots, then each field's six.
///
/// No guards — integrator inner loops monitor the singular loci themselves
/// (the controller rejects the non-finite stages produced past a chart
/// boundary, and the callers stop on their own pole/origin/Σ watches).
pub(crate) fn augmented_rhs<const N: usize>(
    w: &[f64; N],
    params: &DissipationParams,
) -> [f64; N] {
    debug_assert!(N >= 6 && (N - 6) % 6 == 0);
    let base: [f64; 6] = w[..6].try_into().expect("layout");
    let (sin, cos) = base[1].sin_cos();
    let q = (base[5] * cos / sin).hypot(base[4]);
    let f = crate::extremal3d::rhs_canonical(&base, params, sin, cos, q);
    let m = crate::extremal3d::jacobian_raw(&base, params, sin, cos, q);
    let mut out = [0.0; N];
    out[..6].copy_from_slice(&f);
    for k in 0..(N - 6) / 6 {
        let off = 6 + 6 * k;
        for (r, row) in m.iter().enumerate() {
            let mut acc = 0.0;
            for (c, entry) in row.iter().enumerate() {
                acc += entry * w[off + c];
            }
            out[off + r] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremal3d::extremal_rhs;
    use crate::ode::{Dopri5, OdeOptions};

    fn params(g: f64, gp: f64, gm: f64) -> DissipationParams {
        DissipationParams::new(g, gp, gm).unwrap()
    }

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

    fn random_point(rng: &mut SplitMix) -> ExtremalState {
        ExtremalState::new(
            rng.in_range(0.2, 0.95),
            rng.in_range(0.4, std::f64::consts::PI - 0.4),
            rng.in_range(0.0, 6.0),
            rng.in_range(-2.0, 2.0),
            rng.in_range(0.3, 2.5) * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 },
            rng.in_range(0.3, 2.5) * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 },
        )
    }

    #[test]
    fn zero_field_has_zero_derivative() {
        let pr = params(2.5, 2.0, -0.5);
        let s = ExtremalState::new(0.7, 1.1, 0.3, 0.4, 0.8, 1.2);
        let d = variational_rhs(&s, &JacobiField::zero(), &pr).unwrap();
        assert_eq!(d, [0.0; 6]);
    }

    #[test]
    fn matches_directional_differences() {
        // Directional derivative oracle: Df(s)·δ against the central
        // difference (f(w + hδ) − f(w − hδ))/2h with step 1e−6.
        let pr = params(2.5, 2.0, -0.5);
        let mut rng = SplitMix(0x5eed_0020);
        for _ in 0..100 {
            let s = random_point(&mut rng);
            let mut delta = [0.0; 6];
            for d in delta.iter_mut() {
                *d = rng.in_range(-1.0, 1.0);
            }
            let j = JacobiField::new(delta);
            let dv = variational_rhs(&s, &j, &pr).unwrap();

            let w0 = s.to_array();
            let h = 1e-6;
            let mut wp = w0;
            let mut wm = w0;
            for i in 0..6 {
                wp[i] += h * delta[i];
                wm[i] -= h * delta[i];
            }
            let fp = extremal_rhs(&ExtremalState::from_array(wp), &pr).unwrap();
            let fm = extremal_rhs(&ExtremalState::from_array(wm), &pr).unwrap();
            for r in 0..6 {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                let scale = 1.0f64.max(dv[r].abs());
                assert!(
                    (dv[r] - fd).abs() <= 1e-5 * scale,
                    "component {r}: analytic {} vs difference {fd}",
                    dv[r],
                );
            }
        }
    }

    #[test]
    fn guards_mirror_the_flow() {
        let pr = params(2.5, 2.0, -0.5);
        let on_sigma =
            ExtremalState::new(0.5, std::f64::consts::FRAC_PI_2, 0.0, 0.3, 0.0, 1.4);
        let j = JacobiField::vertical([1.0, 0.0, 0.0]);
        assert!(matches!(
            variational_rhs(&on_sigma, &j, &pr),
            Err(ConjugateError::Extremal(ExtremalError::OnSwitchingSurface { .. }))
        ));
    }

    /// Transports the extremal together with three Jacobi fields and returns
    /// the three transported fields.
    fn transport_three(
        s0: &ExtremalState,
        fields: [[f64; 6]; 3],
        pr: &DissipationParams,
        t_end: f64,
    ) -> [[f64; 6]; 3] {
        let mut y0 = [0.0; 24];
        y0[..6].copy_from_slice(&s0.to_array());
        for (k, f) in fields.iter().enumerate() {
            y0[6 + 6 * k..12 + 6 * k].copy_from_slice(f);
        }
        let pr = *pr;
        let mut sol = Dopri5::new(
            move |_, y: &[f64; 24]| augmented_rhs(y, &pr),
            0.0,
            y0,
            t_end,
            OdeOptions::default(),
        )
        .unwrap();
        while sol.t < t_end {
            sol.step(t_end).unwrap();
        }
        let mut out = [[0.0; 6]; 3];
        for k in 0..3 {
            out[k].copy_from_slice(&sol.y[6 + 6 * k..12 + 6 * k]);
        }
        out
    }

    #[test]
    fn transport_is_linear() {
        // Superposition: transporting a·j₁ + b·j₂ alongside j₁ and j₂ in the
        // same augmented run must reproduce the combination to rounding.
        let pr = params(2.5, 2.0, -0.5);
        let s0 = ExtremalState::new(0.8, 1.1, 0.4, 0.3, 0.7, 0.9);
        let (a, b) = (0.6, -1.7);
        let j1 = [0.2, -0.4, 0.1, 1.0, 0.3, -0.8];
        let j2 = [-0.5, 0.9, 0.0, 0.2, -1.1, 0.4];
        let mut combo = [0.0; 6];
        for i in 0..6 {
            combo[i] = a * j1[i] + b * j2[i];
        }
        let out = transport_three(&s0, [j1, j2, combo], &pr, 1.4);
        let mut mag = 1.0f64;
        for i in 0..6 {
            mag = mag.max((a * out[0][i]).abs() + (b * out[1][i]).abs());
        }
        for i in 0..6 {
            let lin = a * out[0][i] + b * out[1][i];
            assert!(
                (out[2][i] - lin).abs() <= 1e-9 * mag,
                "component {i}: transported {} vs superposed {lin}",
                out[2][i],
            );
        }
    }

    #[test]
    fn meridian_mode_stays_four_dimensional() {
        // On a p_θ = 0 reference extremal a field with δθ = δp_θ = 0 keeps
        // both components zero: the planar 4-vector mode is invariant.
        let pr = params(2.5, 2.0, -0.5);
        let s0 = ExtremalState::new(0.8, 0.9, 0.0, -0.4, 1.1, 0.0);
        let j = JacobiField::planar([0.3, -0.5, 0.8, 0.2]);
        let out = transport_three(&s0, [j.delta, [0.0; 6], [0.0; 6]], &pr, 1.0);
        assert!(out[0][2].abs() < 1e-13, "δθ leaked: {}", out[0][2]);
        assert!(out[0][5].abs() < 1e-13, "δp_θ leaked: {}", out[0][5]);
        assert!(out[0][0].abs() + out[0][1].abs() > 1e-3, "mode collapsed");
    }

    #[test]
    fn transport_matches_flow_differences() {
        // Ratio test: perturbing p_φ(0) by h and comparing the flow
        // difference against h·(transported field) must leave an O(h²)
        // defect — halving h divides it by about four.  The two step sizes
        // sit well above the integration tolerance so the quadratic term is
        // what the test sees, not controller noise.
        let pr = params(2.5, 2.0, -0.5);
        let s0 = ExtremalState::new(0.8, 1.1, 0.4, 0.3, 0.7, 0.9);
        let t_end = 1.0;
        let opts = OdeOptions { rtol: 1e-12, atol: 1e-12, ..OdeOptions::default() };

        let flow = |w0: [f64; 6]| -> [f64; 6] {
            let prc = pr;
            let mut sol = Dopri5::new(
                move |_, y: &[f64; 6]| augmented_rhs(y, &prc),
                0.0,
                w0,
                t_end,
                opts,
            )
            .unwrap();
            while sol.t < t_end {
                sol.step(t_end).unwrap();
            }
            sol.y
        };

        let base = flow(s0.to_array());
        let field =
            transport_three(&s0, [[0.0, 0.0, 0.0, 0.0, 1.0, 0.0], [0.0; 6], [0.0; 6]], &pr, t_end)
                [0];

        let defect = |h: f64| -> f64 {
            let mut wp = s0.to_array();
            wp[4] += h;
            let fp = flow(wp);
            let mut worst = 0.0f64;
            for i in 0..6 {
                worst = worst.max((fp[i] - base[i] - h * field[i]).abs());
            }
            worst
        };

        let h1 = 1e-4;
        let r1 = defect(h1);
        let r2 = defect(h1 / 2.0);
        let exponent = (r1 / r2).log2();
        assert!(
            (1.8..=2.2).contains(&exponent),
            "ratio-test exponent {exponent} (defects {r1:.3e}, {r2:.3e})",
        );
        // The stated small-step defect is already at the noise floor of any
        // adaptive integrator; check it stays tiny rather than its exponent.
        assert!(defect(1e-6) < 1e-9);
    }
}

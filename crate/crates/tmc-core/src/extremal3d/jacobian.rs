//! Analytic linearization of the extremal vector field.
//!
//! The conjugate-point test transports Jacobi fields along an extremal, which
//! requires the Jacobian of the canonical right-hand side.  Finite differences
//! would do, but the rank test hunts for sign changes of a determinant built
//! from these fields, and differencing noise near a zero is exactly what we
//! cannot afford; the matrix is therefore written out by hand and validated
//! against central differences (and against the symplectic structure: the
//! Jacobian of a Hamiltonian field is `S·Hess H`, so `−S·J` must be
//! symmetric).

use crate::params::DissipationParams;
use crate::tol;

use super::{ExtremalError, ExtremalState};

/// Jacobian matrix `J[i][j] = ∂f_i/∂w_j` of [`super::extremal_rhs`] at `s`,
/// ordered as the state: `w = (ρ, φ, θ, p_ρ, p_φ, p_θ)`.
///
/// The `θ` column and the `p_θ` row vanish identically (`θ` is cyclic).
///
/// # Errors
///
/// Same chart and switching-surface guards as the right-hand side itself;
/// the linearization degenerates on Σ together with the flow.
pub fn extremal_rhs_jacobian(
    s: &ExtremalState,
    params: &DissipationParams,
) -> Result<[[f64; 6]; 6], ExtremalError> {
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
    Ok(jacobian_raw(&s.to_array(), params, sin, cos, q))
}

/// The Jacobian entries with trigonometry and `Q` precomputed and no guards,
/// for integrator inner loops that monitor the singular loci themselves.
/// Same convention as [`super::rhs_canonical`].
pub(crate) fn jacobian_raw(
    w: &[f64; 6],
    params: &DissipationParams,
    sin: f64,
    cos: f64,
    q: f64,
) -> [[f64; 6]; 6] {
    let [rho, _, _, p_rho, p_phi, p_theta] = *w;
    let g = params.gamma;
    let gp = params.gamma_plus;
    let gm = params.gamma_minus;

    let cot = cos / sin;
    let csc2 = 1.0 / (sin * sin);
    let sin2 = 2.0 * sin * cos;
    let cos2 = cos * cos - sin * sin;
    let k = gp * cos * cos + g * sin * sin;
    let kp = (g - gp) * sin2; // K′(φ)
    let q2 = q * q;
    let q3 = q2 * q;

    // ∂Q/∂φ enters several rows through the quotient rule.
    let dq_dphi = -p_theta * p_theta * cot * csc2 / q;

    let mut j = [[0.0f64; 6]; 6];

    // f₀ = ρ̇ = γ₋ cos φ − ρ K(φ)
    j[0][0] = -k;
    j[0][1] = -gm * sin - rho * kp;

    // f₁ = φ̇ = −γ₋ sin φ/ρ + (sin 2φ/2)(γ₊ − Γ) + p_φ/Q
    j[1][0] = gm * sin / (rho * rho);
    j[1][1] = -gm * cos / rho + (gp - g) * cos2 - p_phi * dq_dphi / q2;
    j[1][4] = p_theta * p_theta * cot * cot / q3;
    j[1][5] = -p_phi * p_theta * cot * cot / q3;

    // f₂ = θ̇ = p_θ cot²φ / Q
    j[2][1] = p_theta * cot * csc2 * (p_theta * p_theta * cot * cot - 2.0 * q2) / q3;
    j[2][4] = -p_theta * cot * cot * p_phi / q3;
    j[2][5] = cot * cot * p_phi * p_phi / q3;

    // f₃ = ṗ_ρ = K(φ) p_ρ − γ₋ sin φ · p_φ/ρ²
    j[3][0] = 2.0 * gm * sin * p_phi / (rho * rho * rho);
    j[3][1] = kp * p_rho - gm * cos * p_phi / (rho * rho);
    j[3][3] = k;
    j[3][4] = -gm * sin / (rho * rho);

    // f₄ = ṗ_φ = A p_ρ − B p_φ + T with
    //   A = γ₋ sin φ + ρ(Γ − γ₊) sin 2φ,
    //   B = −γ₋ cos φ/ρ + (γ₊ − Γ) cos 2φ,
    //   T = p_θ² cos φ/(Q sin³φ).
    let a = gm * sin + rho * (g - gp) * sin2;
    let b = -gm * cos / rho + (gp - g) * cos2;
    let t = p_theta * p_theta * cos / (q * sin * sin * sin);
    let da_drho = (g - gp) * sin2;
    let da_dphi = gm * cos + 2.0 * rho * (g - gp) * cos2;
    let db_dphi = gm * sin / rho - 2.0 * (gp - g) * sin2;
    let dt_dphi = -p_theta * p_theta * (sin * sin + 3.0 * cos * cos) / (q * sin * sin * sin * sin)
        - t * dq_dphi / q;
    j[4][0] = da_drho * p_rho - (gm * cos / (rho * rho)) * p_phi;
    j[4][1] = da_dphi * p_rho - db_dphi * p_phi + dt_dphi;
    j[4][3] = a;
    j[4][4] = -b - t * p_phi / q2;
    j[4][5] = 2.0 * p_theta * cos / (q * sin * sin * sin) - t * p_theta * cot * cot / q2;

    // f₅ = ṗ_θ = 0: the row stays zero.

    j
}

#[cfg(test)]
mod tests {
    use super::super::{extremal_rhs, ExtremalState};
    use super::*;

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

    /// Central-difference Jacobian of the right-hand side, step `1e−6`.
    fn jacobian_fd(s: &ExtremalState, pr: &DissipationParams) -> [[f64; 6]; 6] {
        let w0 = s.to_array();
        let mut j = [[0.0f64; 6]; 6];
        for col in 0..6 {
            let h = 1e-6 * w0[col].abs().max(1.0);
            let mut wp = w0;
            let mut wm = w0;
            wp[col] += h;
            wm[col] -= h;
            let fp = extremal_rhs(&ExtremalState::from_array(wp), pr).unwrap();
            let fm = extremal_rhs(&ExtremalState::from_array(wm), pr).unwrap();
            for row in 0..6 {
                j[row][col] = (fp[row] - fm[row]) / (2.0 * h);
            }
        }
        j
    }

    #[test]
    fn matches_central_differences() {
        let regimes = [params(2.5, 2.0, -0.5), params(4.5, 2.0, 0.5), params(1.1, 1.6, 0.0)];
        let mut rng = SplitMix(0x5eed_0010);
        for pr in &regimes {
            for _ in 0..40 {
                let s = random_point(&mut rng);
                let ja = extremal_rhs_jacobian(&s, pr).unwrap();
                let jf = jacobian_fd(&s, pr);
                for r in 0..6 {
                    for c in 0..6 {
                        let scale = 1.0f64.max(ja[r][c].abs());
                        assert!(
                            (ja[r][c] - jf[r][c]).abs() <= 1e-5 * scale,
                            "entry ({r},{c}): analytic {} vs central difference {}",
                            ja[r][c],
                            jf[r][c],
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn is_hamiltonian_linearization() {
        // For a Hamiltonian field, J = S · Hess H with S the standard
        // symplectic matrix on (q, p); equivalently −S·J is symmetric.
        // With the (q, p) block ordering, −S·J stacks −J_p-rows over
        // J_q-rows.
        let pr = params(2.5, 2.0, -0.5);
        let mut rng = SplitMix(0x5eed_0011);
        for _ in 0..60 {
            let s = random_point(&mut rng);
            let j = extremal_rhs_jacobian(&s, &pr).unwrap();
            let mut m = [[0.0f64; 6]; 6];
            for col in 0..6 {
                for i in 0..3 {
                    m[i][col] = -j[i + 3][col];
                    m[i + 3][col] = j[i][col];
                }
            }
            for r in 0..6 {
                for c in 0..r {
                    let scale = 1.0f64.max(m[r][c].abs()).max(m[c][r].abs());
                    assert!(
                        (m[r][c] - m[c][r]).abs() <= 1e-9 * scale,
                        "Hessian asymmetry at ({r},{c}): {} vs {}",
                        m[r][c],
                        m[c][r],
                    );
                }
            }
        }
    }

    #[test]
    fn cyclic_structure() {
        let pr = params(2.5, 2.0, -0.5);
        let mut rng = SplitMix(0x5eed_0012);
        for _ in 0..20 {
            let s = random_point(&mut rng);
            let j = extremal_rhs_jacobian(&s, &pr).unwrap();
            for i in 0..6 {
                assert_eq!(j[i][2], 0.0, "θ column must vanish");
                assert_eq!(j[5][i], 0.0, "p_θ row must vanish");
            }
        }
    }

    #[test]
    fn guards_match_rhs() {
        let pr = params(2.5, 2.0, -0.5);
        let on_sigma =
            ExtremalState::new(0.5, std::f64::consts::FRAC_PI_2, 0.0, 0.3, 0.0, 1.4);
        assert!(matches!(
            extremal_rhs_jacobian(&on_sigma, &pr),
            Err(ExtremalError::OnSwitchingSurface { .. })
        ));
        let pole = ExtremalState::new(0.5, 1e-12, 0.0, 0.3, 1.0, 1.4);
        assert!(matches!(
            extremal_rhs_jacobian(&pole, &pr),
            Err(ExtremalError::PoleSingularity)
        ));
    }
}

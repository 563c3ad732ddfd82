//! Dissipation parameters and the Lindblad admissibility cone.

use serde::{Deserialize, Serialize};
use std::fmt;

/// The dissipation triple `(Γ, γ₊, γ₋)` of the rescaled Lindblad dynamics.
///
/// `Γ` damps the transverse coordinates, `γ₊ = γ₁₂ + γ₂₁` the population
/// difference, and `γ₋ = γ₁₂ − γ₂₁` sets the equilibrium polarization.
/// Complete positivity of the underlying master equation restricts the triple
/// to the cone `2Γ ≥ γ₊ ≥ |γ₋|` with `Γ > 0`, `γ₊ > 0`; construction rejects
/// anything outside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationParams {
    /// Transverse (dephasing) rate `Γ`.
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    /// Population-sum rate `γ₊`.
    pub gamma_plus: f64,
    /// Population-difference rate `γ₋`.
    pub gamma_minus: f64,
}

/// Violation of the admissibility cone, naming the failed inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamsError {
    /// `Γ > 0` fails.
    GammaNotPositive,
    /// `γ₊ > 0` fails.
    GammaPlusNotPositive,
    /// `2Γ ≥ γ₊` fails.
    ConeUpper,
    /// `γ₊ ≥ |γ₋|` fails.
    ConeLower,
    /// A component is NaN or infinite.
    NotFinite,
}

impl fmt::Display for ParamsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamsError::GammaNotPositive => write!(f, "Gamma > 0 violated"),
            ParamsError::GammaPlusNotPositive => write!(f, "gamma_plus > 0 violated"),
            ParamsError::ConeUpper => write!(f, "2*Gamma >= gamma_plus violated"),
            ParamsError::ConeLower => write!(f, "gamma_plus >= |gamma_minus| violated"),
            ParamsError::NotFinite => write!(f, "parameters must be finite"),
        }
    }
}

impl std::error::Error for ParamsError {}

impl DissipationParams {
    /// Validates the Lindblad cone and returns the triple.
    pub fn new(gamma: f64, gamma_plus: f64, gamma_minus: f64) -> Result<Self, ParamsError> {
        if !(gamma.is_finite() && gamma_plus.is_finite() && gamma_minus.is_finite()) {
            return Err(ParamsError::NotFinite);
        }
        if !(gamma > 0.0) {
            return Err(ParamsError::GammaNotPositive);
        }
        if !(gamma_plus > 0.0) {
            return Err(ParamsError::GammaPlusNotPositive);
        }
        if 2.0 * gamma < gamma_plus {
            return Err(ParamsError::ConeUpper);
        }
        if gamma_plus < gamma_minus.abs() {
            return Err(ParamsError::ConeLower);
        }
        Ok(DissipationParams { gamma, gamma_plus, gamma_minus })
    }

    /// Re-checks the cone (useful after deserialization).
    pub fn validate(&self) -> Result<(), ParamsError> {
        Self::new(self.gamma, self.gamma_plus, self.gamma_minus).map(|_| ())
    }

    /// Trace part of the planar drift: `λ = −(Γ + γ₊)/2`.
    pub fn lambda(&self) -> f64 {
        -(self.gamma + self.gamma_plus) / 2.0
    }

    /// Traceless part of the planar drift: `s = (γ₊ − Γ)/2`.
    pub fn s(&self) -> f64 {
        (self.gamma_plus - self.gamma) / 2.0
    }

    /// Equilibrium of the free motion on the polarization axis, `z = γ₋/γ₊`.
    pub fn equilibrium_z(&self) -> f64 {
        self.gamma_minus / self.gamma_plus
    }

    /// Height of the horizontal singular line `z = γ₋ / (2(γ₊ − Γ))`, when the
    /// line exists (`γ₊ ≠ Γ`).
    pub fn horizontal_singular_z(&self) -> Option<f64> {
        let d = self.gamma_plus - self.gamma;
        if d == 0.0 {
            None
        } else {
            Some(self.gamma_minus / (2.0 * d))
        }
    }

    /// Spectral regime of the constant-control planar dynamics: the eigenvalue
    /// offset `s² − 1` of `(A ± B)` about its trace.  Positive (`|γ₊ − Γ| > 2`)
    /// means real spectrum, negative means a rotation.
    pub fn spectral_discriminant(&self) -> f64 {
        let s = self.s();
        s * s - 1.0
    }

    /// Angular frequency `θ_osc = 2√(1 − s²)` of the rotating regime, when
    /// `|γ₊ − Γ| < 2`.
    pub fn theta_osc(&self) -> Option<f64> {
        let d = 1.0 - self.s() * self.s();
        if d > 0.0 {
            Some(2.0 * d.sqrt())
        } else {
            None
        }
    }
}

impl fmt::Display for DissipationParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(Gamma={}, gamma_plus={}, gamma_minus={})",
            self.gamma, self.gamma_plus, self.gamma_minus
        )
    }
}

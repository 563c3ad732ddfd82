//! State charts on the Bloch ball and the control types.

use crate::tol::{EPS_BALL, EPS_RHO};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Cartesian Bloch coordinates `(x, y, z)`, `x² + y² + z² ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Spherical chart `(ρ, φ, θ)`: radius (purity), colatitude from the north
/// pole, azimuth.  The chart is singular at the origin and on the polar axis;
/// callers integrate `θ` unwrapped and normalize only at output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalState {
    pub rho: f64,
    pub phi: f64,
    pub theta: f64,
}

/// Which frame a control pair refers to: the Cartesian components `(u₁, u₂)`
/// or the rotated feedback pair `(v₁, v₂)` of the spherical chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlFrame {
    Cartesian,
    Feedback,
}

/// A bounded control pair with its frame tag; `|u| ≤ 1`, and single-input
/// operation forces the second component to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlVector {
    pub c1: f64,
    pub c2: f64,
    pub frame: ControlFrame,
}

impl ControlVector {
    pub fn cartesian(u1: f64, u2: f64) -> Self {
        ControlVector { c1: u1, c2: u2, frame: ControlFrame::Cartesian }
    }

    pub fn feedback(v1: f64, v2: f64) -> Self {
        ControlVector { c1: v1, c2: v2, frame: ControlFrame::Feedback }
    }

    pub fn norm(&self) -> f64 {
        self.c1.hypot(self.c2)
    }

    /// Rotates Cartesian components into the feedback frame at azimuth `θ`:
    /// `v₁ = u₁ cos θ + u₂ sin θ`, `v₂ = −u₁ sin θ + u₂ cos θ`.
    pub fn to_feedback(&self, theta: f64) -> Self {
        match self.frame {
            ControlFrame::Feedback => *self,
            ControlFrame::Cartesian => {
                let (s, c) = theta.sin_cos();
                ControlVector::feedback(self.c1 * c + self.c2 * s, -self.c1 * s + self.c2 * c)
            }
        }
    }

    /// Inverse of [`to_feedback`](Self::to_feedback).
    pub fn to_cartesian(&self, theta: f64) -> Self {
        match self.frame {
            ControlFrame::Cartesian => *self,
            ControlFrame::Feedback => {
                let (s, c) = theta.sin_cos();
                ControlVector::cartesian(self.c1 * c - self.c2 * s, self.c1 * s + self.c2 * c)
            }
        }
    }
}

/// Chart failure: a state too close to a singular locus of the chart in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartError {
    /// Radius below `EPS_RHO`: spherical chart undefined.
    OriginSingularity,
    /// `|sin φ|` below `EPS_POLE`: azimuth undefined.
    PoleSingularity,
}

impl fmt::Display for ChartError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChartError::OriginSingularity => write!(f, "state too close to the origin for the spherical chart"),
            ChartError::PoleSingularity => write!(f, "state too close to a pole of the spherical chart"),
        }
    }
}

impl std::error::Error for ChartError {}

impl BlochState {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        BlochState { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// True when the state lies in the closed ball up to the `EPS_BALL` slack.
    pub fn in_ball(&self) -> bool {
        self.norm() <= 1.0 + EPS_BALL
    }
}

impl SphericalState {
    pub fn new(rho: f64, phi: f64, theta: f64) -> Self {
        SphericalState { rho, phi, theta }
    }

    /// Azimuth folded into `[0, 2π)` for output; internal values stay unwrapped.
    pub fn theta_normalized(&self) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        let t = self.theta % two_pi;
        if t < 0.0 {
            t + two_pi
        } else {
            t
        }
    }
}

/// Spherical chart map `x = ρ sin φ cos θ`, `y = ρ sin φ sin θ`, `z = ρ cos φ`.
pub fn to_cartesian(s: &SphericalState) -> BlochState {
    let (sp, cp) = s.phi.sin_cos();
    let (st, ct) = s.theta.sin_cos();
    BlochState::new(s.rho * sp * ct, s.rho * sp * st, s.rho * cp)
}

/// Inverse chart map; fails inside the `EPS_RHO` ball where the chart is
/// singular.  At the poles the azimuth is conventionally `0`.
pub fn to_spherical(q: &BlochState) -> Result<SphericalState, ChartError> {
    let rho = q.norm();
    if rho <= EPS_RHO {
        return Err(ChartError::OriginSingularity);
    }
    let phi = (q.z / rho).clamp(-1.0, 1.0).acos();
    let mut theta = q.y.atan2(q.x);
    if theta < 0.0 {
        theta += 2.0 * std::f64::consts::PI;
    }
    Ok(SphericalState::new(rho, phi, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn axis_points() {
        let s = to_spherical(&BlochState::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(s.rho, 1.0);
        assert_eq!(s.phi, 0.0); // pole: φ = 0, θ conventional
        let s = to_spherical(&BlochState::new(1.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(s.rho, 1.0, max_relative = 1e-15);
        assert_relative_eq!(s.phi, std::f64::consts::FRAC_PI_2, max_relative = 1e-15);
        assert_eq!(s.theta, 0.0);
    }

    #[test]
    fn origin_rejected() {
        assert_eq!(
            to_spherical(&BlochState::new(0.0, 0.0, 0.0)).unwrap_err(),
            ChartError::OriginSingularity
        );
    }

    #[test]
    fn round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let q = BlochState::new(
                rng.gen_range(-0.7..0.7),
                rng.gen_range(-0.7..0.7),
                rng.gen_range(-0.7..0.7),
            );
            if q.norm() < 1e-3 {
                continue;
            }
            let s = to_spherical(&q).unwrap();
            let back = to_cartesian(&s);
            assert_relative_eq!(q.x, back.x, epsilon = 1e-12);
            assert_relative_eq!(q.y, back.y, epsilon = 1e-12);
            assert_relative_eq!(q.z, back.z, epsilon = 1e-12);
        }
    }

    #[test]
    fn control_frame_round_trip() {
        let u = ControlVector::cartesian(0.3, -0.8);
        let theta = 1.2345;
        let v = u.to_feedback(theta);
        let back = v.to_cartesian(theta);
        assert_relative_eq!(u.c1, back.c1, epsilon = 1e-15);
        assert_relative_eq!(u.c2, back.c2, epsilon = 1e-15);
        assert_relative_eq!(u.norm(), v.norm(), epsilon = 1e-15);
    }

    #[test]
    fn theta_normalization() {
        let s = SphericalState::new(1.0, 1.0, -0.5);
        assert_relative_eq!(s.theta_normalized(), 2.0 * std::f64::consts::PI - 0.5);
        let s = SphericalState::new(1.0, 1.0, 7.0);
        assert_relative_eq!(s.theta_normalized(), 7.0 - 2.0 * std::f64::consts::PI);
    }
}

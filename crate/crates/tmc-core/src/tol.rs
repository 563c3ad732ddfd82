//! Numeric guard tolerances and truncation thresholds.
//!
//! The analysis treats singular sets, poles and asymptotic limits exactly; the
//! numerics need explicit guards.  All thresholds are collected here so that
//! every module draws from one place.

/// Chart guard: `|sin φ|` below this is treated as a pole of the spherical chart.
pub const EPS_POLE: f64 = 1e-8;

/// Chart guard: radii below this are treated as the chart-singular origin.
pub const EPS_RHO: f64 = 1e-8;

/// Slack allowed on the Bloch-ball inequality `|q| ≤ 1` for integrated states.
pub const EPS_BALL: f64 = 1e-9;

/// Membership tolerance for on-set tests (singular set, collinear set).
pub const EPS_CLASS: f64 = 1e-9;

/// Proximity tolerance for the switching surface Σ (`|p_φ|` and `|φ − π/2|`).
pub const EPS_SIGMA: f64 = 1e-9;

/// Default integrator relative tolerance.
pub const RTOL: f64 = 1e-10;

/// Default integrator absolute tolerance.
pub const ATOL: f64 = 1e-10;

/// Time tolerance for event localization (switchings, crossings).
pub const EVENT_TIME_TOL: f64 = 1e-10;

/// Relative threshold separating a tangential contact (`Φ = Φ̇ = 0`) from an
/// ordinary local extremum of the switching function: at a bisected zero of
/// `Φ̇`, values of `|Φ|` below this fraction of its natural scale `|p||q|`
/// count as contacts.
pub const EPS_TOUCH: f64 = 1e-7;

/// Bisection tolerance on the first conjugate time.
pub const CONJUGATE_TIME_TOL: f64 = 1e-8;

/// Detection radius for switching-surface candidates, relative to `|p_θ|`:
/// the bi-input flow treats `Q` falling through this level as an imminent
/// Σ contact and hands over to the polar blow-up.
pub const SIGMA_DETECT_REL: f64 = 1e-7;

/// Hard floor on `Q/|p_θ|`: a trajectory that shrinks past the detection
/// level without matching a blow-up crossing direction and still reaches this
/// floor is aborted as an unresolved Σ singularity.
pub const SIGMA_FLOOR_REL: f64 = 1e-12;

/// Re-arm factor for Σ detection: after a non-crossing close encounter the
/// detector stays quiet until `Q` recovers above `factor ×` detection level.
pub const SIGMA_REARM_FACTOR: f64 = 10.0;

/// Angular tolerance for matching the incoming switching-function direction
/// against a blow-up root of `α̇ = 0`.
pub const ALPHA_MATCH_TOL: f64 = 0.2;

/// `sin φ` level at which integration stops with a pole-approach event (the
/// spherical chart degenerates; the asymptotic limits `φ → 0, π` are reported
/// from the stop state).
pub const POLE_STOP_SIN: f64 = 1e-4;

/// Radius at which integration stops with an origin-approach event.
pub const RHO_STOP: f64 = 1e-6;

/// Stop level for the log-radius chart (`ln ρ`), equivalent to `ρ ≈ 1e−250`.
pub const LOG_RHO_STOP: f64 = -575.0;

/// Floor on the reciprocal costate `σ = 1/p_φ` of the rescaled tail chart;
/// below it the costate magnitude is treated as numerically unbounded.
pub const COSTATE_SIGMA_FLOOR: f64 = 1e-250;

/// Horizon used when probing asymptotic behavior (the limits are `t → ∞`).
pub const T_ASYM: f64 = 100.0;

/// Costate magnitude counted as "escaping to infinity" for case-(a) detection.
pub const P_BIG: f64 = 1e3;

/// Residual below which a trajectory tail is accepted as converged to its
/// asymptotic point.
pub const TOL_ASYM: f64 = 1e-3;

/// Maximum number of switching events before a bang-bang integration aborts
/// as near-degenerate.
pub const N_MAX_SWITCH: usize = 10_000;

/// Σ-crossings per unit time above which integration aborts: accumulation of
/// crossings would indicate a Fuller-type phenomenon the model excludes, so
/// the guard turns a violated assumption into a visible failure.
pub const SIGMA_EVENTS_PER_UNIT_TIME: usize = 1_000;

/// Shooting convergence threshold on the endpoint mismatch.
pub const SHOOT_TOL: f64 = 1e-9;

/// Maximum Newton steps per shooting start.
pub const SHOOT_MAX_NEWTON: usize = 50;

/// Number of multi-start costate samples on the Fibonacci sphere.
pub const SHOOT_N_STARTS: usize = 64;

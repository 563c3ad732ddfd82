//! The planar θ-function: the angle swept by the backward-transported
//! control direction along a constant-control bang arc.
//!
//! Along an arc `q̇ = F(q) + u G(q)` with a fixed `u = ±1`, the variational
//! equation has the *constant* coefficient matrix `M = DF + u·DG` (the drift
//! of the planar model is affine and `DG` is the rotation generator), so
//! transport is a bare 2×2 matrix exponential.  The θ-function at time `t`
//! takes the control direction at the far end, `v(t) = G(q(t))`, pulls it
//! back to `v(0) = e^{−tM} G(q(t))`, and measures the angle from `G(q(0))`
//! counterclockwise.  Switching happens exactly when the pulled-back
//! direction realigns with the initial one: zeros of θ mod π are the
//! switching times, which makes this a one-column conjugate/switching test
//! and an independent oracle for the analytic switching determinant.
//!
//! The angle is accumulated, not wrapped: the swept angle between dense
//! pull-back samples is summed, with adaptive midpoint refinement when a
//! single increment exceeds π/2, so the result is continuous in `t` and
//! multiples of π are meaningful.

use crate::params::DissipationParams;
use crate::planar::{ArcControl, PlanarState, PlanarTrajectory};

use super::ConjugateError;

/// `e^{tM}` for a 2×2 matrix, split as `M = aI + N` with `N` traceless:
/// `N² = (a² − det M)·I =: μ²·I`, so the exponential is
/// `e^{ta}(c(μt)·I + s(μt)·N)` with (cosh, sinh/μ), (cos, sin/ω) or the
/// Taylor limit depending on the sign of μ².
fn expm2(m: [[f64; 2]; 2], t: f64) -> [[f64; 2]; 2] {
    let a = 0.5 * (m[0][0] + m[1][1]);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let mu2 = a * a - det;
    let x = mu2 * t * t;
    let (c, s) = if x > 1e-12 {
        let mu = mu2.sqrt();
        (f64::cosh(mu * t), f64::sinh(mu * t) / mu)
    } else if x < -1e-12 {
        let om = (-mu2).sqrt();
        (f64::cos(om * t), f64::sin(om * t) / om)
    } else {
        (1.0 + 0.5 * x, t * (1.0 + x / 6.0))
    };
    let ea = (a * t).exp();
    let n = [[m[0][0] - a, m[0][1]], [m[1][0], m[1][1] - a]];
    [
        [ea * (c + s * n[0][0]), ea * s * n[0][1]],
        [ea * s * n[1][0], ea * (c + s * n[1][1])],
    ]
}

fn apply(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Signed angle from `a` to `b`, counterclockwise in the `(y, z)` plane.
fn angle_between(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1])
}

/// The control vector field at a planar point, `G(q) = (−z, y)`.
fn control_direction(q: PlanarState) -> [f64; 2] {
    [-q.z, q.y]
}

/// The single constant bang value covering `[0, t]` of the arc, if any.
fn constant_bang_on(arc: &PlanarTrajectory, t: f64) -> Option<f64> {
    let mut u = None;
    for seg in &arc.segments {
        if seg.t_start >= t - 1e-12 && u.is_some() {
            break;
        }
        match seg.control {
            ArcControl::Bang(b) => match u {
                None => u = Some(b),
                Some(prev) if prev == b => {}
                Some(_) => return None,
            },
            ArcControl::Singular => return None,
        }
        if seg.t_end >= t - 1e-12 {
            return u;
        }
    }
    u
}

/// Pulled-back control direction `v_t(0) = e^{−tM} G(q(t))`.
fn pulled_back(arc: &PlanarTrajectory, m: [[f64; 2]; 2], t: f64) -> Option<[f64; 2]> {
    let (q, _, _) = arc.state_at(t)?;
    Some(apply(&expm2(m, -t), control_direction(q)))
}

/// Swept angle between two pull-back samples, refined by midpoint splitting
/// whenever a single increment exceeds π/2 (so no full turn can hide inside
/// one interval).
fn swept(
    arc: &PlanarTrajectory,
    m: [[f64; 2]; 2],
    a: (f64, [f64; 2]),
    b: (f64, [f64; 2]),
    depth: u32,
) -> f64 {
    let d = angle_between(a.1, b.1);
    if d.abs() <= std::f64::consts::FRAC_PI_2 || depth == 0 {
        return d;
    }
    let tm = 0.5 * (a.0 + b.0);
    match pulled_back(arc, m, tm) {
        Some(vm) => {
            swept(arc, m, a, (tm, vm), depth - 1) + swept(arc, m, (tm, vm), b, depth - 1)
        }
        None => d,
    }
}

/// The θ-function of a constant-control planar bang arc at time `t`: the
/// counterclockwise angle from `G(q(0))` to the backward-transported control
/// direction `v(0) = e^{−tM} G(q(t))`, accumulated continuously from
/// `θ(0) = 0`.
///
/// Zeros mod π are the switching times of the arc; the first one bounds
/// local optimality of the bang arc exactly as the analytic switching
/// determinant does.
///
/// # Errors
///
/// [`ConjugateError::NotPlanarArc`] when `t` falls outside the arc, the
/// window `[0, t]` is not covered by bang segments of a single constant
/// value, or the arc carries no dense data at a sample point.
pub fn theta_function(arc: &PlanarTrajectory, t: f64) -> Result<f64, ConjugateError> {
    if !t.is_finite() || t < 0.0 || t > arc.t_end + 1e-12 {
        return Err(ConjugateError::NotPlanarArc);
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let u = constant_bang_on(arc, t).ok_or(ConjugateError::NotPlanarArc)?;
    let m = transport_matrix(&arc.params, u);

    // Dense pull-back samples; the per-interval rotation is bounded by the
    // sampling rate times the transport stiffness, and the midpoint
    // refinement in `swept` covers whatever the bound misses.
    let rate = {
        let mut f2 = 0.0;
        for row in &m {
            for e in row {
                f2 += e * e;
            }
        }
        f2.sqrt().max(1.0)
    };
    let n = ((8.0 * t * rate).ceil() as usize).clamp(32, 20_000);

    let mut total = 0.0;
    let mut prev = (0.0, pulled_back(arc, m, 0.0).ok_or(ConjugateError::NotPlanarArc)?);
    for i in 1..=n {
        let ti = t * i as f64 / n as f64;
        let vi = pulled_back(arc, m, ti).ok_or(ConjugateError::NotPlanarArc)?;
        total += swept(arc, m, prev, (ti, vi), 24);
        prev = (ti, vi);
    }
    Ok(total)
}

/// The constant variational matrix of a bang arc, `M = DF + u·DG`.
fn transport_matrix(params: &DissipationParams, u: f64) -> [[f64; 2]; 2] {
    [[-params.gamma, -u], [u, -params.gamma_plus]]
}

/// Exact time derivative of the θ-function: with `v(t) = e^{−tM} G(q(t))`,
/// `v̇ = e^{−tM}(J·q̇ − M·G(q))` (`J = DG` is the rotation generator), and the
/// angle rate is `(v × v̇)/|v|²`.  Used to pin tangential zeros of θ mod π,
/// which bare angle samples can only localize to the square root of the
/// working precision.
pub(crate) fn theta_rate(arc: &PlanarTrajectory, t: f64) -> Result<f64, ConjugateError> {
    let u = constant_bang_on(arc, t.max(1e-300)).ok_or(ConjugateError::NotPlanarArc)?;
    let m = transport_matrix(&arc.params, u);
    let (q, _, _) = arc.state_at(t).ok_or(ConjugateError::NotPlanarArc)?;
    let g = control_direction(q);
    let pr = &arc.params;
    let qdot = [
        -pr.gamma * q.y + u * (-q.z),
        pr.gamma_minus - pr.gamma_plus * q.z + u * q.y,
    ];
    let jqdot = [-qdot[1], qdot[0]];
    let pre = [jqdot[0] - (m[0][0] * g[0] + m[0][1] * g[1]), jqdot[1] - (m[1][0] * g[0] + m[1][1] * g[1])];
    let e = expm2(m, -t);
    let v = apply(&e, g);
    let vd = apply(&e, pre);
    let n2 = v[0] * v[0] + v[1] * v[1];
    if n2 == 0.0 {
        return Err(ConjugateError::NotPlanarArc);
    }
    Ok((v[0] * vd[1] - v[1] * vd[0]) / n2)
}

//! The switching function `Φ = p·G(q)` and its analytic determinant.
//!
//! Along any planar extremal the control is `u = sign Φ` away from zeros of
//! `Φ`, so everything about bang-bang structure reduces to locating those
//! zeros.  Two routes are implemented:
//!
//! * numerically, on stored trajectories ([`switching_function`]), by sign
//!   change and bisection on dense output — works for every parameter set;
//! * analytically, for `γ₋ = 0`, where the constant-control flow is linear
//!   and `Φ(t) ∝ det(B q₀, e^{−t·ad(A+εB)} B q₀)` has a closed form on the
//!   semi-direct lift ([`switching_determinant`]).  Writing `s = (γ₊−Γ)/2`,
//!   the spectrum of `ad(A+εB)` is real for `s² > 1` (at most one positive
//!   switching time from a switch at `q₀`) and imaginary for `s² < 1`
//!   (switchings recur with period `2π / (2√(1−s²))`).

use crate::ode::DenseStep;
use crate::params::DissipationParams;
use crate::planar::extremal::PlanarTrajectory;
use crate::planar::lie::Brackets;
use crate::planar::{PlanarCostate, PlanarError, PlanarState};
use crate::tol;
use serde::{Deserialize, Serialize};

/// `Φ(q, p) = p·G(q) = −p_y z + p_z y`.
pub(crate) fn phi(q: PlanarState, p: PlanarCostate) -> f64 {
    -p.p_y * q.z + p.p_z * q.y
}

/// `Φ̇ = p·[G,F](q)` — independent of the control, which makes it a clean
/// event function for tangential contacts.
pub(crate) fn phi_dot(q: PlanarState, p: PlanarCostate, br: &Brackets) -> f64 {
    let v = br.gf.eval(q);
    p.p_y * v[0] + p.p_z * v[1]
}

/// `Φ̈(u) = p·([[G,F],F](q) + u·[[G,F],G](q))`.
pub(crate) fn phi_ddot(q: PlanarState, p: PlanarCostate, u: f64, br: &Brackets) -> f64 {
    let a = br.gff.eval(q);
    let b = br.gfg.eval(q);
    p.p_y * (a[0] + u * b[0]) + p.p_z * (a[1] + u * b[1])
}

/// Nature of a zero of the switching function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhiZeroKind {
    /// `Φ` changes sign: an ordinary switching point.
    Transversal,
    /// `Φ = Φ̇ = 0`: a contact of order two (singular-arc candidate).
    Tangential,
}

/// A located zero of `Φ` (or of the analytic determinant).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiZero {
    pub t: f64,
    pub kind: PhiZeroKind,
}

/// `Φ` sampled along a trajectory together with its located zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSwitchingFunction {
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
    pub zeros: Vec<PhiZero>,
}

fn state_of(w: [f64; 4]) -> (PlanarState, PlanarCostate) {
    (
        PlanarState::new(w[0], w[1]),
        PlanarCostate::new(w[2], w[3]),
    )
}

/// Scalar bisection of a bracketed sign change, to absolute tolerance `tol`
/// in the argument.
fn bisect(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fa > 0.0) == (fm > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Locate zeros of `Φ` on one dense step, appending to `zeros`.
///
/// The step is scanned on `NSUB` subintervals: a sign change of `Φ` is
/// refined to a transversal zero; a sign change of `Φ̇` whose refined point
/// has `|Φ|` below the contact threshold is a tangential zero.
pub(crate) fn scan_step_for_zeros(
    seg: &DenseStep<4>,
    br: &Brackets,
    zeros: &mut Vec<PhiZero>,
) {
    const NSUB: usize = 8;
    let t0 = seg.t0;
    let t1 = seg.t1();
    let dt = (t1 - t0) / NSUB as f64;
    if dt == 0.0 {
        return;
    }
    let phi_at = |t: f64| {
        let (q, p) = state_of(seg.eval(t));
        phi(q, p)
    };
    let dphi_at = |t: f64| {
        let (q, p) = state_of(seg.eval(t));
        phi_dot(q, p, br)
    };
    let mut ta = t0;
    let mut pa = phi_at(ta);
    let mut da = dphi_at(ta);
    for i in 1..=NSUB {
        let tb = if i == NSUB { t1 } else { t0 + i as f64 * dt };
        let pb = phi_at(tb);
        let db = dphi_at(tb);
        if pa == 0.0 || (pa > 0.0) != (pb > 0.0) {
            let t = if pa == 0.0 {
                ta
            } else {
                bisect(phi_at, ta, tb, tol::EVENT_TIME_TOL)
            };
            zeros.push(PhiZero {
                t,
                kind: PhiZeroKind::Transversal,
            });
        } else if (da > 0.0) != (db > 0.0) {
            let t = bisect(dphi_at, ta, tb, tol::EVENT_TIME_TOL);
            let (q, p) = state_of(seg.eval(t));
            let scale = p.norm() * q.norm();
            if phi(q, p).abs() <= tol::EPS_TOUCH * scale.max(f64::MIN_POSITIVE) {
                zeros.push(PhiZero {
                    t,
                    kind: PhiZeroKind::Tangential,
                });
            }
        }
        ta = tb;
        pa = pb;
        da = db;
    }
}

fn dedup_zeros(zeros: &mut Vec<PhiZero>, time_scale: f64) {
    zeros.sort_by(|a, b| a.t.total_cmp(&b.t));
    zeros.dedup_by(|b, a| (b.t - a.t).abs() <= 1e-9 * time_scale.max(1.0));
}

/// Sample `Φ(t) = p(t)·G(q(t))` along a stored planar trajectory and locate
/// its zeros (transversal by sign change, tangential by contact detection),
/// refined by bisection to time tolerance [`tol::EVENT_TIME_TOL`].
pub fn switching_function(
    traj: &PlanarTrajectory,
) -> Result<SampledSwitchingFunction, PlanarError> {
    let Some((q0, p0)) = traj.initial_point() else {
        return Ok(SampledSwitchingFunction {
            ts: Vec::new(),
            values: Vec::new(),
            zeros: Vec::new(),
        });
    };
    if p0.norm() == 0.0 {
        return Err(PlanarError::MissingCostate);
    }
    let br = Brackets::new(&traj.params);
    let mut ts = Vec::new();
    let mut values = Vec::new();
    let mut zeros = Vec::new();
    let mut push_sample = |t: f64, w: [f64; 4]| {
        let (q, p) = state_of(w);
        ts.push(t);
        values.push(phi(q, p));
    };
    push_sample(0.0, [q0.y, q0.z, p0.p_y, p0.p_z]);
    for segment in &traj.segments {
        for step in &segment.dense {
            let tm = 0.5 * (step.t0 + step.t1());
            push_sample(tm, step.eval(tm));
            push_sample(step.t1(), step.eval(step.t1()));
            scan_step_for_zeros(step, &br, &mut zeros);
        }
    }
    // A zero sitting exactly at t = 0 (switch-anchored start) leaves no sign
    // change to detect; test the endpoint directly.
    let scale0 = p0.norm() * q0.norm();
    if phi(q0, p0).abs() <= tol::EPS_TOUCH * scale0.max(f64::MIN_POSITIVE) {
        let kind = if phi_dot(q0, p0, &br).abs()
            <= tol::EPS_TOUCH * scale0.max(f64::MIN_POSITIVE)
        {
            PhiZeroKind::Tangential
        } else {
            PhiZeroKind::Transversal
        };
        zeros.push(PhiZero { t: 0.0, kind });
    }
    dedup_zeros(&mut zeros, traj.t_end);
    Ok(SampledSwitchingFunction { ts, values, zeros })
}

fn check_analytic_case(params: &DissipationParams, eps: f64) -> Result<(f64, f64), PlanarError> {
    debug_assert!(eps == 1.0 || eps == -1.0, "bang control must be ±1");
    if params.gamma_minus != 0.0 {
        return Err(PlanarError::NonAnalyticCase);
    }
    let s = params.s();
    let kappa = eps * eps - s * s;
    if kappa.abs() < 1e-12 {
        return Err(PlanarError::DegenerateSpectrum);
    }
    Ok((s, kappa))
}

/// Analytic switching determinant `Δ(t) = det(B q₀, e^{−t·ad(A+εB)} B q₀)`
/// for `γ₋ = 0`, evaluated from the eigen-structure of `ad(A+εB)` on the
/// span of the basis matrices `B, C, D`.
///
/// Zeros of `Δ` in `t` are the times at which an extremal switching at `q₀`
/// at `t = 0` switches again.  Requires `γ₋ = 0`
/// ([`PlanarError::NonAnalyticCase`] otherwise) and a non-degenerate spectrum
/// `|γ₊ − Γ| ≠ 2` ([`PlanarError::DegenerateSpectrum`]).
pub fn switching_determinant(
    t: f64,
    q0: PlanarState,
    params: &DissipationParams,
    eps: f64,
) -> Result<f64, PlanarError> {
    let (s, kappa) = check_analytic_case(params, eps)?;
    let a = q0.z * q0.z - q0.y * q0.y;
    let b = 2.0 * q0.y * q0.z;
    let alpha = eps / kappa;
    if kappa < 0.0 {
        // Real spectrum ±λ₁ of ad(A+εB): hyperbolic functions of λ₁ t.
        let l1 = 2.0 * (-kappa).sqrt();
        let beta = -s / (4.0 * kappa);
        let (em, ep) = ((-l1 * t).exp(), (l1 * t).exp());
        Ok(a * (alpha * s + 2.0 * eps * beta * (em + ep)) + b * l1 * beta * (em - ep))
    } else {
        // Imaginary spectrum ±iθ: trigonometric functions of θ t.
        let th = 2.0 * kappa.sqrt();
        let beta = -s / (2.0 * kappa);
        Ok(a * (alpha * s + 2.0 * eps * beta * (th * t).cos()) + b * beta * th * (th * t).sin())
    }
}

/// Time derivative of [`switching_determinant`] (same preconditions).
fn switching_determinant_dt(
    t: f64,
    q0: PlanarState,
    params: &DissipationParams,
    eps: f64,
) -> Result<f64, PlanarError> {
    let (s, kappa) = check_analytic_case(params, eps)?;
    let a = q0.z * q0.z - q0.y * q0.y;
    let b = 2.0 * q0.y * q0.z;
    if kappa < 0.0 {
        let l1 = 2.0 * (-kappa).sqrt();
        let beta = -s / (4.0 * kappa);
        let (em, ep) = ((-l1 * t).exp(), (l1 * t).exp());
        Ok(a * 2.0 * eps * beta * l1 * (ep - em) - b * l1 * l1 * beta * (em + ep))
    } else {
        let th = 2.0 * kappa.sqrt();
        let beta = -s / (2.0 * kappa);
        Ok(-a * 2.0 * eps * beta * th * (th * t).sin() + b * beta * th * th * (th * t).cos())
    }
}

/// All zeros of the analytic determinant on `(0, t_max]`, with double roots
/// (tangential contacts) detected through the derivative.  The trivial root
/// at `t = 0` is excluded.
pub fn switching_determinant_roots(
    q0: PlanarState,
    params: &DissipationParams,
    eps: f64,
    t_max: f64,
) -> Result<Vec<PhiZero>, PlanarError> {
    let (s, kappa) = check_analytic_case(params, eps)?;
    let _ = s;
    let mut dt = t_max / 2000.0;
    if kappa > 0.0 {
        // Resolve the oscillation: many samples per period.
        let period = std::f64::consts::PI / kappa.sqrt();
        dt = dt.min(period / 64.0);
    }
    let n = (t_max / dt).ceil() as usize;
    let value = |t: f64| switching_determinant(t, q0, params, eps).unwrap();
    let deriv = |t: f64| switching_determinant_dt(t, q0, params, eps).unwrap();

    let mut max_abs: f64 = 0.0;
    for i in 0..=n {
        max_abs = max_abs.max(value(i as f64 * dt).abs());
    }
    let touch_tol = tol::EPS_TOUCH * max_abs.max(f64::MIN_POSITIVE);
    let t_skip = 1e-6 * t_max;

    let mut zeros = Vec::new();
    let mut ta = 0.0;
    let mut va = value(ta);
    let mut da = deriv(ta);
    for i in 1..=n {
        let tb = (i as f64 * dt).min(t_max);
        let vb = value(tb);
        let db = deriv(tb);
        if (va > 0.0) != (vb > 0.0) || (va == 0.0 && ta > 0.0) {
            let t = if va == 0.0 {
                ta
            } else {
                bisect(value, ta, tb, tol::EVENT_TIME_TOL)
            };
            if t > t_skip {
                zeros.push(PhiZero {
                    t,
                    kind: PhiZeroKind::Transversal,
                });
            }
        } else if (da > 0.0) != (db > 0.0) {
            let t = bisect(deriv, ta, tb, tol::EVENT_TIME_TOL);
            if t > t_skip && value(t).abs() <= touch_tol {
                zeros.push(PhiZero {
                    t,
                    kind: PhiZeroKind::Tangential,
                });
            }
        }
        ta = tb;
        va = vb;
        da = db;
    }
    dedup_zeros(&mut zeros, t_max);
    Ok(zeros)
}

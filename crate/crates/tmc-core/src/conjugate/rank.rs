//! First conjugate points along 3D extremals: the free-time rank test.
//!
//! A vertical basis of Jacobi fields — pure costate variations `δp(0)`
//! orthogonal to `∂H_r/∂p` so the Hamiltonian level is preserved — is
//! transported with the flow, and the test determinant stacks the two
//! transported state projections against the extremal velocity:
//!
//! ```text
//! D(t) = det [ δq₁(t) | δq₂(t) | q̇(t) ]
//! ```
//!
//! The velocity column quotients out the time translation of the free-time
//! problem, so `D(t) = 0` past the start means the endpoint map has lost
//! rank transversally to the trajectory: a conjugate point.  The columns are
//! normalized by their (positive) lengths before taking the determinant,
//! which keeps the sign while the fields grow exponentially along escaping
//! extremals; `D(0) = 0` by construction and the columns of escaping tails
//! become asymptotically parallel, so a sign change only counts as a root
//! when the determinant clears an activation floor on both sides.
//!
//! The scan stops — reporting explicit absence, not failure — when the
//! extremal leaves the spherical chart (polar axis, ball centre) before the
//! horizon: first conjugate points of interest occur while the chart is
//! healthy, and past its edge the transported fields mean nothing.

use serde::{Deserialize, Serialize};

use crate::extremal3d::{
    normalize_hamiltonian, ExtremalError, ExtremalState, HamiltonianLevel,
};
use crate::linalg::{det3, orthonormal_complement};
use crate::ode::{DenseStep, Dopri5, OdeError, OdeOptions};
use crate::params::DissipationParams;
use crate::tol;

use super::{augmented_rhs, ConjugateError};

/// A sign change of the normalized determinant counts as a root only when the
/// larger bracket sample exceeds this floor: the determinant starts at exactly
/// zero, and a collapsed determinant (parallel columns along escaping tails)
/// flips sign at rounding level with no rank deficiency behind it.
const ACTIVATION: f64 = 1e-10;
/// Both bracket samples must additionally exceed the evaluation noise of the
/// normalized determinant (rounding flips on collapsed columns sit near
/// 1e-17; a genuinely flat crossing sampled at small step sizes can leave one
/// side around 1e-11, so the two floors are tiered rather than shared).
const NOISE_FLOOR: f64 = 1e-13;
/// Jacobi columns are rescaled to unit length when they grow past this.
const COLUMN_RENORM: f64 = 1e100;

/// The first conjugate point located by the rank test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugateRecord {
    /// First conjugate time.
    pub t_c: f64,
    /// Azimuth coordinate at `t_c` (accumulated, not wrapped).
    pub theta_c: f64,
    /// Normalized test determinant at `t_c` (rounding-level residual).
    pub test_value: f64,
    /// Slope of the normalized determinant through the root.
    pub test_value_slope: f64,
    /// Bracketing certificate: `value_before` and `value_after` are the
    /// determinant at `t_c ∓ bracket_dt` and have opposite signs.
    pub bracket_dt: f64,
    pub value_before: f64,
    pub value_after: f64,
}

/// Dense scan output: every determinant sample plus the located root.
pub(crate) struct RankScan {
    pub samples: Vec<(f64, f64)>,
    pub record: Option<ConjugateRecord>,
}

/// Normalized rank-test determinant at an augmented phase point.
fn dhat(y: &[f64; 18], params: &DissipationParams) -> f64 {
    let base: [f64; 6] = y[..6].try_into().expect("layout");
    let (sin, cos) = base[1].sin_cos();
    let q = (base[5] * cos / sin).hypot(base[4]);
    let f = crate::extremal3d::rhs_canonical(&base, params, sin, cos, q);
    let cols = [
        [y[6], y[7], y[8]],
        [y[12], y[13], y[14]],
        [f[0], f[1], f[2]],
    ];
    let mut unit = [[0.0; 3]; 3];
    for (u, c) in unit.iter_mut().zip(cols.iter()) {
        let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        if n < 1e-300 {
            return 0.0;
        }
        for i in 0..3 {
            u[i] = c[i] / n; // positive scaling: sign preserved
        }
    }
    det3(unit[0], unit[1], unit[2])
}

/// Largest costate magnitude of the reference extremal.
fn costate_mag(y: &[f64; 18]) -> f64 {
    y[3].abs().max(y[4].abs()).max(y[5].abs())
}

/// Chart-exit predicate: the reference extremal has reached the polar axis
/// or the ball centre, where the scan must stop.
fn chart_exit(y: &[f64; 18], slack: f64) -> bool {
    y[1].sin().abs() < slack * tol::POLE_STOP_SIN || y[0] < slack * tol::RHO_STOP
}

fn switching_radius_of(y: &[f64; 18]) -> f64 {
    let (sin, cos) = y[1].sin_cos();
    (y[5] * cos / sin).hypot(y[4])
}

/// Runs the rank-test scan, returning all determinant samples together with
/// the first located sign change.  [`first_conjugate`] is the public wrapper.
pub(crate) fn conjugate_scan(
    s0: &ExtremalState,
    params: &DissipationParams,
    horizon: f64,
) -> Result<RankScan, ConjugateError> {
    // Fix the Hamiltonian level: scale to H_r = 1 when possible, otherwise
    // certify the exceptional level 0 (unit costate representative).
    let s0 = match normalize_hamiltonian(s0, params, HamiltonianLevel::One) {
        Ok(s) => s,
        Err(ExtremalError::NormalizationFailed { .. }) => {
            normalize_hamiltonian(s0, params, HamiltonianLevel::Zero)?
        }
        Err(e) => return Err(e.into()),
    };

    // Vertical basis orthogonal to ∂H_r/∂p = (ρ̇, φ̇, θ̇): level-preserving
    // costate variations.
    let f0 = crate::extremal3d::extremal_rhs(&s0, params)?;
    let vp = [f0[0], f0[1], f0[2]];
    let vp_norm = (vp[0] * vp[0] + vp[1] * vp[1] + vp[2] * vp[2]).sqrt();
    if vp_norm < 1e-12 {
        return Err(ConjugateError::Extremal(ExtremalError::NormalizationFailed {
            h0: 0.0,
        }));
    }
    let (e1, e2) = orthonormal_complement(vp);

    let mut y0 = [0.0; 18];
    y0[..6].copy_from_slice(&s0.to_array());
    y0[9..12].copy_from_slice(&e1);
    y0[15..18].copy_from_slice(&e2);

    let pr = *params;
    let opts = OdeOptions { rtol: tol::RTOL, atol: tol::ATOL, ..OdeOptions::default() };
    let mut sol = Dopri5::new(
        move |_, y: &[f64; 18]| augmented_rhs(y, &pr),
        0.0,
        y0,
        horizon,
        opts,
    )?;

    let mut samples: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let mut prev = (0.0, 0.0);

    while sol.t < horizon {
        let seg = match sol.step(horizon) {
            Ok(seg) => seg,
            // Underflow against a chart boundary is the flow leaving the
            // scan's domain, not a numerical failure.
            Err(OdeError::StepSizeUnderflow { .. }) if chart_exit(&sol.y, 10.0) => break,
            Err(e) => return Err(e.into()),
        };
        let mut stop = false;
        for frac in [0.25, 0.5, 0.75, 1.0] {
            let ts = seg.t0 + frac * seg.h;
            let y = seg.eval(ts);

            if chart_exit(&y, 1.0) {
                stop = true;
                break;
            }
            let q = switching_radius_of(&y);
            if q < 1e-8 * costate_mag(&y).max(1.0) {
                return Err(ConjugateError::Extremal(ExtremalError::OnSwitchingSurface {
                    q,
                }));
            }

            let mut t_here = ts;
            let mut d = dhat(&y, params);
            // An exact zero on a sample would poison the sign product; nudge
            // off it (the root is then bracketed as usual).
            let mut nudges = 0;
            while d == 0.0 && nudges < 4 {
                t_here = (t_here + 1e-9 * seg.h.abs()).min(seg.t1());
                d = dhat(&seg.eval(t_here), params);
                nudges += 1;
            }
            samples.push((t_here, d));

            // A crossing counts only when both neighbors clear the floor:
            // the determinant starts at exactly zero, and along escaping
            // extremals the columns become asymptotically parallel, so the
            // collapsed determinant flips sign at rounding level without any
            // rank deficiency behind it.
            if prev.1 * d < 0.0
                && prev.1.abs().min(d.abs()) > NOISE_FLOOR
                && prev.1.abs().max(d.abs()) > ACTIVATION
            {
                let record = bisect_root(&seg, params, prev, (t_here, d));
                return Ok(RankScan { samples, record: Some(record) });
            }
            prev = (t_here, d);
        }
        if stop {
            break;
        }

        // Rescale exploding Jacobi columns; the normalized determinant and
        // its sign history are invariant under positive column scalings.
        let mut y = sol.y;
        let mut rescaled = false;
        for k in 0..2 {
            let off = 6 + 6 * k;
            let norm = (off..off + 6).map(|i| y[i] * y[i]).sum::<f64>().sqrt();
            if norm > COLUMN_RENORM {
                for i in off..off + 6 {
                    y[i] /= norm;
                }
                rescaled = true;
            }
        }
        if rescaled {
            sol.set_state(sol.t, y)?;
        }
    }

    Ok(RankScan { samples, record: None })
}

/// Bisects a bracketed sign change of the normalized determinant inside one
/// dense segment down to [`tol::CONJUGATE_TIME_TOL`] and assembles the
/// record with its bracketing certificate.
fn bisect_root(
    seg: &DenseStep<18>,
    params: &DissipationParams,
    lo: (f64, f64),
    hi: (f64, f64),
) -> ConjugateRecord {
    let (mut a, mut fa) = (lo.0.max(seg.t0), lo.1);
    let (mut b, mut fb) = (hi.0, hi.1);
    while b - a > tol::CONJUGATE_TIME_TOL {
        let mid = 0.5 * (a + b);
        let fm = dhat(&seg.eval(mid), params);
        if fm == 0.0 {
            // Exact hit: shrink symmetrically around it if the smaller
            // interval still brackets, else stop with the current one.
            let w = 0.25 * (b - a);
            let (fa2, fb2) = (dhat(&seg.eval(mid - w), params), dhat(&seg.eval(mid + w), params));
            if fa2 * fb2 < 0.0 {
                a = mid - w;
                fa = fa2;
                b = mid + w;
                fb = fb2;
                continue;
            }
            break;
        }
        if fa * fm < 0.0 {
            b = mid;
            fb = fm;
        } else {
            a = mid;
            fa = fm;
        }
    }
    let t_c = 0.5 * (a + b);
    let y_c = seg.eval(t_c);
    ConjugateRecord {
        t_c,
        theta_c: y_c[2],
        test_value: dhat(&y_c, params),
        test_value_slope: (fb - fa) / (b - a),
        bracket_dt: 0.5 * (b - a),
        value_before: fa,
        value_after: fb,
    }
}

/// Locates the first conjugate point along the extremal through `s0` (the
/// costate is rescaled to the level `H_r = 1` first, or certified at the
/// exceptional level 0), scanning up to `horizon`.
///
/// Returns `Ok(None)` — explicit absence, not failure — when no sign change
/// occurs before the horizon or before the extremal leaves the spherical
/// chart (polar axis or ball centre).
///
/// # Errors
///
/// Σ encounters ([`ExtremalError::OnSwitchingSurface`]: the smooth
/// variational transport does not extend across a crossing), normalization
/// failures, and integrator breakdowns away from chart boundaries.
pub fn first_conjugate(
    s0: &ExtremalState,
    params: &DissipationParams,
    horizon: f64,
) -> Result<Option<ConjugateRecord>, ConjugateError> {
    Ok(conjugate_scan(s0, params, horizon)?.record)
}

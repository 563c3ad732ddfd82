//! Newton shooting for two-point boundary problems on the Bloch ball.
//!
//! The boundary problem — steer `q0` to `q1` along an extremal — has four
//! unknowns `(p_ρ, p_φ, p_θ, T)(0)` and four equations: the Cartesian
//! endpoint mismatch (three components, immune to azimuth wrapping) plus the
//! Hamiltonian level `H_r(q0, p0) = 1`.  The level row pins the costate
//! scale, which is otherwise a null direction of the endpoint map (`H_r` is
//! 1-homogeneous in `p`, so rescaling `p0` does not move the state
//! trajectory).  The Jacobian assembles exactly, not by differencing: three
//! vertical unit Jacobi fields transported with the flow give the
//! `∂endpoint/∂p0` block, the extremal velocity at `T` gives the time
//! column, and the velocity at `0` is the gradient of the level row.
//!
//! Without a guess, starts are sampled on a Fibonacci sphere of costate
//! directions (scaled onto the level) and polished concurrently; the winner
//! is the converged solution of smallest residual, ties broken by lowest
//! start index, so the outcome is deterministic.  A shot that collapses
//! onto the switching surface is abandoned — the smooth variational
//! transport does not extend across a crossing — and reported as such when
//! no start survives.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::extremal3d::{hamiltonian_hr, ExtremalError, ExtremalState};
use crate::linalg::solve;
use crate::ode::{Dopri5, OdeError, OdeOptions};
use crate::params::DissipationParams;
use crate::state::BlochState;
use crate::tol;

use super::{augmented_rhs, ConjugateError};

/// Shots past this time are rejected during Newton backtracking: the flow is
/// deep in its asymptotic regime and the boundary problem is meaningless.
const T_SHOT_MAX: f64 = tol::T_ASYM;

/// An initial costate and transfer-time estimate for [`shoot`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingGuess {
    /// `(p_ρ, p_φ, p_θ)` at the source point.
    pub p0: [f64; 3],
    /// Transfer-time estimate.
    pub t: f64,
}

/// A converged shooting solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingSolution {
    /// Initial costate `(p_ρ, p_φ, p_θ)`, rescaled onto the level `H_r = 1`.
    pub p0: [f64; 3],
    /// Transfer time.
    pub t: f64,
    /// Euclidean endpoint mismatch of the converged shot.
    pub residual: f64,
    /// Newton iterations spent on the winning start.
    pub n_iterations: usize,
    /// Index of the winning Fibonacci start (`None` when a guess was given).
    pub start_index: Option<usize>,
}

fn cartesian_of(rho: f64, phi: f64, theta: f64) -> [f64; 3] {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    [rho * sp * ct, rho * sp * st, rho * cp]
}

/// Jacobian of the Cartesian chart map, rows `(x, y, z)`, columns
/// `(ρ, φ, θ)`.
fn dcartesian(rho: f64, phi: f64, theta: f64) -> [[f64; 3]; 3] {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    [
        [sp * ct, rho * cp * ct, -rho * sp * st],
        [sp * st, rho * cp * st, rho * sp * ct],
        [cp, -rho * sp, 0.0],
    ]
}

/// Spherical coordinates of a Bloch point, guarded against the chart's
/// singular loci.
fn spherical_of(q: BlochState) -> Result<(f64, f64, f64), ConjugateError> {
    let rho = (q.x * q.x + q.y * q.y + q.z * q.z).sqrt();
    if rho < tol::EPS_RHO {
        return Err(ConjugateError::Extremal(ExtremalError::OriginSingularity));
    }
    let phi = (q.z / rho).clamp(-1.0, 1.0).acos();
    if phi.sin().abs() < tol::EPS_POLE {
        return Err(ConjugateError::Extremal(ExtremalError::PoleSingularity));
    }
    Ok((rho, phi, q.y.atan2(q.x)))
}

/// Deterministic unit-sphere sampling for the multi-start costates.
fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * k as f64;
            [r * a.cos(), r * a.sin(), z]
        })
        .collect()
}

/// Why a single shot evaluation could not produce residual and Jacobian.
enum ShotAbort {
    /// The shot collapsed onto Σ at the given time.
    Sigma(f64),
    /// Chart exit, integrator breakdown, or an inadmissible iterate.
    Invalid,
}

struct ShotEval {
    /// `(mismatch_x, mismatch_y, mismatch_z, H_r − 1)`.
    f: [f64; 4],
    jac: [[f64; 4]; 4],
}

/// Integrates one shot with three vertical unit Jacobi fields and assembles
/// the Newton system at `t = t_end`.
fn eval_shot(
    base: (f64, f64, f64),
    p0: [f64; 3],
    t_end: f64,
    q1c: [f64; 3],
    params: &DissipationParams,
) -> Result<ShotEval, ShotAbort> {
    let s0 = ExtremalState::new(base.0, base.1, base.2, p0[0], p0[1], p0[2]);
    let f0 = crate::extremal3d::extremal_rhs(&s0, params).map_err(|e| match e {
        ExtremalError::OnSwitchingSurface { .. } => ShotAbort::Sigma(0.0),
        _ => ShotAbort::Invalid,
    })?;
    let level = hamiltonian_hr(&s0, params).map_err(|_| ShotAbort::Invalid)? - 1.0;

    let mut y0 = [0.0; 24];
    y0[..6].copy_from_slice(&s0.to_array());
    for k in 0..3 {
        y0[6 + 6 * k + 3 + k] = 1.0;
    }
    let pr = *params;
    let opts = OdeOptions { rtol: tol::RTOL, atol: tol::ATOL, ..OdeOptions::default() };
    let mut sol = Dopri5::new(
        move |_, y: &[f64; 24]| augmented_rhs(y, &pr),
        0.0,
        y0,
        t_end,
        opts,
    )
    .map_err(|_| ShotAbort::Invalid)?;

    while sol.t < t_end {
        let seg = match sol.step(t_end) {
            Ok(seg) => seg,
            Err(OdeError::StepSizeUnderflow { .. }) => {
                // Distinguish a Σ collapse (reportable) from a chart exit.
                let (sin, cos) = sol.y[1].sin_cos();
                let q = (sol.y[5] * cos / sin).hypot(sol.y[4]);
                let pmag = sol.y[3].abs().max(sol.y[4].abs()).max(sol.y[5].abs());
                if q < 1e-6 * pmag.max(1.0) {
                    return Err(ShotAbort::Sigma(sol.t));
                }
                return Err(ShotAbort::Invalid);
            }
            Err(_) => return Err(ShotAbort::Invalid),
        };
        for frac in [0.5, 1.0] {
            let y = seg.eval(seg.t0 + frac * seg.h);
            let (sin, cos) = y[1].sin_cos();
            if sin.abs() < tol::POLE_STOP_SIN || y[0] < tol::RHO_STOP {
                return Err(ShotAbort::Invalid);
            }
            let q = (y[5] * cos / sin).hypot(y[4]);
            let pmag = y[3].abs().max(y[4].abs()).max(y[5].abs());
            if q < 1e-8 * pmag.max(1.0) {
                return Err(ShotAbort::Sigma(seg.t0 + frac * seg.h));
            }
        }
    }

    let y = sol.y;
    let w: [f64; 6] = y[..6].try_into().expect("layout");
    let dc = dcartesian(w[0], w[1], w[2]);
    let end = cartesian_of(w[0], w[1], w[2]);
    let (sin, cos) = w[1].sin_cos();
    let qv = (w[5] * cos / sin).hypot(w[4]);
    let fend = crate::extremal3d::rhs_canonical(&w, params, sin, cos, qv);

    let mut jac = [[0.0; 4]; 4];
    for col in 0..3 {
        let dq = [y[6 + 6 * col], y[7 + 6 * col], y[8 + 6 * col]];
        for row in 0..3 {
            jac[row][col] = dc[row][0] * dq[0] + dc[row][1] * dq[1] + dc[row][2] * dq[2];
        }
        // Level row: ∂H_r/∂p at the source is the initial state velocity.
        jac[3][col] = f0[col];
    }
    for row in 0..3 {
        jac[row][3] = dc[row][0] * fend[0] + dc[row][1] * fend[1] + dc[row][2] * fend[2];
    }
    jac[3][3] = 0.0;

    Ok(ShotEval {
        f: [end[0] - q1c[0], end[1] - q1c[1], end[2] - q1c[2], level],
        jac,
    })
}

enum StartOutcome {
    Converged { p0: [f64; 3], t: f64, residual: f64, n_iterations: usize },
    Sigma { t: f64 },
    Failed { best: f64 },
}

/// Damped Newton polish of one start.
fn newton_polish(
    base: (f64, f64, f64),
    mut p0: [f64; 3],
    mut t: f64,
    q1c: [f64; 3],
    params: &DissipationParams,
) -> StartOutcome {
    let mut best = f64::INFINITY;
    let mut last_sigma = None;

    let mut cur = match eval_shot(base, p0, t, q1c, params) {
        Ok(ev) => ev,
        Err(ShotAbort::Sigma(ts)) => return StartOutcome::Sigma { t: ts },
        Err(ShotAbort::Invalid) => return StartOutcome::Failed { best },
    };

    for iter in 0..tol::SHOOT_MAX_NEWTON {
        let residual = (cur.f[0] * cur.f[0] + cur.f[1] * cur.f[1] + cur.f[2] * cur.f[2]).sqrt();
        best = best.min(residual);
        if residual < tol::SHOOT_TOL {
            return StartOutcome::Converged { p0, t, residual, n_iterations: iter };
        }

        let Some(delta) = solve::<4>(cur.jac, cur.f) else {
            return StartOutcome::Failed { best };
        };

        // Backtrack on inadmissible or non-evaluable iterates.
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..8 {
            let trial_p = [
                p0[0] - lambda * delta[0],
                p0[1] - lambda * delta[1],
                p0[2] - lambda * delta[2],
            ];
            let trial_t = t - lambda * delta[3];
            if !(1e-9..=T_SHOT_MAX).contains(&trial_t) {
                lambda *= 0.5;
                continue;
            }
            match eval_shot(base, trial_p, trial_t, q1c, params) {
                Ok(ev) => {
                    accepted = Some((trial_p, trial_t, ev));
                    break;
                }
                Err(ShotAbort::Sigma(ts)) => {
                    last_sigma = Some(ts);
                    lambda *= 0.5;
                }
                Err(ShotAbort::Invalid) => lambda *= 0.5,
            }
        }
        match accepted {
            Some((np, nt, ev)) => {
                p0 = np;
                t = nt;
                cur = ev;
            }
            None => {
                return match last_sigma {
                    Some(ts) => StartOutcome::Sigma { t: ts },
                    None => StartOutcome::Failed { best },
                };
            }
        }
    }
    StartOutcome::Failed { best }
}

/// Rescale a converged costate onto the exact level `H_r = 1` (pure
/// homogeneity: the state trajectory and transfer time are unchanged).
fn on_level(base: (f64, f64, f64), p0: [f64; 3], params: &DissipationParams) -> [f64; 3] {
    let s = ExtremalState::new(base.0, base.1, base.2, p0[0], p0[1], p0[2]);
    match hamiltonian_hr(&s, params) {
        Ok(h) if h > 1e-9 => [p0[0] / h, p0[1] / h, p0[2] / h],
        _ => p0,
    }
}

/// Solves the two-point boundary problem from `q0` to `q1`: finds an initial
/// costate and transfer time whose extremal lands on the target within
/// [`tol::SHOOT_TOL`].
///
/// With a `guess`, a single damped Newton iteration is polished from it.
/// Without one, [`tol::SHOOT_N_STARTS`] Fibonacci-sphere costate directions
/// (scaled onto the level `H_r = 1`) run concurrently and the
/// smallest-residual converged start wins, ties broken by lowest index.
///
/// # Errors
///
/// [`ConjugateError::NoConvergence`] when no start converges (the residual
/// carries the best mismatch seen); [`ConjugateError::SigmaCrossingInShot`]
/// when shots fail by collapsing onto the switching surface instead —
/// continuation across Σ would need crossing-aware transport.  Chart guards
/// on `q0`/`q1` propagate as [`ConjugateError::Extremal`].
pub fn shoot(
    q0: BlochState,
    q1: BlochState,
    params: &DissipationParams,
    guess: Option<ShootingGuess>,
) -> Result<ShootingSolution, ConjugateError> {
    let base = spherical_of(q0)?;
    let (rho1, phi1, theta1) = spherical_of(q1)?;
    let q1c = cartesian_of(rho1, phi1, theta1);
    let q0c = cartesian_of(base.0, base.1, base.2);

    let dist = ((q1c[0] - q0c[0]).powi(2)
        + (q1c[1] - q0c[1]).powi(2)
        + (q1c[2] - q0c[2]).powi(2))
    .sqrt();

    if dist < 1e-12 {
        // Already there: the trivial solution, with any admissible costate.
        let p0 = match guess {
            Some(g) => g.p0,
            None => fibonacci_sphere(tol::SHOOT_N_STARTS)
                .into_iter()
                .find_map(|dir| {
                    let s = ExtremalState::new(base.0, base.1, base.2, dir[0], dir[1], dir[2]);
                    match hamiltonian_hr(&s, params) {
                        Ok(h) if h > 1e-9 => Some([dir[0] / h, dir[1] / h, dir[2] / h]),
                        _ => None,
                    }
                })
                .ok_or(ConjugateError::NoConvergence { residual: f64::INFINITY })?,
        };
        return Ok(ShootingSolution {
            p0: on_level(base, p0, params),
            t: 0.0,
            residual: 0.0,
            n_iterations: 0,
            start_index: None,
        });
    }

    if let Some(g) = guess {
        return match newton_polish(base, g.p0, g.t, q1c, params) {
            StartOutcome::Converged { p0, t, residual, n_iterations } => Ok(ShootingSolution {
                p0: on_level(base, p0, params),
                t,
                residual,
                n_iterations,
                start_index: None,
            }),
            StartOutcome::Sigma { t } => Err(ConjugateError::SigmaCrossingInShot { t }),
            StartOutcome::Failed { best } => {
                Err(ConjugateError::NoConvergence { residual: best })
            }
        };
    }

    let t0 = (1.5 * dist).max(0.2);
    let starts: Vec<(usize, [f64; 3])> = fibonacci_sphere(tol::SHOOT_N_STARTS)
        .into_iter()
        .enumerate()
        .filter_map(|(i, dir)| {
            let s = ExtremalState::new(base.0, base.1, base.2, dir[0], dir[1], dir[2]);
            match hamiltonian_hr(&s, params) {
                // Only directions that scale onto the level H_r = 1.
                Ok(h) if h > 1e-9 => Some((i, [dir[0] / h, dir[1] / h, dir[2] / h])),
                _ => None,
            }
        })
        .collect();

    let outcomes: Vec<(usize, StartOutcome)> = starts
        .into_par_iter()
        .map(|(i, p0)| (i, newton_polish(base, p0, t0, q1c, params)))
        .collect();

    let mut winner: Option<ShootingSolution> = None;
    let mut best_failed = f64::INFINITY;
    let mut first_sigma = None;
    let mut any_non_sigma = false;
    for (i, out) in outcomes {
        match out {
            StartOutcome::Converged { p0, t, residual, n_iterations } => {
                any_non_sigma = true;
                // Minimal residual, lowest start index on ties: the loop
                // visits indices in order, so strict improvement keeps the
                // first of equals.
                if winner.as_ref().map_or(true, |w| residual < w.residual) {
                    winner = Some(ShootingSolution {
                        p0: on_level(base, p0, params),
                        t,
                        residual,
                        n_iterations,
                        start_index: Some(i),
                    });
                }
            }
            StartOutcome::Sigma { t } => {
                if first_sigma.is_none() {
                    first_sigma = Some(t);
                }
            }
            StartOutcome::Failed { best } => {
                any_non_sigma = true;
                best_failed = best_failed.min(best);
            }
        }
    }

    match winner {
        Some(sol) => Ok(sol),
        None => match first_sigma {
            Some(t) if !any_non_sigma => Err(ConjugateError::SigmaCrossingInShot { t }),
            _ => Err(ConjugateError::NoConvergence { residual: best_failed }),
        },
    }
}

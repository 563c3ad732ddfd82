//! Bang-bang / singular extremal integration in the meridian plane.
//!
//! State and costate are integrated together as `w = (y, z, p_y, p_z)`.  A
//! bang arc runs with constant `u = ±1`; the maximum principle flips the
//! control at transversal zeros of `Φ = p·G(q)`.  A zero with `Φ̇ = 0` is a
//! contact of order two — it necessarily lies on the singular set `S` — and
//! opens a singular arc when the point is hyperbolic with admissible singular
//! control.  Singular arcs ride `u = u_s(q)` until the control saturates
//! (`|u_s| = 1`) or the fast classification is lost, then hand back to bang
//! logic.  Every transition is recorded as a [`PlanarEvent`].

use crate::dynamics::bloch_rhs;
use crate::ode::{bisect_zero, DenseStep, Dopri5, OdeOptions};
use crate::params::DissipationParams;
use crate::planar::invariants::{
    classify_singular, singular_control_general, singular_membership, SingularKind,
};
use crate::planar::lie::Brackets;
use crate::planar::switching::{phi, phi_ddot, phi_dot};
use crate::planar::{PlanarCostate, PlanarError, PlanarState};
use crate::state::{BlochState, ControlVector};
use crate::tol;
use serde::{Deserialize, Serialize};

/// Control law of one arc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ArcControl {
    /// Constant control (±1, or the frozen value of a saturated exit).
    Bang(f64),
    /// Feedback singular control `u_s(q)`.
    Singular,
}

/// What happened at a recorded trajectory event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PlanarEventKind {
    /// Transversal zero of `Φ` (the control flips there on an extremal; a
    /// constant-control arc records it without acting).
    Switch,
    /// Contact `Φ = Φ̇ = 0` that did not open a singular arc.
    TangentialTouch,
    /// Contact opening a singular arc.
    SingularEnter,
    /// Saturation `|u_s| = 1` ends the singular arc; a saturated bang arc
    /// continues (the junction spawning a switching curve).
    SingularSaturation,
    /// The fast/slow classification flips along the singular arc (sign change
    /// of `D·D″`, e.g. where it meets the collinear set).  Recorded only —
    /// the extremal continues singular.
    SingularClassChange,
}

/// Recorded event with the full phase point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarEvent {
    pub t: f64,
    pub q: PlanarState,
    pub p: PlanarCostate,
    pub kind: PlanarEventKind,
}

/// One constant-law arc with its dense steps.  The final stored step may
/// overhang `t_end` (events cut arcs mid-step); evaluation clamps to the
/// arc's time window.
#[derive(Debug, Clone)]
pub struct PlanarSegment {
    pub control: ArcControl,
    pub t_start: f64,
    pub t_end: f64,
    pub dense: Vec<DenseStep<4>>,
}

/// A sampled phase point, as used for export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarSample {
    pub t: f64,
    pub q: PlanarState,
    pub p: PlanarCostate,
    pub u: f64,
    pub phi: f64,
}

/// A planar extremal (or constant-control arc) with events.
#[derive(Debug, Clone)]
pub struct PlanarTrajectory {
    pub params: DissipationParams,
    pub segments: Vec<PlanarSegment>,
    pub events: Vec<PlanarEvent>,
    pub t_end: f64,
}

fn split(w: [f64; 4]) -> (PlanarState, PlanarCostate) {
    (
        PlanarState::new(w[0], w[1]),
        PlanarCostate::new(w[2], w[3]),
    )
}

impl PlanarTrajectory {
    pub fn initial_point(&self) -> Option<(PlanarState, PlanarCostate)> {
        let seg = self.segments.first()?;
        let step = seg.dense.first()?;
        Some(split(step.eval(seg.t_start)))
    }

    pub fn final_point(&self) -> Option<(PlanarState, PlanarCostate)> {
        let seg = self.segments.last()?;
        let step = seg.dense.last()?;
        Some(split(step.eval(seg.t_end)))
    }

    /// Phase point and control value at time `t` (clamped to the trajectory
    /// span).  `None` only on an empty trajectory.
    pub fn state_at(&self, t: f64) -> Option<(PlanarState, PlanarCostate, f64)> {
        let t = t.clamp(self.segments.first()?.t_start, self.t_end);
        // Locate the owning segment (few arcs: linear scan is fine).
        let seg = self
            .segments
            .iter()
            .find(|s| t <= s.t_end)
            .or_else(|| self.segments.last())?;
        let tq = t.clamp(seg.t_start, seg.t_end);
        let idx = match seg
            .dense
            .binary_search_by(|step| step.t0.total_cmp(&tq))
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let step = seg.dense.get(idx)?;
        let (q, p) = split(step.eval(tq));
        let u = match seg.control {
            ArcControl::Bang(u) => u,
            ArcControl::Singular => singular_control_general(q, &self.params).0,
        };
        Some((q, p, u))
    }

    /// Number of transversal switching events.
    pub fn switch_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.kind == PlanarEventKind::Switch)
            .count()
    }

    /// Compact arc-structure string: `+`/`-` for bang arcs by control sign,
    /// `s` for singular arcs (e.g. `"+s-"`).
    pub fn arc_pattern(&self) -> String {
        self.segments
            .iter()
            .map(|s| match s.control {
                ArcControl::Bang(u) if u >= 0.0 => '+',
                ArcControl::Bang(_) => '-',
                ArcControl::Singular => 's',
            })
            .collect()
    }

    /// Uniform sampling with `n + 1` points (for export).
    pub fn sample(&self, n: usize) -> Vec<PlanarSample> {
        let Some((t0, _)) = self.segments.first().map(|s| (s.t_start, ())) else {
            return Vec::new();
        };
        (0..=n)
            .filter_map(|i| {
                let t = t0 + (self.t_end - t0) * i as f64 / n.max(1) as f64;
                let (q, p, u) = self.state_at(t)?;
                Some(PlanarSample {
                    t,
                    q,
                    p,
                    u,
                    phi: phi(q, p),
                })
            })
            .collect()
    }
}

/// Coupled state–costate field for control `u`; the state block delegates to
/// the Cartesian Bloch field on the `x = 0` slice.
fn planar_rhs(w: &[f64; 4], u: f64, params: &DissipationParams) -> [f64; 4] {
    let q = BlochState::new(0.0, w[0], w[1]);
    let d = bloch_rhs(&q, params, &ControlVector::cartesian(u, 0.0));
    [
        d[1],
        d[2],
        params.gamma * w[2] - u * w[3],
        u * w[2] + params.gamma_plus * w[3],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Candidate {
    Crossing(f64),
    Touch(f64),
}

impl Candidate {
    fn t(&self) -> f64 {
        match self {
            Candidate::Crossing(t) | Candidate::Touch(t) => *t,
        }
    }
}

/// Scan one dense step for zeros of `Φ` (crossings) and of `Φ̇` that are
/// contacts (touches), at times `> t_min`; sorted by time.
fn scan_candidates(
    step: &DenseStep<4>,
    br: &Brackets,
    t_min: f64,
) -> Vec<Candidate> {
    const NSUB: usize = 8;
    let mut out = Vec::new();
    let (t0, t1) = (step.t0, step.t1());
    let dt = (t1 - t0) / NSUB as f64;
    if dt == 0.0 {
        return out;
    }
    let phi_at = |_t: f64, w: &[f64; 4]| {
        let (q, p) = split(*w);
        phi(q, p)
    };
    let dphi_at = |_t: f64, w: &[f64; 4]| {
        let (q, p) = split(*w);
        phi_dot(q, p, br)
    };
    let mut ta = t0;
    let w0 = step.eval(ta);
    let mut pa = phi_at(ta, &w0);
    let mut da = dphi_at(ta, &w0);
    for i in 1..=NSUB {
        let tb = if i == NSUB { t1 } else { t0 + i as f64 * dt };
        let wb = step.eval(tb);
        let pb = phi_at(tb, &wb);
        let db = dphi_at(tb, &wb);
        if (pa > 0.0) != (pb > 0.0) {
            let t = bisect_zero(step, phi_at, ta, tb, tol::EVENT_TIME_TOL);
            if t > t_min {
                out.push(Candidate::Crossing(t));
            }
        } else if (da > 0.0) != (db > 0.0) {
            let t = bisect_zero(step, dphi_at, ta, tb, tol::EVENT_TIME_TOL);
            let (q, p) = split(step.eval(t));
            let scale = p.norm() * q.norm();
            if t > t_min && phi(q, p).abs() <= tol::EPS_TOUCH * scale.max(f64::MIN_POSITIVE) {
                out.push(Candidate::Touch(t));
            }
        }
        ta = tb;
        pa = pb;
        da = db;
    }
    out
}

/// Does a contact at `(q, p)` open a *fast* singular arc (hyperbolic point
/// with admissible control)?
fn singular_entry(q: PlanarState, params: &DissipationParams) -> bool {
    match classify_singular(q, params) {
        Ok(c) => {
            let (_, admissible) = singular_control_general(q, params);
            c.kind == SingularKind::Hyperbolic && admissible
        }
        Err(_) => false,
    }
}

/// Bang branch consistent with the maximum principle at a contact point
/// (`Φ = Φ̇ = 0`): a constant control must satisfy `u·Φ̈(u) > 0` so that
/// `u = sign Φ` holds just after.  Returns the candidate with the larger
/// margin; `None` when neither sign qualifies.
fn bang_branch_at_contact(
    q: PlanarState,
    p: PlanarCostate,
    br: &Brackets,
) -> Option<f64> {
    let plus = phi_ddot(q, p, 1.0, br);
    let minus = -phi_ddot(q, p, -1.0, br);
    match (plus > 0.0, minus > 0.0) {
        (true, true) => Some(if plus >= minus { 1.0 } else { -1.0 }),
        (true, false) => Some(1.0),
        (false, true) => Some(-1.0),
        (false, false) => None,
    }
}

/// Continuation at a degenerate start (`Φ = Φ̇ = 0` at `t = 0`): prefer the
/// fast singular arc, then a consistent bang branch, and finally a slow
/// singular arc when the point sits on `S` with admissible control (e.g. the
/// costate aligned with the vertical axis, where `Φ ≡ 0` along the axis
/// extremal).  `None` means no extremal continuation exists numerically.
fn contact_branch(
    q: PlanarState,
    p: PlanarCostate,
    params: &DissipationParams,
    br: &Brackets,
) -> Option<ArcControl> {
    if singular_entry(q, params) {
        return Some(ArcControl::Singular);
    }
    if let Some(u) = bang_branch_at_contact(q, p, br) {
        return Some(ArcControl::Bang(u));
    }
    let on_s = singular_membership(q, params).abs() <= tol::EPS_CLASS.max(1e-12);
    let (_, admissible) = singular_control_general(q, params);
    if on_s && admissible {
        return Some(ArcControl::Singular);
    }
    None
}

struct Builder {
    params: DissipationParams,
    segments: Vec<PlanarSegment>,
    events: Vec<PlanarEvent>,
}

impl Builder {
    fn push_event(
        &mut self,
        t: f64,
        w: [f64; 4],
        kind: PlanarEventKind,
    ) -> Result<(), PlanarError> {
        let (q, p) = split(w);
        self.events.push(PlanarEvent { t, q, p, kind });
        if self.events.len() > tol::N_MAX_SWITCH {
            return Err(PlanarError::EventAccumulation {
                t,
                count: self.events.len(),
            });
        }
        Ok(())
    }

    fn finish(self, t_end: f64) -> PlanarTrajectory {
        PlanarTrajectory {
            params: self.params,
            segments: self.segments,
            events: self.events,
            t_end,
        }
    }
}

/// Integrate a constant-control arc `u ≡ eps` from `(q0, p0)`, recording
/// every zero of the switching function (transversal crossings and
/// tangential contacts) as events without acting on them.
///
/// This is the measurement tool behind the switching-count laws and the
/// analytic-determinant cross-checks; [`extremal_2d`] is the version that
/// implements the maximum principle.
pub fn integrate_bang_arc(
    q0: PlanarState,
    p0: PlanarCostate,
    eps: f64,
    params: &DissipationParams,
    horizon: f64,
) -> Result<PlanarTrajectory, PlanarError> {
    debug_assert!(eps == 1.0 || eps == -1.0, "bang control must be ±1");
    if p0.norm() == 0.0 {
        return Err(PlanarError::MissingCostate);
    }
    let br = Brackets::new(params);
    let mut builder = Builder {
        params: *params,
        segments: Vec::new(),
        events: Vec::new(),
    };
    let w0 = [q0.y, q0.z, p0.p_y, p0.p_z];

    // An anchored start (p0 ⟂ G(q0)) is itself a zero of Φ.
    let scale = p0.norm() * q0.norm();
    if phi(q0, p0).abs() <= tol::EPS_TOUCH * scale.max(f64::MIN_POSITIVE) {
        let kind = if phi_dot(q0, p0, &br).abs()
            <= tol::EPS_TOUCH * scale.max(f64::MIN_POSITIVE)
        {
            PlanarEventKind::TangentialTouch
        } else {
            PlanarEventKind::Switch
        };
        builder.push_event(0.0, w0, kind)?;
    }

    let p = *params;
    let rhs = move |_t: f64, w: &[f64; 4]| planar_rhs(w, eps, &p);
    let mut solver = Dopri5::new(rhs, 0.0, w0, horizon, OdeOptions::default())
        .map_err(PlanarError::Ode)?;
    let mut dense = Vec::new();
    let skip = 1e-9 * horizon.abs().max(1.0);
    let mut t_min = skip;
    while solver.t < horizon {
        let step = solver.step(horizon).map_err(PlanarError::Ode)?;
        for cand in scan_candidates(&step, &br, t_min) {
            let kind = match cand {
                Candidate::Crossing(_) => PlanarEventKind::Switch,
                Candidate::Touch(_) => PlanarEventKind::TangentialTouch,
            };
            builder.push_event(cand.t(), step.eval(cand.t()), kind)?;
            t_min = cand.t() + skip;
        }
        dense.push(step);
    }
    builder.segments.push(PlanarSegment {
        control: ArcControl::Bang(eps),
        t_start: 0.0,
        t_end: horizon,
        dense,
    });
    Ok(builder.finish(horizon))
}

/// Integrate the planar extremal through `(q0, p0)`: bang arcs concatenated
/// at transversal zeros of `Φ`, singular arcs opened at admissible
/// hyperbolic contacts and closed at saturation or loss of fastness.
pub fn extremal_2d(
    q0: PlanarState,
    p0: PlanarCostate,
    params: &DissipationParams,
    horizon: f64,
) -> Result<PlanarTrajectory, PlanarError> {
    if p0.norm() == 0.0 {
        return Err(PlanarError::MissingCostate);
    }
    let br = Brackets::new(params);
    let mut builder = Builder {
        params: *params,
        segments: Vec::new(),
        events: Vec::new(),
    };
    let mut w = [q0.y, q0.z, p0.p_y, p0.p_z];
    let mut t = 0.0;
    let skip = 1e-9 * horizon.abs().max(1.0);

    // Initial control selection.
    let mut mode = {
        let f0 = phi(q0, p0);
        let scale = (p0.norm() * q0.norm()).max(f64::MIN_POSITIVE);
        if f0.abs() > tol::EPS_TOUCH * scale {
            ArcControl::Bang(f0.signum())
        } else {
            let fd = phi_dot(q0, p0, &br);
            let gfq = br.gf.eval(q0);
            let scale_d = (p0.norm() * gfq[0].hypot(gfq[1])).max(f64::MIN_POSITIVE);
            if fd.abs() > tol::EPS_TOUCH * scale_d {
                // Switch-anchored start: Φ crosses zero at t = 0.
                builder.push_event(0.0, w, PlanarEventKind::Switch)?;
                ArcControl::Bang(fd.signum())
            } else {
                match contact_branch(q0, p0, params, &br)
                    .ok_or(PlanarError::StartUndetermined)?
                {
                    ArcControl::Singular => {
                        builder.push_event(0.0, w, PlanarEventKind::SingularEnter)?;
                        ArcControl::Singular
                    }
                    bang => {
                        builder.push_event(0.0, w, PlanarEventKind::TangentialTouch)?;
                        bang
                    }
                }
            }
        }
    };

    while t < horizon {
        match mode {
            ArcControl::Bang(u) => {
                let p = *params;
                let rhs = move |_t: f64, w: &[f64; 4]| planar_rhs(w, u, &p);
                let mut solver =
                    Dopri5::new(rhs, t, w, horizon, OdeOptions::default()).map_err(PlanarError::Ode)?;
                let mut dense = Vec::new();
                let t_start = t;
                let mut t_min = t + skip;
                let mut acted: Option<(f64, [f64; 4], ArcControl)> = None;
                'arc: while solver.t < horizon {
                    let step = solver.step(horizon).map_err(PlanarError::Ode)?;
                    let cands = scan_candidates(&step, &br, t_min);
                    dense.push(step);
                    let step = dense.last().unwrap();
                    for cand in cands {
                        let te = cand.t();
                        let we = step.eval(te);
                        match cand {
                            Candidate::Crossing(_) => {
                                builder.push_event(te, we, PlanarEventKind::Switch)?;
                                acted = Some((te, we, ArcControl::Bang(-u)));
                                break 'arc;
                            }
                            Candidate::Touch(_) => {
                                let (qe, _pe) = split(we);
                                if singular_entry(qe, params) {
                                    builder.push_event(te, we, PlanarEventKind::SingularEnter)?;
                                    acted = Some((te, we, ArcControl::Singular));
                                    break 'arc;
                                }
                                builder.push_event(te, we, PlanarEventKind::TangentialTouch)?;
                                t_min = te + skip;
                            }
                        }
                    }
                }
                let (t_end, w_end) = match &acted {
                    Some((te, we, _)) => (*te, *we),
                    None => (horizon, solver.y),
                };
                builder.segments.push(PlanarSegment {
                    control: ArcControl::Bang(u),
                    t_start,
                    t_end,
                    dense,
                });
                t = t_end;
                w = w_end;
                if let Some((_, _, next)) = acted {
                    mode = next;
                }
            }
            ArcControl::Singular => {
                let p = *params;
                let rhs = move |_t: f64, w: &[f64; 4]| {
                    let q = PlanarState::new(w[0], w[1]);
                    let (us, _) = singular_control_general(q, &p);
                    planar_rhs(w, us, &p)
                };
                let mut solver =
                    Dopri5::new(rhs, t, w, horizon, OdeOptions::default()).map_err(PlanarError::Ode)?;
                let mut dense = Vec::new();
                let t_start = t;
                let mut t_min = t + skip;
                // Saturation ends the singular arc; a fast/slow classification
                // flip is recorded but the arc continues.
                let sat = |_t: f64, w: &[f64; 4]| {
                    let q = PlanarState::new(w[0], w[1]);
                    let (us, _) = singular_control_general(q, &p);
                    1.0 - us * us
                };
                let class = |_t: f64, w: &[f64; 4]| {
                    let q = PlanarState::new(w[0], w[1]);
                    let gq = br.g.eval(q);
                    let d = gq[0] * br.gfg.eval(q)[1] - gq[1] * br.gfg.eval(q)[0];
                    let dpp = gq[0] * br.f.eval(q)[1] - gq[1] * br.f.eval(q)[0];
                    d * dpp
                };
                let mut exit: Option<(f64, [f64; 4])> = None;
                'sarc: while solver.t < horizon {
                    let step = solver.step(horizon).map_err(PlanarError::Ode)?;
                    dense.push(step);
                    let step = dense.last().unwrap();
                    const NSUB: usize = 8;
                    let (t0s, t1s) = (step.t0, step.t1());
                    let dts = (t1s - t0s) / NSUB as f64;
                    let mut ta = t0s;
                    let mut sa = sat(ta, &step.eval(ta));
                    let mut ca = class(ta, &step.eval(ta));
                    for i in 1..=NSUB {
                        let tb = if i == NSUB { t1s } else { t0s + i as f64 * dts };
                        let wb = step.eval(tb);
                        let sb = sat(tb, &wb);
                        let cb = class(tb, &wb);
                        if (sa > 0.0) != (sb > 0.0) {
                            let te = bisect_zero(step, sat, ta, tb, tol::EVENT_TIME_TOL);
                            if te > t_min {
                                exit = Some((te, step.eval(te)));
                                break 'sarc;
                            }
                        } else if (ca > 0.0) != (cb > 0.0) {
                            let te = bisect_zero(step, class, ta, tb, tol::EVENT_TIME_TOL);
                            if te > t_min {
                                builder.push_event(
                                    te,
                                    step.eval(te),
                                    PlanarEventKind::SingularClassChange,
                                )?;
                                t_min = te + skip;
                            }
                        }
                        ta = tb;
                        sa = sb;
                        ca = cb;
                    }
                }
                let (t_end, w_end) = match &exit {
                    Some((te, we)) => (*te, *we),
                    None => (horizon, solver.y),
                };
                builder.segments.push(PlanarSegment {
                    control: ArcControl::Singular,
                    t_start,
                    t_end,
                    dense,
                });
                t = t_end;
                w = w_end;
                if let Some((te, we)) = exit {
                    builder.push_event(te, we, PlanarEventKind::SingularSaturation)?;
                    let (qe, _) = split(we);
                    let (us, _) = singular_control_general(qe, params);
                    mode = ArcControl::Bang(us.signum());
                }
            }
        }
    }
    Ok(builder.finish(horizon))
}

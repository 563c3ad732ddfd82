//! Numerical time-minimal synthesis in the meridian plane.
//!
//! [`synthesis_sample`] sweeps extremals over a fan of initial costate
//! directions, records the first arrival time of each extremal in every cell
//! of a position grid, and keeps per cell the earliest arrival (the
//! numerical value function) together with the best arrival from a
//! *distinct* extremal family.  Two distinct families arriving within the
//! grid's own time-discretization error mark a cut-locus cell; switch events
//! and singular arcs lying on still-optimal portions of winning extremals
//! form the switching locus.  The zero sets of the singular and collinear
//! invariants are emitted alongside as reference polylines.

use crate::params::DissipationParams;
use crate::planar::extremal::{extremal_2d, ArcControl, PlanarEventKind, PlanarTrajectory};
use crate::planar::invariants::{
    classify_singular, horizontal_saturation_y, SingularKind,
};
use crate::planar::{PlanarCostate, PlanarError, PlanarState};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::f64::consts::PI;

/// Sampling layout: costate fan, position grid, horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisGrid {
    /// Number of initial costate directions on the unit circle.
    pub n_dirs: usize,
    pub y_range: (f64, f64),
    pub z_range: (f64, f64),
    pub ny: usize,
    pub nz: usize,
    /// Integration horizon per extremal.
    pub horizon: f64,
}

impl Default for SynthesisGrid {
    fn default() -> Self {
        SynthesisGrid {
            n_dirs: 512,
            y_range: (-1.02, 1.02),
            z_range: (-1.02, 1.02),
            ny: 171,
            nz: 171,
            horizon: 4.0,
        }
    }
}

impl SynthesisGrid {
    pub fn cell_size(&self) -> (f64, f64) {
        (
            (self.y_range.1 - self.y_range.0) / self.ny as f64,
            (self.z_range.1 - self.z_range.0) / self.nz as f64,
        )
    }

    fn cell_index(&self, q: PlanarState) -> Option<usize> {
        let (dy, dz) = self.cell_size();
        let iy = ((q.y - self.y_range.0) / dy).floor();
        let iz = ((q.z - self.z_range.0) / dz).floor();
        if iy < 0.0 || iz < 0.0 || iy >= self.ny as f64 || iz >= self.nz as f64 {
            return None;
        }
        Some(iz as usize * self.ny + iy as usize)
    }

    pub fn cell_center(&self, index: usize) -> PlanarState {
        let (dy, dz) = self.cell_size();
        let iy = index % self.ny;
        let iz = index / self.ny;
        PlanarState::new(
            self.y_range.0 + (iy as f64 + 0.5) * dy,
            self.z_range.0 + (iz as f64 + 0.5) * dz,
        )
    }
}

/// Regime flags classifying the synthesis (relative position of the
/// invariant sets and the optimality status of the singular lines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisCase {
    /// `γ₋ = 0`: the collinear set degenerates to the origin.
    pub degenerate_collinear: bool,
    /// Sign of `γ₋` (0 in the degenerate case).
    pub gamma_minus_sign: i8,
    /// `Γ > γ₊`.
    pub drift_dominant: bool,
    /// `|Γ − γ₊| < 2`: constant-control arcs spiral (oscillatory switching).
    pub oscillatory: bool,
    /// The horizontal singular line exists, enters the unit disk, and carries
    /// a fast (hyperbolic) admissible sub-arc.
    pub horizontal_fast_admissible: bool,
    /// Compact human-readable tag assembled from the flags.
    pub tag: String,
}

impl SynthesisCase {
    pub fn classify(params: &DissipationParams) -> SynthesisCase {
        let degenerate_collinear = params.gamma_minus == 0.0;
        let gamma_minus_sign = if degenerate_collinear {
            0
        } else if params.gamma_minus > 0.0 {
            1
        } else {
            -1
        };
        let drift_dominant = params.gamma > params.gamma_plus;
        let oscillatory = (params.gamma - params.gamma_plus).abs() < 2.0;
        let horizontal_fast_admissible = match params.horizontal_singular_z() {
            Some(z0) if z0.abs() < 1.0 => {
                let y_edge = (1.0 - z0 * z0).sqrt();
                let y_lo = horizontal_saturation_y(params).unwrap_or(0.0);
                y_lo < y_edge && {
                    let y_mid = 0.5 * (y_lo.max(1e-3) + y_edge);
                    classify_singular(PlanarState::new(y_mid, z0), params)
                        .map(|c| c.kind == SingularKind::Hyperbolic)
                        .unwrap_or(false)
                }
            }
            _ => false,
        };
        let tag = format!(
            "{}/{}/{}/{}",
            if degenerate_collinear {
                "pointC"
            } else if gamma_minus_sign < 0 {
                "gm-neg"
            } else {
                "gm-pos"
            },
            if drift_dominant { "drift-dom" } else { "ctrl-dom" },
            if oscillatory { "spiral" } else { "node" },
            if horizontal_fast_admissible {
                "fast-hline"
            } else {
                "no-fast-hline"
            },
        );
        SynthesisCase {
            degenerate_collinear,
            gamma_minus_sign,
            drift_dominant,
            oscillatory,
            horizontal_fast_admissible,
            tag,
        }
    }
}

/// Per-cell outcome of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalCell {
    pub y: f64,
    pub z: f64,
    /// Earliest recorded arrival time (infinite when unreached).
    pub min_time: f64,
    /// Winning costate-direction index.
    pub dir_index: Option<usize>,
    /// Arc structure of the winner truncated at arrival (e.g. `"+-"`).
    pub arc_pattern: String,
    pub n_switches: usize,
    /// Earliest arrival from a distinct extremal family.
    pub second_time: f64,
    pub second_dir: Option<usize>,
    /// Arrival-time collision within the discretization error.
    pub cut: bool,
}

/// Output of [`synthesis_sample`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisMap {
    pub params: DissipationParams,
    pub q0: PlanarState,
    pub grid: SynthesisGrid,
    pub case: SynthesisCase,
    /// Row-major cells (`index = iz·ny + iy`).
    pub cells: Vec<ArrivalCell>,
    /// Switch events and singular-arc samples on optimal arcs, ordered by
    /// (direction index, time).
    pub switching_locus: Vec<(f64, f64)>,
    /// Centers of cut cells, in grid order.
    pub cut_locus: Vec<(f64, f64)>,
    /// Zero set of the singular invariant: the `y = 0` axis and, when
    /// defined, the horizontal line, as polylines.
    pub singular_locus: Vec<Vec<(f64, f64)>>,
    /// Zero set of the collinear invariant (ellipse through the origin, or
    /// the origin alone in the degenerate case).
    pub collinear_locus: Vec<(f64, f64)>,
    /// Declared arrival-time collision scale: twice the cell diagonal at
    /// unit speed (per-cell tests rescale by the local speed).
    pub collision_tol: f64,
    /// Costate directions whose extremal integration failed.
    pub failed_dirs: Vec<usize>,
}

/// Floor speed for time-resolution estimates near equilibria.
const V_FLOOR: f64 = 1e-3;
/// Velocity-direction separation (radians) above which two arrivals count as
/// distinct extremal families.
const VEL_SEP: f64 = 0.35;
/// Costate-direction separation treated as distinct regardless of the
/// arrival velocities.
const DIR_SEP: f64 = PI / 4.0;

struct Arrival {
    cell: u32,
    t: f64,
    speed: f64,
    vel_angle: f64,
}

struct DirSample {
    arrivals: Vec<Arrival>,
    /// (t_start, pattern char) per arc.
    pattern: Vec<(f64, char)>,
    switch_times: Vec<f64>,
    /// Transversal switch events (t, y, z).
    switch_points: Vec<(f64, f64, f64)>,
    /// Samples along singular arcs (t, y, z).
    singular_points: Vec<(f64, f64, f64)>,
}

fn circular_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Walk a trajectory with spatial resolution finer than half a cell,
/// recording first cell entries, and sample singular arcs.
fn sample_direction(
    traj: &PlanarTrajectory,
    grid: &SynthesisGrid,
) -> DirSample {
    let (dy, dz) = grid.cell_size();
    let step_len = 0.4 * dy.min(dz);
    let mut visited: HashSet<u32> = HashSet::new();
    let mut arrivals = Vec::new();
    let mut singular_points = Vec::new();
    for seg in &traj.segments {
        let singular = seg.control == ArcControl::Singular;
        let mut t = seg.t_start;
        while t < seg.t_end {
            let Some((q, _, u)) = traj.state_at(t) else {
                break;
            };
            // Velocity of the state part under the active control.
            let vy = -traj.params.gamma * q.y - u * q.z;
            let vz = traj.params.gamma_minus - traj.params.gamma_plus * q.z + u * q.y;
            let speed = vy.hypot(vz);
            if let Some(cell) = grid.cell_index(q) {
                let cell = cell as u32;
                if visited.insert(cell) {
                    arrivals.push(Arrival {
                        cell,
                        t,
                        speed,
                        vel_angle: vz.atan2(vy),
                    });
                }
            }
            if singular {
                singular_points.push((t, q.y, q.z));
            }
            let dt = (step_len / speed.max(V_FLOOR)).clamp(1e-5, 0.05);
            t += dt;
        }
    }
    DirSample {
        arrivals,
        pattern: traj
            .segments
            .iter()
            .map(|s| {
                let c = match s.control {
                    ArcControl::Bang(u) if u >= 0.0 => '+',
                    ArcControl::Bang(_) => '-',
                    ArcControl::Singular => 's',
                };
                (s.t_start, c)
            })
            .collect(),
        switch_times: traj
            .events
            .iter()
            .filter(|e| e.kind == PlanarEventKind::Switch)
            .map(|e| e.t)
            .collect(),
        switch_points: traj
            .events
            .iter()
            .filter(|e| e.kind == PlanarEventKind::Switch)
            .map(|e| (e.t, e.q.y, e.q.z))
            .collect(),
        singular_points,
    }
}

#[derive(Clone, Copy)]
struct Best {
    t: f64,
    dir: usize,
    speed: f64,
    vel_angle: f64,
    dir_angle: f64,
    t2: f64,
    dir2: Option<usize>,
    speed2: f64,
}

impl Default for Best {
    fn default() -> Self {
        Best {
            t: f64::INFINITY,
            dir: usize::MAX,
            speed: 0.0,
            vel_angle: 0.0,
            dir_angle: 0.0,
            t2: f64::INFINITY,
            dir2: None,
            speed2: 0.0,
        }
    }
}

fn distinct(
    vel_a: f64,
    dir_a: f64,
    vel_b: f64,
    dir_b: f64,
) -> bool {
    circular_dist(vel_a, vel_b) >= VEL_SEP || circular_dist(dir_a, dir_b) >= DIR_SEP
}

/// Sweep extremals from `q0` over a fan of costate directions and assemble
/// the arrival-time map, the cut and switching loci, and the invariant-set
/// polylines.
pub fn synthesis_sample(
    q0: PlanarState,
    params: &DissipationParams,
    grid: &SynthesisGrid,
) -> Result<SynthesisMap, PlanarError> {
    let (dy, dz) = grid.cell_size();
    let diag = dy.hypot(dz);
    let collision_tol = 2.0 * diag;
    if grid.ny < 8
        || grid.nz < 8
        || grid.n_dirs < 16
        || !(grid.horizon > 0.0)
        || collision_tol > 0.1 * grid.horizon
    {
        return Err(PlanarError::GridTooCoarse {
            time_resolution: collision_tol,
            horizon: grid.horizon,
        });
    }

    // Integrate the fan in parallel; index order is restored by collect.
    let results: Vec<Result<DirSample, PlanarError>> = (0..grid.n_dirs)
        .into_par_iter()
        .map(|i| {
            let theta = 2.0 * PI * i as f64 / grid.n_dirs as f64;
            let p0 = PlanarCostate::new(theta.cos(), theta.sin());
            extremal_2d(q0, p0, params, grid.horizon).map(|traj| sample_direction(&traj, grid))
        })
        .collect();

    let mut failed_dirs = Vec::new();
    let mut dir_samples: Vec<Option<DirSample>> = Vec::with_capacity(grid.n_dirs);
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(ds) => dir_samples.push(Some(ds)),
            Err(_) => {
                failed_dirs.push(i);
                dir_samples.push(None);
            }
        }
    }

    // Merge arrivals per cell, keeping the winner and the best distinct
    // competitor (sequential over direction index: deterministic).
    let ncells = grid.ny * grid.nz;
    let mut best = vec![Best::default(); ncells];
    for (d, ds) in dir_samples.iter().enumerate() {
        let Some(ds) = ds else { continue };
        let dir_angle = 2.0 * PI * d as f64 / grid.n_dirs as f64;
        for a in &ds.arrivals {
            let b = &mut best[a.cell as usize];
            if a.t < b.t {
                if b.t.is_finite() && distinct(a.vel_angle, dir_angle, b.vel_angle, b.dir_angle) {
                    b.t2 = b.t;
                    b.dir2 = Some(b.dir);
                    b.speed2 = b.speed;
                }
                b.t = a.t;
                b.dir = d;
                b.speed = a.speed;
                b.vel_angle = a.vel_angle;
                b.dir_angle = dir_angle;
            } else if a.t < b.t2 && distinct(a.vel_angle, dir_angle, b.vel_angle, b.dir_angle) {
                b.t2 = a.t;
                b.dir2 = Some(d);
                b.speed2 = a.speed;
            }
        }
    }

    let pattern_at = |ds: &DirSample, t: f64| -> (String, usize) {
        let pat: String = ds
            .pattern
            .iter()
            .take_while(|(ts, _)| *ts <= t)
            .map(|(_, c)| *c)
            .collect();
        let ns = ds.switch_times.iter().filter(|s| **s <= t).count();
        (pat, ns)
    };

    let mut cells = Vec::with_capacity(ncells);
    let mut cut_locus = Vec::new();
    for (idx, b) in best.iter().enumerate() {
        let c = grid.cell_center(idx);
        let mut cell = ArrivalCell {
            y: c.y,
            z: c.z,
            min_time: b.t,
            dir_index: None,
            arc_pattern: String::new(),
            n_switches: 0,
            second_time: b.t2,
            second_dir: b.dir2,
            cut: false,
        };
        if b.t.is_finite() {
            cell.dir_index = Some(b.dir);
            if let Some(ds) = dir_samples[b.dir].as_ref() {
                let (pat, ns) = pattern_at(ds, b.t);
                cell.arc_pattern = pat;
                cell.n_switches = ns;
            }
            if let Some(_) = b.dir2 {
                let tol = 2.0 * (diag / b.speed.max(V_FLOOR)).max(diag / b.speed2.max(V_FLOOR));
                if b.t2 - b.t <= tol {
                    cell.cut = true;
                    cut_locus.push((c.y, c.z));
                }
            }
        }
        cells.push(cell);
    }

    // Switching locus: events and singular samples on portions of winning
    // extremals that are still optimal (the owning cell is won by the same
    // direction at essentially the event time).
    let optimal_at = |d: usize, t: f64, y: f64, z: f64| -> bool {
        let Some(idx) = grid.cell_index(PlanarState::new(y, z)) else {
            return false;
        };
        let b = &best[idx];
        b.t.is_finite() && b.dir == d && (t - b.t).abs() <= 2.0 * diag / b.speed.max(V_FLOOR)
    };
    let mut switching_locus = Vec::new();
    for (d, ds) in dir_samples.iter().enumerate() {
        let Some(ds) = ds else { continue };
        for &(t, y, z) in ds.switch_points.iter().chain(&ds.singular_points) {
            if optimal_at(d, t, y, z) {
                switching_locus.push((y, z));
            }
        }
    }

    // Invariant-set polylines.
    let mut singular_locus = Vec::new();
    {
        let n = 200;
        let axis: Vec<(f64, f64)> = (0..=n)
            .map(|k| {
                (
                    0.0,
                    grid.z_range.0 + (grid.z_range.1 - grid.z_range.0) * k as f64 / n as f64,
                )
            })
            .collect();
        singular_locus.push(axis);
        if let Some(z0) = params.horizontal_singular_z() {
            if z0 > grid.z_range.0 && z0 < grid.z_range.1 {
                let line: Vec<(f64, f64)> = (0..=n)
                    .map(|k| {
                        (
                            grid.y_range.0
                                + (grid.y_range.1 - grid.y_range.0) * k as f64 / n as f64,
                            z0,
                        )
                    })
                    .collect();
                singular_locus.push(line);
            }
        }
    }
    let collinear_locus: Vec<(f64, f64)> = if params.gamma_minus == 0.0 {
        vec![(0.0, 0.0)]
    } else {
        // γ₊(z − c)² + Γy² = γ₊c², c = γ₋/(2γ₊): ellipse through the origin.
        let c = params.gamma_minus / (2.0 * params.gamma_plus);
        let ry = c.abs() * (params.gamma_plus / params.gamma).sqrt();
        let n = 256;
        (0..=n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                (ry * a.sin(), c + c.abs() * a.cos())
            })
            .collect()
    };

    Ok(SynthesisMap {
        params: *params,
        q0,
        grid: *grid,
        case: SynthesisCase::classify(params),
        cells,
        switching_locus,
        cut_locus,
        singular_locus,
        collinear_locus,
        collision_tol,
        failed_dirs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{Dopri5, OdeOptions};
    use crate::planar::invariants::collinear_set_eval;
    use approx::assert_abs_diff_eq;

    fn params_d() -> DissipationParams {
        DissipationParams::new(1.0, 0.5, -0.1).unwrap()
    }

    fn small_grid() -> SynthesisGrid {
        SynthesisGrid {
            n_dirs: 256,
            y_range: (-1.02, 1.02),
            z_range: (-1.02, 1.02),
            ny: 103,
            nz: 103,
            horizon: 3.0,
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let g = SynthesisGrid {
            ny: 4,
            ..small_grid()
        };
        match synthesis_sample(PlanarState::new(0.0, 1.0), &params_d(), &g) {
            Err(PlanarError::GridTooCoarse { .. }) => {}
            other => panic!("expected GridTooCoarse, got {other:?}"),
        }
    }

    #[test]
    fn case_classification_flags() {
        let c = SynthesisCase::classify(&params_d());
        assert!(!c.degenerate_collinear);
        assert_eq!(c.gamma_minus_sign, -1);
        assert!(c.drift_dominant);
        assert!(c.oscillatory);
        assert!(c.horizontal_fast_admissible);
        assert_eq!(c.tag, "gm-neg/drift-dom/spiral/fast-hline");

        let c0 = SynthesisCase::classify(&DissipationParams::new(1.1, 1.6, 0.0).unwrap());
        assert!(c0.degenerate_collinear);
        assert_eq!(c0.gamma_minus_sign, 0);
        assert!(!c0.drift_dominant);
        // γ₊ > Γ: the horizontal line is slow (elliptic) — not a fast line.
        assert!(!c0.horizontal_fast_admissible);
    }

    #[test]
    fn z_axis_cut_locus_born_at_north_pole() {
        // Drift-dominant regime with γ₋ < 0: the cut locus contains a
        // vertical segment of the z-axis whose top end is the start point.
        let g = small_grid();
        let map = synthesis_sample(PlanarState::new(0.0, 1.0), &params_d(), &g).unwrap();
        assert!(map.failed_dirs.is_empty(), "failed: {:?}", map.failed_dirs);
        let (dy, dz) = g.cell_size();
        let axis: Vec<&(f64, f64)> = map
            .cut_locus
            .iter()
            .filter(|(y, _)| y.abs() <= dy)
            .collect();
        assert!(
            axis.len() >= 5,
            "expected an axis cut segment, found {} axis cells of {} cut cells",
            axis.len(),
            map.cut_locus.len()
        );
        let z_top = axis.iter().map(|(_, z)| *z).fold(f64::MIN, f64::max);
        let z_bot = axis.iter().map(|(_, z)| *z).fold(f64::MAX, f64::min);
        assert!(z_top >= 1.0 - 6.0 * dz, "cut born at z={z_top}, not at 1");
        assert!(z_top - z_bot >= 0.05, "axis cut too short: {}", z_top - z_bot);
    }

    #[test]
    fn map_is_mirror_symmetric_in_y() {
        // y → −y with u → −u maps the extremal fan onto itself (even n_dirs),
        // so min_time must be mirror-symmetric on a symmetric grid.  The
        // mirrored costates differ by the rounding of cos(π−θ) vs −cos(θ),
        // so agreement is to solver accuracy rather than bitwise.
        let g = SynthesisGrid {
            n_dirs: 128,
            ny: 61,
            nz: 61,
            horizon: 2.0,
            ..small_grid()
        };
        let map = synthesis_sample(PlanarState::new(0.0, 1.0), &params_d(), &g).unwrap();
        for iz in 0..g.nz {
            for iy in 0..g.ny {
                let a = &map.cells[iz * g.ny + iy];
                let b = &map.cells[iz * g.ny + (g.ny - 1 - iy)];
                match (a.min_time.is_finite(), b.min_time.is_finite()) {
                    (false, false) => {}
                    (true, true) => {
                        assert!(
                            (a.min_time - b.min_time).abs() <= 1e-9,
                            "asymmetry at cell ({iy},{iz}): {} vs {}",
                            a.min_time,
                            b.min_time
                        );
                        // Winner families can legitimately swap on cut cells.
                        if !a.cut && !b.cut {
                            assert_eq!(a.n_switches, b.n_switches);
                        }
                    }
                    _ => panic!("reachability asymmetry at cell ({iy},{iz})"),
                }
            }
        }
    }

    #[test]
    fn bang_arcs_touch_on_collinear_set() {
        // The two constant-control arcs from (0,1) meet again tangentially;
        // tangency forces F+G ∥ F−G there, i.e. the touch point lies on the
        // collinear set.  This pinch is what closes the accessibility
        // boundary into its fish shape.
        let p = params_d();
        let arc = |u: f64| {
            let rhs = move |_t: f64, w: &[f64; 2]| {
                [
                    -p.gamma * w[0] - u * w[1],
                    p.gamma_minus - p.gamma_plus * w[1] + u * w[0],
                ]
            };
            let mut s = Dopri5::new(rhs, 0.0, [0.0, 1.0], 12.0, OdeOptions::default()).unwrap();
            s.run_to(12.0).unwrap()
        };
        let plus = arc(1.0);
        let minus = arc(-1.0);
        // Portable dense polylines.
        let sample = |steps: &Vec<crate::ode::DenseStep<2>>| -> Vec<[f64; 2]> {
            let mut pts = Vec::new();
            for st in steps {
                let n = 20;
                for k in 0..n {
                    pts.push(st.eval(st.t0 + st.h * k as f64 / n as f64));
                }
            }
            pts
        };
        let pp = sample(&plus);
        let pm = sample(&minus);
        // Closest approach excluding the shared start.
        let mut dmin = f64::INFINITY;
        let mut at = [0.0, 0.0];
        for (i, a) in pp.iter().enumerate() {
            for (j, b) in pm.iter().enumerate() {
                if i + j < 40 {
                    continue;
                }
                let d = (a[0] - b[0]).hypot(a[1] - b[1]);
                if d < dmin {
                    dmin = d;
                    at = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                }
            }
        }
        assert!(dmin < 2e-3, "arcs never touch: min distance {dmin}");
        let c = collinear_set_eval(PlanarState::new(at[0], at[1]), &p);
        assert_abs_diff_eq!(c, 0.0, epsilon = 5e-3);
    }
}

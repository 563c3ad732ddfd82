//! Adaptive Dormand–Prince 5(4) integration with dense output.
//!
//! Every flow in the crate — bang arcs, extremal flows, variational systems —
//! runs through this stepper.  Event handling (switchings, Σ-crossings, pole
//! guards) is done by the callers: each accepted step exposes a quartic
//! interpolant ([`DenseStep`]) on which sign changes are bracketed and refined
//! by bisection, so no special-casing lives here.

use std::fmt;

/// Integrator options; defaults match the crate-wide tolerances.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated from the first derivative when absent.
    pub h_init: Option<f64>,
    /// Hard cap on the step size.
    pub h_max: Option<f64>,
    /// Abort threshold on the number of accepted steps.
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: crate::tol::RTOL,
            atol: crate::tol::ATOL,
            h_init: None,
            h_max: None,
            max_steps: 50_000_000,
        }
    }
}

/// Integration failure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeError {
    /// The controller drove the step below machine resolution, which happens
    /// when the right-hand side blows up (chart singularities, stiff poles).
    StepSizeUnderflow { t: f64 },
    /// The accepted-step budget ran out before the requested time.
    MaxStepsExceeded { t: f64 },
    /// The right-hand side returned NaN/∞ at the current state itself.
    NonFiniteRhs { t: f64 },
}

impl fmt::Display for OdeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OdeError::StepSizeUnderflow { t } => write!(f, "step size underflow at t = {t}"),
            OdeError::MaxStepsExceeded { t } => write!(f, "step budget exhausted at t = {t}"),
            OdeError::NonFiniteRhs { t } => write!(f, "non-finite right-hand side at t = {t}"),
        }
    }
}

impl std::error::Error for OdeError {}

/// One accepted step with its continuous extension.
///
/// The interpolant is the standard fourth-order continuous extension of the
/// Dormand–Prince pair, evaluated in Horner form over `σ = (t − t0)/h`.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Interpolated state at `t ∈ [t0, t1]` (extrapolates mildly outside).
    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let mut y = [0.0; N];
        for i in 0..N {
            let c = &self.cont;
            y[i] = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
        y
    }

    /// End state of the step (exact, not interpolated).
    pub fn y1(&self) -> [f64; N] {
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = self.cont[0][i] + self.cont[1][i];
        }
        y
    }
}

// Dormand–Prince coefficients.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// The stepper.  Owns the current `(t, y)` and the FSAL derivative; callers
/// advance it one accepted step at a time and inspect the returned
/// [`DenseStep`] for events.
pub struct Dopri5<const N: usize, F: FnMut(f64, &[f64; N]) -> [f64; N]> {
    f: F,
    pub t: f64,
    pub y: [f64; N],
    k1: [f64; N],
    h: f64,
    opts: OdeOptions,
    /// Accepted steps so far.
    pub n_steps: usize,
    /// Integration direction, `+1.0` or `-1.0`.
    dir: f64,
}

fn finite<const N: usize>(v: &[f64; N]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl<const N: usize, F: FnMut(f64, &[f64; N]) -> [f64; N]> Dopri5<N, F> {
    /// Starts at `(t0, y0)` integrating towards `t_end` (sets the direction).
    pub fn new(mut f: F, t0: f64, y0: [f64; N], t_end: f64, opts: OdeOptions) -> Result<Self, OdeError> {
        let k1 = f(t0, &y0);
        if !finite(&k1) {
            return Err(OdeError::NonFiniteRhs { t: t0 });
        }
        let dir = if t_end >= t0 { 1.0 } else { -1.0 };
        let h = opts.h_init.unwrap_or_else(|| {
            // Crude first step from the derivative scale, clipped to the span.
            let d0: f64 = k1.iter().map(|v| v * v).sum::<f64>().sqrt();
            let y0n: f64 = y0.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = (1.0 + y0n) / (1.0 + d0);
            (0.01 * scale).min((t_end - t0).abs().max(1e-12))
        });
        let h = h.abs().max(1e-12) * dir;
        Ok(Dopri5 { f, t: t0, y: y0, k1, h, opts, n_steps: 0, dir })
    }

    /// Current proposed step size (signed).
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn set_h(&mut self, h: f64) {
        self.h = h.abs().max(1e-14) * self.dir;
    }

    /// Re-anchors the stepper (after an event restarts the flow with modified
    /// state, e.g. a control flip); re-evaluates the derivative.
    pub fn set_state(&mut self, t: f64, y: [f64; N]) -> Result<(), OdeError> {
        let k1 = (self.f)(t, &y);
        if !finite(&k1) {
            return Err(OdeError::NonFiniteRhs { t });
        }
        self.t = t;
        self.y = y;
        self.k1 = k1;
        Ok(())
    }

    /// Derivative at the current state (FSAL value, no extra evaluation).
    pub fn current_derivative(&self) -> [f64; N] {
        self.k1
    }

    /// Advances one accepted step, not stepping past `t_limit`; returns the
    /// dense record.  The controller halves rejected or non-finite steps.
    pub fn step(&mut self, t_limit: f64) -> Result<DenseStep<N>, OdeError> {
        if self.n_steps >= self.opts.max_steps {
            return Err(OdeError::MaxStepsExceeded { t: self.t });
        }
        let mut h = self.h;
        if let Some(hm) = self.opts.h_max {
            if h.abs() > hm {
                h = hm * self.dir;
            }
        }
        // Clip to the limit.
        if (self.t + h - t_limit) * self.dir > 0.0 {
            h = t_limit - self.t;
        }
        if h.abs() < 1e-14 * self.t.abs().max(1.0) {
            return Err(OdeError::StepSizeUnderflow { t: self.t });
        }

        let mut k = [[0.0; N]; 7];
        k[0] = self.k1;
        loop {
            let mut ok = true;
            for stage in 1..7 {
                let mut ys = self.y;
                for (j, kj) in k.iter().enumerate().take(stage) {
                    let a = A[stage][j];
                    if a != 0.0 {
                        for i in 0..N {
                            ys[i] += h * a * kj[i];
                        }
                    }
                }
                k[stage] = (self.f)(self.t + C[stage] * h, &ys);
                if !finite(&k[stage]) {
                    ok = false;
                    break;
                }
            }

            let mut err_sq = 0.0;
            let mut y1 = [0.0; N];
            if ok {
                // Row 7 of A is the 5th-order weight vector b (FSAL pair:
                // k7 gets weight 0, so only the first six stages enter).
                for i in 0..N {
                    y1[i] = self.y[i];
                    for (j, kj) in k.iter().enumerate().take(6) {
                        if A[6][j] != 0.0 {
                            y1[i] += h * A[6][j] * kj[i];
                        }
                    }
                }
                if !finite(&y1) {
                    ok = false;
                }
                if ok {
                    for i in 0..N {
                        let mut e = 0.0;
                        for (j, kj) in k.iter().enumerate() {
                            if E[j] != 0.0 {
                                e += E[j] * kj[i];
                            }
                        }
                        e *= h;
                        let sc = self.opts.atol + self.opts.rtol * self.y[i].abs().max(y1[i].abs());
                        err_sq += (e / sc) * (e / sc);
                    }
                }
            }
            let err = if ok { (err_sq / N as f64).sqrt() } else { f64::INFINITY };

            if err <= 1.0 {
                // Accept: build the continuous extension.
                let mut cont = [[0.0; N]; 5];
                for i in 0..N {
                    let dy = y1[i] - self.y[i];
                    let bspl = h * k[0][i] - dy;
                    cont[0][i] = self.y[i];
                    cont[1][i] = dy;
                    cont[2][i] = bspl;
                    cont[3][i] = dy - h * k[6][i] - bspl;
                    let mut d = 0.0;
                    for (j, kj) in k.iter().enumerate() {
                        if D[j] != 0.0 {
                            d += D[j] * kj[i];
                        }
                    }
                    cont[4][i] = h * d;
                }
                let rec = DenseStep { t0: self.t, h, cont };
                self.t += h;
                self.y = y1;
                self.k1 = k[6]; // FSAL
                self.n_steps += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                self.h = h * fac;
                return Ok(rec);
            }

            // Reject.
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.5 };
            h *= fac;
            if h.abs() < 1e-14 * self.t.abs().max(1.0) {
                return Err(OdeError::StepSizeUnderflow { t: self.t });
            }
        }
    }

    /// Integrates to `t_end`, collecting every dense step.
    pub fn run_to(&mut self, t_end: f64) -> Result<Vec<DenseStep<N>>, OdeError> {
        let mut steps = Vec::new();
        while (t_end - self.t) * self.dir > 1e-14 * self.t.abs().max(1.0) {
            steps.push(self.step(t_end)?);
        }
        Ok(steps)
    }
}

/// Refines a bracketed sign change of `g(t, y(t))` on a dense step down to
/// `tol` in time by bisection; `(a, b)` must satisfy `g(a)·g(b) ≤ 0`.
pub fn bisect_zero<const N: usize>(
    seg: &DenseStep<N>,
    mut g: impl FnMut(f64, &[f64; N]) -> f64,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> f64 {
    let mut ga = g(a, &seg.eval(a));
    if ga == 0.0 {
        return a;
    }
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        let gm = g(m, &seg.eval(m));
        if gm == 0.0 {
            return m;
        }
        if (ga > 0.0) == (gm > 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_decay() {
        let mut solver =
            Dopri5::new(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 5.0, OdeOptions::default()).unwrap();
        let steps = solver.run_to(5.0).unwrap();
        // The controller bounds the *local* error by rtol; the global error
        // accumulates one local contribution per step.
        assert_relative_eq!(solver.y[0], (-5.0f64).exp(), epsilon = 1e-8);
        // Dense output accuracy at interior points.
        for seg in steps.iter().step_by(3) {
            let tm = seg.t0 + 0.37 * seg.h;
            let y = seg.eval(tm);
            assert_relative_eq!(y[0], (-tm).exp(), epsilon = 1e-9);
        }
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let mut solver = Dopri5::new(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            40.0,
            OdeOptions::default(),
        )
        .unwrap();
        solver.run_to(40.0).unwrap();
        let e = solver.y[0] * solver.y[0] + solver.y[1] * solver.y[1];
        assert_relative_eq!(e, 1.0, epsilon = 1e-7);
        assert_relative_eq!(solver.y[0], (40.0f64).cos(), epsilon = 1e-6);
    }

    #[test]
    fn event_localization_on_dense_output() {
        // Zeros of y(t) = cos(t) at π/2 + kπ, found by bisection on steps.
        let mut solver = Dopri5::new(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            10.0,
            OdeOptions::default(),
        )
        .unwrap();
        let steps = solver.run_to(10.0).unwrap();
        let mut zeros = Vec::new();
        let mut prev_sign = 1.0f64;
        let mut prev_t = 0.0f64;
        for seg in &steps {
            // Scan the segment at its endpoints only; the integrator takes
            // many steps per period so endpoint sign changes suffice here.
            let y1 = seg.y1();
            let s1 = y1[0].signum();
            if s1 != prev_sign {
                let z = bisect_zero(seg, |_, y| y[0], prev_t.max(seg.t0), seg.t1(), 1e-12);
                zeros.push(z);
                prev_sign = s1;
            }
            prev_t = seg.t1();
        }
        let expected = [
            std::f64::consts::FRAC_PI_2,
            3.0 * std::f64::consts::FRAC_PI_2,
            5.0 * std::f64::consts::FRAC_PI_2,
        ];
        assert!(zeros.len() >= 3);
        for (z, e) in zeros.iter().zip(expected.iter()) {
            assert_relative_eq!(z, e, epsilon = 1e-9);
        }
    }

    #[test]
    fn backward_integration() {
        let mut solver =
            Dopri5::new(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], -2.0, OdeOptions::default()).unwrap();
        solver.run_to(-2.0).unwrap();
        assert_relative_eq!(solver.y[0], (2.0f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn step_limit_is_enforced() {
        let opts = OdeOptions { max_steps: 10, ..OdeOptions::default() };
        let mut solver = Dopri5::new(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 100.0, opts).unwrap();
        match solver.run_to(100.0) {
            Err(OdeError::MaxStepsExceeded { .. }) => {}
            other => panic!("expected MaxStepsExceeded, got {other:?}"),
        }
    }

    #[test]
    fn singular_rhs_underflows_cleanly() {
        // ẏ = 1/(1 − t) blows up at t = 1.
        let mut solver = Dopri5::new(
            |t, _: &[f64; 1]| [1.0 / (1.0 - t)],
            0.0,
            [0.0],
            2.0,
            OdeOptions::default(),
        )
        .unwrap();
        match solver.run_to(2.0) {
            Err(OdeError::StepSizeUnderflow { t }) => assert!((t - 1.0).abs() < 1e-3),
            other => panic!("expected StepSizeUnderflow, got {other:?}"),
        }
    }
}

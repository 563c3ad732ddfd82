//! Affine vector fields on the plane and their Lie algebra.
//!
//! Every field in play is affine, `X(q) = A q + a`, so the whole calculus
//! closes on pairs `(A, a)` — the semi-direct product `gl(2) ⋉ ℝ²`.  With the
//! convention `[X, Y] = DX·Y − DY·X` the bracket of `X = (A, a)` and
//! `Y = (B, b)` is again affine:
//!
//! ```text
//! [X, Y] = (AB − BA, A b − B a)
//! ```

use crate::params::DissipationParams;
use crate::planar::PlanarState;

/// Affine vector field `q ↦ mat·q + vec` on the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedElement {
    /// Linear part, row-major: `mat[i][j]` multiplies component `j`.
    pub mat: [[f64; 2]; 2],
    /// Translation part.
    pub vec: [f64; 2],
}

impl LiftedElement {
    pub fn new(mat: [[f64; 2]; 2], vec: [f64; 2]) -> Self {
        LiftedElement { mat, vec }
    }

    /// Value of the field at `q`.
    pub fn eval(&self, q: PlanarState) -> [f64; 2] {
        [
            self.mat[0][0] * q.y + self.mat[0][1] * q.z + self.vec[0],
            self.mat[1][0] * q.y + self.mat[1][1] * q.z + self.vec[1],
        ]
    }

    /// `self + c · other`, the affine combination used to form `F + uG`.
    pub fn add_scaled(&self, c: f64, other: &LiftedElement) -> LiftedElement {
        let mut mat = [[0.0; 2]; 2];
        let mut vec = [0.0; 2];
        for i in 0..2 {
            for j in 0..2 {
                mat[i][j] = self.mat[i][j] + c * other.mat[i][j];
            }
            vec[i] = self.vec[i] + c * other.vec[i];
        }
        LiftedElement { mat, vec }
    }
}

/// Drift `F(q) = (−Γ y, γ₋ − γ₊ z)` as an affine element.
pub fn drift_element(params: &DissipationParams) -> LiftedElement {
    LiftedElement::new(
        [[-params.gamma, 0.0], [0.0, -params.gamma_plus]],
        [0.0, params.gamma_minus],
    )
}

/// Control rotation `G(q) = (−z, y)`.
pub fn control_element() -> LiftedElement {
    LiftedElement::new([[0.0, -1.0], [1.0, 0.0]], [0.0, 0.0])
}

/// Lie bracket `[X, Y] = (AB − BA, A b − B a)` of two affine fields.
pub fn lie_bracket(x: &LiftedElement, y: &LiftedElement) -> LiftedElement {
    let (a, av) = (&x.mat, &x.vec);
    let (b, bv) = (&y.mat, &y.vec);
    let mut mat = [[0.0; 2]; 2];
    let mut vec = [0.0; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut ab = 0.0;
            let mut ba = 0.0;
            for k in 0..2 {
                ab += a[i][k] * b[k][j];
                ba += b[i][k] * a[k][j];
            }
            mat[i][j] = ab - ba;
        }
        vec[i] = a[i][0] * bv[0] + a[i][1] * bv[1] - (b[i][0] * av[0] + b[i][1] * av[1]);
    }
    LiftedElement { mat, vec }
}

/// Values of the drift and control fields at `q`, in that order.
#[allow(non_snake_case)]
pub fn fields_FG(q: PlanarState, params: &DissipationParams) -> ([f64; 2], [f64; 2]) {
    (
        [
            -params.gamma * q.y,
            params.gamma_minus - params.gamma_plus * q.z,
        ],
        [-q.z, q.y],
    )
}

/// The bracket tower used by switching and singular-arc logic, built once per
/// parameter set.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Brackets {
    pub f: LiftedElement,
    pub g: LiftedElement,
    /// `[G, F]`
    pub gf: LiftedElement,
    /// `[[G, F], G]`
    pub gfg: LiftedElement,
    /// `[[G, F], F]`
    pub gff: LiftedElement,
}

impl Brackets {
    pub fn new(params: &DissipationParams) -> Self {
        let f = drift_element(params);
        let g = control_element();
        let gf = lie_bracket(&g, &f);
        let gfg = lie_bracket(&gf, &g);
        let gff = lie_bracket(&gf, &f);
        Brackets { f, g, gf, gfg, gff }
    }
}

//! Small fixed-size linear algebra used by the rank tests and Newton solves.

/// 2×2 determinant of column vectors.
pub(crate) fn det2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// 3×3 determinant of column vectors.
pub(crate) fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - b[0] * (a[1] * c[2] - a[2] * c[1])
        + c[0] * (a[1] * b[2] - a[2] * b[1])
}

/// Solves `A·x = b` by Gaussian elimination with partial pivoting; `None` on
/// (numerical) singularity.
pub(crate) fn solve<const M: usize>(mut a: [[f64; M]; M], mut b: [f64; M]) -> Option<[f64; M]> {
    for col in 0..M {
        let mut piv = col;
        for r in col + 1..M {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..M {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..M {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = [0.0; M];
    for col in (0..M).rev() {
        let mut s = b[col];
        for c in col + 1..M {
            s -= a[col][c] * x[c];
        }
        x[col] = s / a[col][col];
        if !x[col].is_finite() {
            return None;
        }
    }
    Some(x)
}

/// Completes a nonzero 3-vector `v` to an orthonormal pair spanning `v⊥`.
pub(crate) fn orthonormal_complement(v: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let w = [v[0] / n, v[1] / n, v[2] / n];
    // Pick the coordinate axis least aligned with v.
    let axis = if w[0].abs() <= w[1].abs() && w[0].abs() <= w[2].abs() {
        [1.0, 0.0, 0.0]
    } else if w[1].abs() <= w[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let mut e1 = [
        w[1] * axis[2] - w[2] * axis[1],
        w[2] * axis[0] - w[0] * axis[2],
        w[0] * axis[1] - w[1] * axis[0],
    ];
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    for x in &mut e1 {
        *x /= n1;
    }
    let e2 = [
        w[1] * e1[2] - w[2] * e1[1],
        w[2] * e1[0] - w[0] * e1[2],
        w[0] * e1[1] - w[1] * e1[0],
    ];
    (e1, e2)
}

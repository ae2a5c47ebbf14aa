//! Dense elimination for the small square systems that show up in the
//! Jacobian inverses (at most M×M for the Gram matrix, 3×3 for damping).

use nalgebra::DMatrix;

/// Determinant by elimination with partial pivoting. `a` must be square.
pub fn determinant(a: &DMatrix<f64>) -> f64 {
    assert!(a.is_square(), "determinant of a non-square matrix");
    let mut m = a.clone();
    let n = m.nrows();
    let mut det = 1.0;
    for col in 0..n {
        let pivot_row = pivot(&m, col);
        let p = m[(pivot_row, col)];
        if p == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            m.swap_rows(pivot_row, col);
            det = -det;
        }
        det *= p;
        for row in col + 1..n {
            let factor = m[(row, col)] / p;
            if factor != 0.0 {
                for k in col..n {
                    let v = m[(col, k)];
                    m[(row, k)] -= factor * v;
                }
            }
        }
    }
    det
}

/// Solves `a · x = b` by Gauss–Jordan elimination with partial pivoting.
/// Returns `None` when a pivot is exactly zero.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    assert!(a.is_square(), "solve with a non-square system matrix");
    assert_eq!(
        a.nrows(),
        b.nrows(),
        "right-hand side has the wrong row count"
    );
    let n = a.nrows();
    let mut m = a.clone();
    let mut x = b.clone();

    for col in 0..n {
        let pivot_row = pivot(&m, col);
        if m[(pivot_row, col)] == 0.0 {
            return None;
        }
        if pivot_row != col {
            m.swap_rows(pivot_row, col);
            x.swap_rows(pivot_row, col);
        }
        let p = m[(col, col)];
        for row in col + 1..n {
            let factor = m[(row, col)] / p;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                let v = m[(col, k)];
                m[(row, k)] -= factor * v;
            }
            for k in 0..x.ncols() {
                let v = x[(col, k)];
                x[(row, k)] -= factor * v;
            }
        }
    }

    // back substitution
    for col in (0..n).rev() {
        let p = m[(col, col)];
        for k in 0..x.ncols() {
            let mut acc = x[(col, k)];
            for j in col + 1..n {
                acc -= m[(col, j)] * x[(j, k)];
            }
            x[(col, k)] = acc / p;
        }
    }
    Some(x)
}

fn pivot(m: &DMatrix<f64>, col: usize) -> usize {
    let mut best = col;
    let mut best_abs = m[(col, col)].abs();
    for row in col + 1..m.nrows() {
        let v = m[(row, col)].abs();
        if v > best_abs {
            best = row;
            best_abs = v;
        }
    }
    best
}

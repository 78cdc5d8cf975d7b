//! Complex LU with partial pivoting: solve, inverse, determinant.

use super::{CMatrix, LinalgError};
use num_complex::Complex64;

struct LuFactors {
    lu: CMatrix,
    pivots: Vec<usize>,
    sign_flips: usize,
}

fn factorize(a: &CMatrix) -> Result<LuFactors, LinalgError> {
    assert!(a.is_square(), "LU needs a square matrix");
    let n = a.n_rows();
    let mut lu = a.clone();
    let mut pivots = vec![0usize; n];
    let mut sign_flips = 0usize;
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].norm();
        for i in (k + 1)..n {
            let v = lu[(i, k)].norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return Err(LinalgError::PivotBreakdown { index: k });
        }
        pivots[k] = p;
        if p != k {
            sign_flips += 1;
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
        }
        let inv_pivot = 1.0 / lu[(k, k)];
        for i in (k + 1)..n {
            let factor = lu[(i, k)] * inv_pivot;
            lu[(i, k)] = factor;
            for j in (k + 1)..n {
                let adj = factor * lu[(k, j)];
                lu[(i, j)] -= adj;
            }
        }
    }
    Ok(LuFactors {
        lu,
        pivots,
        sign_flips,
    })
}

/// Solve A x = b for one right-hand side.
pub fn lu_solve(a: &CMatrix, b: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
    let n = a.n_rows();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "rhs length {} vs matrix size {}",
            b.len(),
            n
        )));
    }
    let f = factorize(a)?;
    let mut x = b.to_vec();
    // Full-row swaps during factorization mean P A = L U, so the entire
    // permutation applies to the right-hand side before substitution.
    for k in 0..n {
        x.swap(k, f.pivots[k]);
    }
    for k in 0..n {
        let xk = x[k];
        for i in (k + 1)..n {
            let adj = f.lu[(i, k)] * xk;
            x[i] -= adj;
        }
    }
    for k in (0..n).rev() {
        for j in (k + 1)..n {
            let adj = f.lu[(k, j)] * x[j];
            x[k] -= adj;
        }
        x[k] /= f.lu[(k, k)];
    }
    Ok(x)
}

/// Matrix inverse by column solves.
pub fn lu_inverse(a: &CMatrix) -> Result<CMatrix, LinalgError> {
    let n = a.n_rows();
    let mut out = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[j] = Complex64::new(1.0, 0.0);
        let col = lu_solve(a, &e)?;
        for i in 0..n {
            out[(i, j)] = col[i];
        }
    }
    Ok(out)
}

/// Determinant from the pivot product.
pub fn lu_det(a: &CMatrix) -> Complex64 {
    match factorize(a) {
        Err(_) => Complex64::new(0.0, 0.0),
        Ok(f) => {
            let mut det = Complex64::new(if f.sign_flips % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
            for k in 0..a.n_rows() {
                det *= f.lu[(k, k)];
            }
            det
        }
    }
}

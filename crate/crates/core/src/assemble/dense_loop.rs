//! Dense double-Fourier assembly of delta_t for matrix loops. The basis is
//! e^{i m theta} tensor C^n (E+ sector, domain of D) followed by
//! e^{i m theta} tensor C^rows (E- sector), m = -M..M in ascending order.

use super::AssembleError;
use crate::families::{FamilySpec, MatrixLoop, StabilizedFamily};
use crate::linalg::CMatrix;
use num_complex::Complex64;

pub fn loop_mode_support(ml: &MatrixLoop) -> usize {
    ml.coeffs()
        .iter()
        .map(|(p, _)| p.unsigned_abs() as usize)
        .max()
        .unwrap_or(0)
}

/// Hermitian matrix of delta_t = [[-t i d/dtheta, D*], [D, t i d/dtheta]]
/// over theta-modes |m| <= M.
pub fn delta_dense(ml: &MatrixLoop, t: f64, m_cutoff: usize) -> Result<CMatrix, AssembleError> {
    let support = loop_mode_support(ml);
    if m_cutoff < support {
        return Err(AssembleError::TruncationTooSmall {
            what: "base cutoff below the loop's Fourier support",
            required: support,
            given: m_cutoff,
        });
    }
    let n_modes = 2 * m_cutoff + 1;
    let (rows, cols) = (ml.rows, ml.cols);
    let plus = n_modes * cols;
    let dim = plus + n_modes * rows;
    let mut h = CMatrix::zeros(dim, dim);
    for mi in 0..n_modes {
        let tm = t * (mi as i64 - m_cutoff as i64) as f64;
        for comp in 0..cols {
            let idx = mi * cols + comp;
            h[(idx, idx)] = Complex64::new(tm, 0.0);
        }
        for comp in 0..rows {
            let idx = plus + mi * rows + comp;
            h[(idx, idx)] = Complex64::new(-tm, 0.0);
        }
    }
    for (p, block) in ml.coeffs() {
        for mj in 0..n_modes as i64 {
            let mi = mj + p;
            if mi < 0 || mi >= n_modes as i64 {
                continue;
            }
            for r in 0..rows {
                for c in 0..cols {
                    let v = block[(r, c)];
                    let row_idx = plus + mi as usize * rows + r;
                    let col_idx = mj as usize * cols + c;
                    h[(row_idx, col_idx)] += v;
                    h[(col_idx, row_idx)] += v.conj();
                }
            }
        }
    }
    Ok(h)
}

/// Append the stabilization blocks to the base loop:
/// D_U = [[D, D12], [D21, D22]] as one (rows+u^-) x (cols+u^+) loop.
pub fn stabilized_loop(st: &StabilizedFamily) -> Result<MatrixLoop, AssembleError> {
    let FamilySpec::MatrixLoop(base) = &st.base else {
        return Err(AssembleError::Unsupported(
            "stabilized dense assembly requires a matrix-loop base".into(),
        ));
    };
    let rows = base.rows + st.u_minus_dim;
    let cols = base.cols + st.u_plus_dim;
    let mut merged: std::collections::BTreeMap<i64, CMatrix> = std::collections::BTreeMap::new();
    let mut add = |mode: i64, row0: usize, col0: usize, block: &CMatrix| {
        let entry = merged
            .entry(mode)
            .or_insert_with(|| CMatrix::zeros(rows, cols));
        for r in 0..block.n_rows() {
            for c in 0..block.n_cols() {
                entry[(row0 + r, col0 + c)] += block[(r, c)];
            }
        }
    };
    for (p, b) in base.coeffs() {
        add(*p, 0, 0, b);
    }
    if let Some(d12) = &st.d12 {
        for (p, b) in d12.coeffs() {
            add(*p, 0, base.cols, b);
        }
    }
    if let Some(d21) = &st.d21 {
        for (p, b) in d21.coeffs() {
            add(*p, base.rows, 0, b);
        }
    }
    if let Some(d22) = &st.d22 {
        for (p, b) in d22.coeffs() {
            add(*p, base.rows, base.cols, b);
        }
    }
    let coeffs: Vec<(i64, CMatrix)> = merged.into_iter().collect();
    MatrixLoop::new(rows, cols, coeffs)
        .map_err(|e| AssembleError::Unsupported(format!("stabilized loop data: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::stabilize;
    use crate::linalg::hermitian_eigenvalues;

    fn circle_loop() -> MatrixLoop {
        let half = Complex64::new(0.5, 0.0);
        let half_i = Complex64::new(0.0, 0.5);
        let plus = CMatrix::from_fn(1, 2, |_, j| if j == 0 { half } else { -half_i });
        let minus = CMatrix::from_fn(1, 2, |_, j| if j == 0 { half } else { half_i });
        MatrixLoop::new(1, 2, vec![(1, plus), (-1, minus)]).unwrap()
    }

    #[test]
    fn dimensions_and_hermiticity() {
        let h = delta_dense(&circle_loop(), 1.0, 8).unwrap();
        assert_eq!(h.n_rows(), 3 * 17);
        assert!(h.hermiticity_defect() < 1e-15);
    }

    #[test]
    fn rejects_insufficient_base_cutoff() {
        assert!(matches!(
            delta_dense(&circle_loop(), 1.0, 0),
            Err(AssembleError::TruncationTooSmall { .. })
        ));
    }

    #[test]
    fn constant_scalar_loop_closed_form() {
        // D = [2] constant: eigenvalues +-sqrt(t^2 m^2 + 4).
        let two = CMatrix::from_fn(1, 1, |_, _| Complex64::new(2.0, 0.0));
        let ml = MatrixLoop::new(1, 1, vec![(0, two)]).unwrap();
        let h = delta_dense(&ml, 0.5, 4).unwrap();
        let mut expect: Vec<f64> = Vec::new();
        for m in -4i64..=4 {
            let e = (0.25 * (m * m) as f64 + 4.0).sqrt();
            expect.push(e);
            expect.push(-e);
        }
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let evals = hermitian_eigenvalues(&h).unwrap();
        for (a, b) in evals.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn stabilized_circle_loop_is_a_rotation() {
        let fam = FamilySpec::MatrixLoop(circle_loop());
        let st = stabilize(&fam, 720).unwrap();
        let du = stabilized_loop(&st).unwrap();
        assert_eq!((du.rows, du.cols), (2, 2));
        // D_U(theta) should be unitary up to frame phase: D_U* D_U = I.
        for j in 0..16 {
            let th = std::f64::consts::TAU * j as f64 / 16.0;
            let d = du.at(th);
            let gram = d.adjoint().mul(&d);
            assert!((gram[(0, 0)].re - 1.0).abs() < 1e-8, "theta={th}");
            assert!((gram[(1, 1)].re - 1.0).abs() < 1e-8);
            assert!(gram[(0, 1)].norm() < 1e-8);
        }
    }
}
